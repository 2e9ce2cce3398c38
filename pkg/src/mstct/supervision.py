"""Ground-truth targets and the joint BCE + heat-map focal loss."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import ConfigError, ContractError, Tensor

POSITIVE_TOL = 1e-9


class AnnotationError(ValueError):
    """An action instance lies outside the sequence or names a bad class."""


@dataclass(frozen=True)
class ActionInstance:
    """Inclusive token span [start, end] of one action of class ``class_id``.

    ``ref_center``/``ref_duration`` pin the Gaussian to the uncropped
    instance when a window clips it.
    """

    class_id: int
    start: int
    end: int
    ref_center: float | None = None
    ref_duration: int | None = None

    @property
    def center(self) -> float:
        return self.ref_center if self.ref_center is not None else (self.start + self.end) / 2

    @property
    def duration(self) -> int:
        return self.ref_duration if self.ref_duration is not None else self.end - self.start + 1

    def shifted(self, offset: int) -> "ActionInstance":
        return ActionInstance(self.class_id, self.start - offset, self.end - offset,
                              self.center - offset, self.duration)


def _check(instances, length: int, C: int) -> None:
    for a in instances:
        if not 0 <= a.class_id < C:
            raise AnnotationError(f"class id {a.class_id} outside [0, {C})")
        if not 0 <= a.start <= a.end < length:
            raise AnnotationError(f"instance [{a.start}, {a.end}] outside [0, {length})")


def frame_labels(instances, length: int, C: int) -> np.ndarray:
    """(length, C) multi-hot matrix: 1 where some instance of the class covers the frame."""
    _check(instances, length, C)
    y = np.zeros((length, C))
    for a in instances:
        y[a.start : a.end + 1, a.class_id] = 1.0
    return y


def round_center(c: float) -> int:
    return int(math.floor(c + 0.5))


def gaussian_response(t, center: float, sigma: float):
    """Peak-normalised Gaussian exp(-(t - center)^2 / (2 sigma^2))."""
    t = np.asarray(t, dtype=float)
    return np.exp(-((t - center) ** 2) / (2.0 * sigma * sigma))


def instance_sigma(a: ActionInstance, sigma_ratio: float) -> float:
    if a.duration <= 0:
        warnings.warn(f"zero-duration instance {a}; using sigma = 1 token", stacklevel=3)
        return 1.0
    return sigma_ratio * a.duration


def build_gt_heatmap(instances, length: int, C: int, sigma_ratio: float = 0.5) -> np.ndarray:
    """(length, C) heat-map: per class, max over that class's instance Gaussians.

    Each Gaussian is centred on the rounded instance centre (so the peak is
    exactly 1 there) with sigma = sigma_ratio * duration.
    """
    if sigma_ratio <= 0:
        raise ConfigError(f"sigma_ratio must be > 0, got {sigma_ratio}")
    for a in instances:
        if not 0 <= a.class_id < C:
            raise AnnotationError(f"class id {a.class_id} outside [0, {C})")
    g = np.zeros((length, C))
    t = np.arange(length)
    for a in instances:
        resp = gaussian_response(t, round_center(a.center), instance_sigma(a, sigma_ratio))
        np.maximum(g[:, a.class_id], resp, out=g[:, a.class_id])
    return g


def focal_loss(G: Tensor, G_star: np.ndarray, A: int, mask: np.ndarray | None = None) -> Tensor:
    """Centre-heat-map focal loss, normalised by the instance count ``A``.

    Cells with G* == 1 contribute -(1-G)^2 log G; the rest contribute
    -(1-G*)^4 G^2 log(1-G). ``mask`` (length T) drops padded frames.
    """
    if A < 1:
        raise ContractError("focal_loss: number of action instances A must be >= 1")
    G = nx.as_tensor(G)
    G_star = np.asarray(G_star, dtype=float)
    if G.shape != G_star.shape:
        raise nx.ShapeError(f"focal_loss: prediction {G.shape} vs target {G_star.shape}")
    pos = (G_star >= 1.0 - POSITIVE_TOL).astype(float)
    neg_w = (1.0 - pos) * (1.0 - G_star) ** 4
    if mask is not None:
        m = np.asarray(mask, dtype=float)[:, None]
        pos = pos * m
        neg_w = neg_w * m
    pos_term = nx.mul(nx.mul(nx.square(nx.sub(1.0, G)), nx.log(G)), pos)
    neg_term = nx.mul(nx.mul(nx.square(G), nx.log(nx.sub(1.0, G))), neg_w)
    return nx.mul(nx.sum(nx.add(pos_term, neg_term)), -1.0 / A)


def bce_loss(y_hat: Tensor, y: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean binary cross-entropy over all (unmasked) cells."""
    y_hat = nx.as_tensor(y_hat)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape:
        raise nx.ShapeError(f"bce_loss: prediction {y_hat.shape} vs labels {y.shape}")
    terms = nx.add(nx.mul(nx.log(y_hat), y), nx.mul(nx.log(nx.sub(1.0, y_hat)), 1.0 - y))
    if mask is None:
        return nx.mul(nx.sum(terms), -1.0 / y.size)
    m = np.asarray(mask, dtype=float)[:, None]
    count = m.sum() * y.shape[1]
    if count == 0:
        raise ContractError("bce_loss: mask removes every frame")
    return nx.mul(nx.sum(nx.mul(terms, m)), -1.0 / count)


@dataclass
class LossTerms:
    total: Tensor
    bce: float | None
    focal: float | None


def total_loss(y_hat, y, G, G_star, A: int, alpha: float,
               mask: np.ndarray | None = None) -> LossTerms:
    """BCE + alpha * focal; either prediction may be None when its branch is off."""
    if y_hat is None and G is None:
        raise ConfigError("total_loss: no branch produced a prediction")
    bce = focal = None
    total = None
    if y_hat is not None:
        bce_t = bce_loss(y_hat, y, mask)
        bce = bce_t.item()
        total = bce_t
    if G is not None:
        foc_t = focal_loss(G, G_star, A, mask)
        focal = foc_t.item()
        # heat-map-only models optimise the focal term alone
        if total is None:
            total = foc_t
        elif alpha != 0:
            total = nx.add(total, nx.mul(foc_t, alpha))
    return LossTerms(total, bce, focal)
