"""Training loop: random windows, joint loss, Adam, LR plateau on validation mAP."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .config import RunConfig
from .dataio import Dataset, sample_training_window, sliding_window_infer, split_train_val
from .metrics import EvalReport, evaluate, per_frame_map
from .model import ModelConfig, ModelParams, Predictor, forward, init_params
from .supervision import build_gt_heatmap, frame_labels, total_loss

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """A loss term became non-finite."""


class ReduceOnPlateau:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, state: nx.AdamState, factor: float = 0.5, patience: int = 8, mode: str = "max"):
        self.state = state
        self.factor = factor
        self.patience = patience
        self.sign = 1.0 if mode == "max" else -1.0
        self.best = -math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> None:
        if math.isnan(metric):
            return
        if self.sign * metric > self.best:
            self.best = self.sign * metric
            self.bad_epochs = 0
            return
        self.bad_epochs += 1
        if self.bad_epochs > self.patience:
            self.state.lr *= self.factor
            self.bad_epochs = 0


@dataclass
class TrainResult:
    params: ModelParams
    cfg: ModelConfig
    history: list[dict] = field(default_factory=list)
    report: EvalReport | None = None
    best_epoch: int = 0
    best_val_map: float = float("nan")
    val_ids: list[str] = field(default_factory=list)


def window_loss(params: ModelParams, cfg: ModelConfig, win):
    """Joint loss for one training window."""
    y = frame_labels(win.instances, cfg.T, cfg.C)
    g_star = build_gt_heatmap(win.instances, cfg.T, cfg.C, cfg.sigma_ratio)
    y_hat, g = forward(win.x, params, cfg)
    return total_loss(y_hat, y, g, g_star, max(1, len(win.instances)), cfg.alpha, mask=win.mask)


def predict_videos(params: ModelParams, cfg: ModelConfig, ds: Dataset, stride: int) -> list[np.ndarray]:
    model = Predictor(params, cfg)
    return [sliding_window_infer(model, v, cfg.T, stride) for v in ds.videos]


def validation_report(params, cfg, ds: Dataset, stride: int, taus=(), threshold=0.5) -> EvalReport:
    preds = predict_videos(params, cfg, ds, stride)
    labels = [v.labels(cfg.C) for v in ds.videos]
    return evaluate(preds, labels, taus, threshold)


def _copy_params(params: ModelParams) -> ModelParams:
    out = ModelParams()
    for k, t in params.items():
        out[k] = nx.parameter(t.data.copy(), name=k)
    return out


def train(ds: Dataset, run: RunConfig, on_epoch=None) -> TrainResult:
    """Train on an 80/20 (seeded) video split; keeps the best-validation parameters."""
    cfg = run.model
    if ds.num_classes != cfg.C:
        raise nx.ConfigError(f"dataset has {ds.num_classes} classes, config C={cfg.C}")
    if ds.dim != cfg.D0:
        raise nx.ConfigError(f"dataset feature dim {ds.dim}, config D0={cfg.D0}")
    train_idx, val_idx = split_train_val(len(ds), run.seed, run.val_fraction)
    if not val_idx:
        val_idx = train_idx
    train_set, val_set = ds.subset(train_idx), ds.subset(val_idx)

    params = init_params(cfg, run.seed)
    plist = params.tensors()
    state = nx.AdamState(lr=run.lr)
    sched = ReduceOnPlateau(state, run.lr_factor, run.lr_patience)
    rng = np.random.default_rng([run.seed, 1])
    result = TrainResult(params, cfg, val_ids=[v.video_id for v in val_set.videos])
    best = None

    for epoch in range(1, run.epochs + 1):
        order = rng.permutation(np.repeat(np.arange(len(train_set)), run.windows_per_video))
        sums = {"loss": 0.0, "bce": 0.0, "focal": 0.0}
        n_samples = 0
        for b0 in range(0, len(order), run.batch_size):
            batch = order[b0 : b0 + run.batch_size]
            for vi in batch:
                win = sample_training_window(train_set.videos[vi], cfg.T, rng)
                terms = window_loss(params, cfg, win)
                for name, val in (("loss", terms.total.item()), ("bce", terms.bce), ("focal", terms.focal)):
                    if val is None:
                        continue
                    if not math.isfinite(val):
                        raise NumericalError(
                            f"epoch {epoch}: non-finite {name} loss on {train_set.videos[vi].video_id}")
                    sums[name] += val
                nx.backward(nx.mul(terms.total, 1.0 / len(batch)))
                n_samples += 1
            nx.adam_step(plist, state)
        val_map = per_frame_map(predict_videos(params, cfg, val_set, run.stride),
                                [v.labels(cfg.C) for v in val_set.videos]).mAP
        rec = {
            "epoch": epoch,
            "loss": sums["loss"] / n_samples,
            "bce": sums["bce"] / n_samples if cfg.use_classification_branch else None,
            "focal": sums["focal"] / n_samples if cfg.use_heatmap_branch else None,
            "lr": state.lr,
            "val_mAP": val_map,
        }
        result.history.append(rec)
        log.info("epoch %d loss %.5f bce %s focal %s lr %.2e val_mAP %.4f", epoch, rec["loss"],
                 _f(rec["bce"]), _f(rec["focal"]), rec["lr"], val_map)
        if on_epoch is not None:
            on_epoch(rec)
        if best is None or val_map > result.best_val_map:
            result.best_val_map = val_map
            result.best_epoch = epoch
            best = _copy_params(params)
        sched.step(val_map)

    result.params = best
    result.report = validation_report(best, cfg, val_set, run.stride, run.taus, run.threshold)
    return result


def _f(v):
    return "-" if v is None else f"{v:.5f}"
