"""Per-frame mAP and action-conditional precision / recall / F1 / mAP."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


class EvalError(ValueError):
    """Prediction and label arrays do not line up."""


def per_frame_ap(scores, labels) -> float:
    """Non-interpolated AP: mean precision at each positive's rank.

    Ties in score are broken by ascending original index. Returns NaN when
    there are no positive labels.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise EvalError(f"scores {scores.shape} and labels {labels.shape} differ in length")
    pos = labels > 0
    n_pos = int(pos.sum())
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, n_pos + 1) / ranks))


@dataclass
class ConditionalMetrics:
    tau: int
    precision: float
    recall: float
    f1: float
    mAP: float
    pairs: int

    def as_dict(self) -> dict:
        return {"tau": self.tau, "P_AC": self.precision, "R_AC": self.recall,
                "F1_AC": self.f1, "mAP_AC": self.mAP, "pairs": self.pairs}


@dataclass
class EvalReport:
    per_class_ap: list[float]
    mAP: float
    frames: int
    positives: list[int]
    conditional: dict[int, ConditionalMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and np.isnan(x)) else x

        return {
            "mAP": clean(self.mAP),
            "per_class_ap": [clean(a) for a in self.per_class_ap],
            "frames": self.frames,
            "positives": self.positives,
            "conditional": {str(t): {k: clean(v) for k, v in m.as_dict().items()}
                            for t, m in self.conditional.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        def nan(x):
            return float("nan") if x is None else x

        cond = {}
        for t, m in d.get("conditional", {}).items():
            cond[int(t)] = ConditionalMetrics(int(m["tau"]), nan(m["P_AC"]), nan(m["R_AC"]),
                                              nan(m["F1_AC"]), nan(m["mAP_AC"]), int(m["pairs"]))
        return cls([nan(a) for a in d["per_class_ap"]], nan(d["mAP"]), int(d["frames"]),
                   list(d["positives"]), cond)

    def csv_rows(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class_id", "AP", "positives"])
        for c, (ap, n) in enumerate(zip(self.per_class_ap, self.positives)):
            w.writerow([c, "" if np.isnan(ap) else repr(float(ap)), n])
        return buf.getvalue()


def _stack(preds, labels) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(preds, np.ndarray) and preds.ndim == 2:
        preds, labels = [preds], [labels]
    if len(preds) != len(labels):
        raise EvalError(f"{len(preds)} prediction arrays vs {len(labels)} label arrays")
    for i, (p, y) in enumerate(zip(preds, labels)):
        if np.shape(p) != np.shape(y) or np.ndim(p) != 2:
            raise EvalError(f"video {i}: prediction shape {np.shape(p)} vs labels {np.shape(y)}")
    shapes = {np.shape(p)[1] for p in preds}
    if len(shapes) > 1:
        raise EvalError(f"class counts differ across videos: {sorted(shapes)}")
    return np.concatenate(preds, axis=0), np.concatenate(labels, axis=0)


def per_frame_map(preds, labels) -> EvalReport:
    """Pool all frames across videos, AP per class, mean over classes with positives."""
    P, Y = _stack(preds, labels)
    aps = [per_frame_ap(P[:, c], Y[:, c]) for c in range(P.shape[1])]
    defined = [a for a in aps if not np.isnan(a)]
    m = float(np.mean(defined)) if defined else float("nan")
    return EvalReport(aps, m, int(P.shape[0]), [int(n) for n in (Y > 0).sum(axis=0)])


def _presence_near(y: np.ndarray, tau: int) -> np.ndarray:
    """near[t, c] = class c present anywhere in frames [t - tau, t + tau]."""
    T = y.shape[0]
    pos = (y > 0).astype(np.int64)
    csum = np.vstack([np.zeros((1, y.shape[1]), dtype=np.int64), np.cumsum(pos, axis=0)])
    lo = np.clip(np.arange(T) - tau, 0, T)
    hi = np.clip(np.arange(T) + tau + 1, 0, T)
    return (csum[hi] - csum[lo]) > 0


def action_conditional_metrics(preds, labels, tau: int, threshold: float = 0.5) -> ConditionalMetrics:
    """Metrics of class j restricted to frames where class i (i != j) occurs within tau frames.

    Per ordered pair (i, j), the support is the set of frames t whose
    ground truth contains class i somewhere in [t - tau, t + tau] of the
    same video. Precision, recall, F1 (threshold-binarised) and AP of class
    j are computed on that support and macro-averaged over pairs with a
    non-empty support holding >= 1 positive of j. Precision is 0 when
    nothing is predicted positive.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if isinstance(preds, np.ndarray) and preds.ndim == 2:
        preds, labels = [preds], [labels]
    P, Y = _stack(preds, labels)
    near = np.concatenate([_presence_near(np.asarray(y), tau) for y in labels], axis=0)
    C = P.shape[1]
    ps, rs, fs, aps = [], [], [], []
    for i in range(C):
        sup = near[:, i]
        if not sup.any():
            continue
        for j in range(C):
            if i == j:
                continue
            yj = Y[sup, j] > 0
            if not yj.any():
                continue
            sj = P[sup, j]
            pred = sj >= threshold
            tp = float(np.sum(pred & yj))
            npred = float(np.sum(pred))
            prec = tp / npred if npred else 0.0
            rec = tp / float(yj.sum())
            f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
            ps.append(prec)
            rs.append(rec)
            fs.append(f1)
            aps.append(per_frame_ap(sj, yj))
    if not ps:
        nan = float("nan")
        return ConditionalMetrics(tau, nan, nan, nan, nan, 0)
    return ConditionalMetrics(tau, float(np.mean(ps)), float(np.mean(rs)), float(np.mean(fs)),
                              float(np.mean(aps)), len(ps))


def evaluate(preds, labels, taus=(), threshold: float = 0.5) -> EvalReport:
    report = per_frame_map(preds, labels)
    for tau in taus:
        report.conditional[int(tau)] = action_conditional_metrics(preds, labels, int(tau), threshold)
    return report
