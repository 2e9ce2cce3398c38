"""Synthetic untrimmed videos, the dataset directory format, and windowing.

Dataset directory layout::

    manifest.json        format_version, byte_order, dtype, num_classes, dim,
                         class_names, composites, videos[...]
    <video_id>.f32       little-endian float32, row-major (length x dim)

Each manifest video entry is
``{id, length, dim, feature_file, instances: [{class, start, end}]}`` with
inclusive token indices.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .supervision import ActionInstance, AnnotationError

FORMAT_VERSION = 1
FEATURE_DTYPE = np.dtype("<f4")


class DatasetError(ValueError):
    """Malformed or inconsistent dataset on disk."""


class SpecError(ValueError):
    """Infeasible synthetic dataset specification."""


@dataclass
class FeatureSequence:
    video_id: str
    features: np.ndarray  # (T0, D0) float64
    instances: list[ActionInstance]

    @property
    def length(self) -> int:
        return self.features.shape[0]

    def labels(self, C: int) -> np.ndarray:
        from .supervision import frame_labels

        return frame_labels(self.instances, self.length, C)


@dataclass
class Dataset:
    videos: list[FeatureSequence]
    num_classes: int
    dim: int
    class_names: list[str] = field(default_factory=list)
    composites: dict[int, list[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.videos)

    def __getitem__(self, i) -> FeatureSequence:
        return self.videos[i]

    def by_id(self, video_id: str) -> FeatureSequence:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def subset(self, idx) -> "Dataset":
        return Dataset([self.videos[i] for i in idx], self.num_classes, self.dim,
                       list(self.class_names), dict(self.composites))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for v in self.videos:
            h.update(v.video_id.encode())
            h.update(v.features.astype(FEATURE_DTYPE).tobytes())
            for a in v.instances:
                h.update(f"{a.class_id},{a.start},{a.end};".encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Parameters of the synthetic benchmark.

    Atomic classes carry a fixed random unit signature in feature space.
    A composite class has no signature of its own: each composite instance
    spans an ordered run of its constituent atomic instances (and the gaps
    between them), so it can only be recognised from temporal context.
    Atomic classes also occur on their own, outside any composite.
    """

    num_videos: int = 40
    num_classes: int = 5
    dim: int = 64
    length_range: tuple[int, int] = (128, 512)
    noise: float = 0.3
    cooccurrence: float = 0.3
    composites: dict[int, list[int]] | None = None
    atomic_duration: tuple[int, int] = (6, 14)
    gap_range: tuple[int, int] = (3, 8)
    idle_range: tuple[int, int] = (10, 24)
    composite_rate: float = 0.45
    seed: int = 0
    min_length: int = 8

    def resolved_composites(self) -> dict[int, list[int]]:
        if self.composites is not None:
            return {int(k): list(v) for k, v in self.composites.items()}
        C = self.num_classes
        if C < 3:
            return {}
        n_comp = C // 3 + (1 if C % 3 == 2 else 0)
        n_atomic = C - n_comp
        comps = {}
        for i in range(n_comp):
            a = i % n_atomic
            b = (i + 1) % n_atomic
            comps[n_atomic + i] = [a, b]
        return comps

    def validate(self) -> None:
        C = self.num_classes
        if C < 1:
            raise SpecError("num_classes must be >= 1")
        if self.dim < 1:
            raise SpecError("dim must be >= 1")
        if self.num_videos < 1:
            raise SpecError("num_videos must be >= 1")
        lo, hi = self.length_range
        if lo < self.min_length or hi < lo:
            raise SpecError(f"length range {self.length_range} invalid (minimum {self.min_length})")
        for p in (self.cooccurrence, self.composite_rate):
            if not 0.0 <= p <= 1.0:
                raise SpecError(f"probability {p} outside [0, 1]")
        if self.noise < 0:
            raise SpecError("noise must be >= 0")
        comps = self.resolved_composites()
        atomic = set(range(C)) - set(comps)
        if not atomic:
            raise SpecError("at least one atomic class is required")
        for c, parts in comps.items():
            if not 0 <= c < C:
                raise SpecError(f"composite class {c} outside [0, {C})")
            if len(parts) < 2:
                raise SpecError(f"composite {c} needs >= 2 constituents, got {parts}")
            bad = [p for p in parts if p not in atomic]
            if bad:
                raise SpecError(f"composite {c} has non-atomic constituents {bad}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["length_range"] = list(self.length_range)
        d["atomic_duration"] = list(self.atomic_duration)
        d["gap_range"] = list(self.gap_range)
        d["idle_range"] = list(self.idle_range)
        d["composites"] = {str(k): v for k, v in self.resolved_composites().items()}
        return d


def class_signatures(spec: SyntheticSpec) -> np.ndarray:
    """(C, dim) unit vectors; rows of composite classes are zero."""
    rng = np.random.default_rng([spec.seed, 0xC1A55])
    s = rng.standard_normal((spec.num_classes, spec.dim))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    for c in spec.resolved_composites():
        s[c] = 0.0
    return s


def _generate_video(spec: SyntheticSpec, index: int, sig: np.ndarray) -> FeatureSequence:
    rng = np.random.default_rng([spec.seed, index])
    comps = spec.resolved_composites()
    atomic = sorted(set(range(spec.num_classes)) - set(comps))
    length = int(rng.integers(spec.length_range[0], spec.length_range[1] + 1))
    instances: list[ActionInstance] = []

    def dur():
        return int(rng.integers(spec.atomic_duration[0], spec.atomic_duration[1] + 1))

    t = int(rng.integers(0, spec.idle_range[1] + 1))
    # lay out events left to right: either a composite run or a lone atomic action
    while True:
        if comps and rng.random() < spec.composite_rate:
            c = int(rng.choice(sorted(comps)))
            parts = comps[c]
            spans = []
            cur = t
            for i, p in enumerate(parts):
                d = dur()
                spans.append((p, cur, cur + d - 1))
                cur += d
                if i < len(parts) - 1:
                    cur += int(rng.integers(spec.gap_range[0], spec.gap_range[1] + 1))
            end = cur - 1
            if end >= length:
                break
            for p, s, e in spans:
                instances.append(ActionInstance(p, s, e))
            instances.append(ActionInstance(c, t, end))
        else:
            p = int(rng.choice(atomic))
            d = dur()
            end = t + d - 1
            if end >= length:
                break
            instances.append(ActionInstance(p, t, end))
            if len(atomic) > 1 and rng.random() < spec.cooccurrence:
                # a shorter co-occurring action of another atomic class
                q = int(rng.choice([a for a in atomic if a != p]))
                qd = max(2, d // 2)
                qs = t + int(rng.integers(0, d - qd + 1))
                instances.append(ActionInstance(q, qs, qs + qd - 1))
        t = end + 1 + int(rng.integers(spec.idle_range[0], spec.idle_range[1] + 1))
        if t >= length:
            break

    active = np.zeros((length, spec.num_classes))
    for a in instances:
        if a.class_id not in comps:
            active[a.start : a.end + 1, a.class_id] = 1.0
    features = active @ sig + spec.noise * rng.standard_normal((length, spec.dim))
    # float32-representable so the on-disk format round-trips exactly
    features = features.astype(FEATURE_DTYPE).astype(np.float64)
    instances.sort(key=lambda a: (a.start, a.class_id, a.end))
    return FeatureSequence(f"vid{index:04d}", features, instances)


def generate_synthetic_dataset(spec: SyntheticSpec) -> Dataset:
    spec.validate()
    sig = class_signatures(spec)
    videos = [_generate_video(spec, i, sig) for i in range(spec.num_videos)]
    comps = spec.resolved_composites()
    names = [f"composite{c}" if c in comps else f"atomic{c}" for c in range(spec.num_classes)]
    return Dataset(videos, spec.num_classes, spec.dim, names, comps)


def check_composite_structure(ds: Dataset) -> list[str]:
    """List violations of: every composite instance covers >= 2 atomic instances
    of its constituent classes, starting and ending on constituent boundaries."""
    problems = []
    for v in ds.videos:
        for a in v.instances:
            parts = ds.composites.get(a.class_id)
            if parts is None:
                continue
            inside = [b for b in v.instances if b.class_id in parts
                      and a.start <= b.start and b.end <= a.end]
            if len(inside) < 2:
                problems.append(f"{v.video_id}: composite {a} covers {len(inside)} constituents")
            elif min(b.start for b in inside) != a.start or max(b.end for b in inside) != a.end:
                problems.append(f"{v.video_id}: composite {a} not bounded by its constituents")
    return problems


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, directory, extra: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for v in ds.videos:
        fname = f"{v.video_id}.f32"
        (d / fname).write_bytes(np.ascontiguousarray(v.features, dtype=FEATURE_DTYPE).tobytes())
        entries.append({
            "id": v.video_id,
            "length": int(v.length),
            "dim": int(v.features.shape[1]),
            "feature_file": fname,
            "instances": [{"class": a.class_id, "start": a.start, "end": a.end} for a in v.instances],
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "byte_order": "little",
        "dtype": "float32",
        "layout": "row-major",
        "num_classes": ds.num_classes,
        "dim": ds.dim,
        "class_names": ds.class_names,
        "composites": {str(k): v for k, v in ds.composites.items()},
        "videos": entries,
    }
    if extra:
        manifest.update(extra)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return d


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.is_file():
        raise DatasetError(f"missing manifest: {mpath}")
    try:
        m = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed manifest {mpath}: {e}") from None
    for key in ("format_version", "num_classes", "dim", "videos"):
        if key not in m:
            raise DatasetError(f"manifest lacks '{key}'")
    if m["format_version"] != FORMAT_VERSION:
        raise DatasetError(f"unsupported format_version {m['format_version']}")
    C, dim = int(m["num_classes"]), int(m["dim"])
    videos = []
    for e in m["videos"]:
        try:
            vid, length, vdim, fname = e["id"], int(e["length"]), int(e["dim"]), e["feature_file"]
        except KeyError as k:
            raise DatasetError(f"video entry lacks {k}") from None
        if vdim != dim:
            raise DatasetError(f"{vid}: dim {vdim} differs from dataset dim {dim}")
        fpath = d / fname
        if not fpath.is_file():
            raise DatasetError(f"{vid}: missing feature file {fpath}")
        raw = fpath.read_bytes()
        expected = length * dim * FEATURE_DTYPE.itemsize
        if len(raw) != expected:
            raise DatasetError(f"{vid}: feature file {fname} has {len(raw)} bytes, expected {expected}")
        feats = np.frombuffer(raw, dtype=FEATURE_DTYPE).reshape(length, dim).astype(np.float64)
        insts = []
        for a in e.get("instances", []):
            inst = ActionInstance(int(a["class"]), int(a["start"]), int(a["end"]))
            if not 0 <= inst.class_id < C:
                raise DatasetError(f"{vid}: unknown class id {inst.class_id}")
            if not 0 <= inst.start <= inst.end < length:
                raise DatasetError(f"{vid}: instance [{inst.start}, {inst.end}] outside [0, {length})")
            insts.append(inst)
        videos.append(FeatureSequence(vid, feats, insts))
    comps = {int(k): list(v) for k, v in m.get("composites", {}).items()}
    return Dataset(videos, C, dim, list(m.get("class_names", [])), comps)


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


@dataclass
class Window:
    x: np.ndarray  # (T, D0)
    instances: list[ActionInstance]  # window coordinates, original centre/duration kept
    mask: np.ndarray  # (T,) 1 for real frames, 0 for padding
    start: int


def clip_instances(instances, start: int, length: int) -> list[ActionInstance]:
    out = []
    for a in instances:
        s, e = a.start - start, a.end - start
        if e < 0 or s >= length:
            continue
        out.append(ActionInstance(a.class_id, max(s, 0), min(e, length - 1),
                                  a.center - start, a.duration))
    return out


def sample_training_window(video: FeatureSequence, T: int, rng: np.random.Generator) -> Window:
    """Random run of T consecutive tokens; short videos are zero-padded on the right."""
    T0, dim = video.features.shape
    if T0 <= T:
        start = 0
        x = np.zeros((T, dim))
        x[:T0] = video.features
        mask = np.zeros(T)
        mask[:T0] = 1.0
        insts = clip_instances(video.instances, 0, T0)
    else:
        start = int(rng.integers(0, T0 - T + 1))
        x = video.features[start : start + T].copy()
        mask = np.ones(T)
        insts = clip_instances(video.instances, start, T)
    return Window(x, insts, mask, start)


def window_starts(T0: int, T: int, stride: int) -> list[int]:
    """Starts 0, stride, ... with a final window right-aligned to the video end."""
    if stride < 1 or stride > T:
        raise ValueError(f"stride must be in [1, {T}], got {stride}")
    if T0 <= T:
        return [0]
    starts = list(range(0, T0 - T + 1, stride))
    if starts[-1] + T < T0:
        starts.append(T0 - T)
    return starts


def sliding_window_infer(model: Callable[[np.ndarray], np.ndarray], video: FeatureSequence | np.ndarray,
                         T: int, stride: int | None = None) -> np.ndarray:
    """Average per-frame probabilities over overlapping windows -> (T0, C)."""
    feats = video.features if isinstance(video, FeatureSequence) else np.asarray(video)
    T0, dim = feats.shape
    stride = T // 2 if stride is None else stride
    total = None
    count = np.zeros(T0)
    for s in window_starts(T0, T, stride):
        if T0 < T:
            x = np.zeros((T, dim))
            x[:T0] = feats
        else:
            x = feats[s : s + T]
        p = np.asarray(model(x))[: min(T, T0)]
        if total is None:
            total = np.zeros((T0, p.shape[1]))
        total[s : s + p.shape[0]] += p
        count[s : s + p.shape[0]] += 1
    return total / count[:, None]


def split_train_val(n: int, seed: int, val_fraction: float = 0.2) -> tuple[list[int], list[int]]:
    """Seeded split of video indices; at least one video on each side when n >= 2."""
    perm = np.random.default_rng([seed, 0x5B117]).permutation(n)
    n_val = int(round(n * val_fraction))
    if n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    return sorted(perm[n_val:].tolist()), sorted(perm[:n_val].tolist())


def directory_hash(directory) -> str:
    h = hashlib.sha256()
    for root, _, files in sorted(os.walk(directory)):
        for f in sorted(files):
            p = Path(root) / f
            h.update(str(p.relative_to(directory)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


__all__ = [
    "ActionInstance", "AnnotationError", "Dataset", "DatasetError", "FeatureSequence",
    "SpecError", "SyntheticSpec", "Window", "check_composite_structure", "clip_instances",
    "directory_hash", "generate_synthetic_dataset", "load_dataset", "sample_training_window",
    "save_dataset", "sliding_window_infer", "split_train_val", "window_starts",
]
