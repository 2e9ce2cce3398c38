"""Forward pass: temporal encoder, scale mixer and the two heads.

Weights live in a flat, ordered ``ModelParams`` mapping; every layer is a
plain function of (input, params, config). Linear weights are stored
(Din, Dout) so that ``y = x @ w + b`` on (tokens, channels) matrices.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterator

import numpy as np

from . import numerics as nx
from .numerics import ConfigError, Tensor

STAGE_TYPES = ("convtransformer", "pure_transformer", "pure_convolution")
PROB_EPS = 1e-7


@dataclass(frozen=True)
class ModelConfig:
    N: int = 4
    B: int = 1
    H: int = 4
    D0: int = 64
    D: int = 32
    gamma: float = 1.5
    theta: int = 4
    k: int = 3
    T: int = 64
    D_v: int = 32
    C: int = 5
    alpha: float = 0.05
    sigma_ratio: float = 0.5
    head_hidden: int = 512
    activation: str = "gelu"
    stage_type: str = "convtransformer"
    heatmap_source: str = "all"
    use_temporal_encoder: bool = True
    use_mixer: bool = True
    use_heatmap_branch: bool = True
    use_classification_branch: bool = True
    temporal_merge: bool = True
    use_global: bool = True
    use_local: bool = True
    local_conv: bool = True
    local_linear: bool = True
    local_residual: bool = True
    depthwise_local_conv: bool = True
    # None: on for pure_transformer only
    positional_embedding: bool | None = None

    def __post_init__(self):
        self.validate()

    # -- derived sizes -----------------------------------------------------

    def stage_dim(self, n: int) -> int:
        """Channel width of stage ``n`` (1-based), rounded up to a multiple of H."""
        raw = round(self.gamma ** (n - 1) * self.D / self.H, 9)
        return int(math.ceil(raw)) * self.H

    def stage_dims(self) -> list[int]:
        return [self.stage_dim(n) for n in range(1, self.N + 1)]

    def stage_lengths(self) -> list[int]:
        if not self.temporal_merge:
            return [self.T] * self.N
        return [self.T // 2 ** (n - 1) for n in range(1, self.N + 1)]

    @property
    def uses_positional_embedding(self) -> bool:
        if self.positional_embedding is None:
            return self.stage_type == "pure_transformer"
        return self.positional_embedding

    @property
    def heatmap_stage(self) -> int | None:
        """Stage index feeding the heat-map head, or None for the full F_v."""
        if self.heatmap_source == "all":
            return None
        return int(self.heatmap_source[len("stage"):])

    @property
    def fused_dim(self) -> int:
        if not self.use_temporal_encoder:
            return self.D0
        if not self.use_mixer:
            return self.D_v
        return self.N * self.D_v

    def validate(self) -> None:
        problems = []
        for name in ("N", "B", "H", "D0", "D", "theta", "k", "T", "D_v", "C", "head_hidden"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.gamma <= 0:
            problems.append("gamma must be > 0")
        if self.k % 2 == 0:
            problems.append(f"kernel size k={self.k} must be odd to keep resolution")
        if self.stage_type not in STAGE_TYPES:
            problems.append(f"stage_type must be one of {STAGE_TYPES}")
        if self.activation not in nx.ACTIVATIONS:
            problems.append(f"activation must be one of {sorted(nx.ACTIVATIONS)}")
        if self.use_temporal_encoder and self.temporal_merge and self.T % 2 ** (self.N - 1):
            problems.append(f"T={self.T} must be divisible by 2^(N-1)={2 ** (self.N - 1)}")
        if self.D % self.H:
            problems.append(f"D={self.D} must be divisible by H={self.H}")
        if self.heatmap_source != "all":
            ok = self.heatmap_source.startswith("stage") and self.heatmap_source[5:].isdigit()
            if not ok or not 1 <= int(self.heatmap_source[5:]) <= self.N:
                problems.append(f"heatmap_source must be 'all' or 'stage1'..'stage{self.N}'")
            elif not self.use_temporal_encoder:
                problems.append("heatmap_source=stageN needs the temporal encoder")
        if not (self.use_heatmap_branch or self.use_classification_branch):
            problems.append("at least one of the heat-map / classification branches must be on")
        if self.alpha < 0:
            problems.append("alpha must be >= 0")
        if self.sigma_ratio <= 0:
            problems.append("sigma_ratio must be > 0")
        if problems:
            raise ConfigError("; ".join(problems))

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def full_scale_config(**overrides) -> ModelConfig:
    """Full-size settings (Charades class count for the heads)."""
    base = dict(N=4, B=3, H=8, D0=1024, D=256, gamma=1.5, theta=8, k=3, T=256,
                D_v=256, C=157, alpha=0.05)
    base.update(overrides)
    return ModelConfig(**base)


def desk_config(**overrides) -> ModelConfig:
    return ModelConfig(**overrides)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


class ModelParams(dict):
    """Ordered name -> Tensor mapping; insertion order is the checkpoint order."""

    def scope(self, prefix: str) -> dict[str, Tensor]:
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.items() if k.startswith(p)}

    def tensors(self) -> list[Tensor]:
        return list(self.values())

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.values()))

    def zero_grad(self) -> None:
        for t in self.values():
            t.grad = None


def param_shapes(cfg: ModelConfig) -> Iterator[tuple[str, tuple[int, ...], str]]:
    """Yield (name, shape, kind) in stable order. kind in {weight, bias, gain, pos}."""
    if cfg.uses_positional_embedding:
        yield "pos", (cfg.T, cfg.D0), "pos"
    if cfg.use_temporal_encoder:
        dims = cfg.stage_dims()
        din = cfg.D0
        for n, d in enumerate(dims, start=1):
            s = f"s{n}"
            if cfg.stage_type == "pure_transformer":
                yield f"{s}.merge.w", (din, d), "weight"
            else:
                yield f"{s}.merge.w", (cfg.k, din, d), "weight"
            yield f"{s}.merge.b", (d,), "bias"
            for j in range(1, cfg.B + 1):
                yield from _block_shapes(cfg, f"{s}.b{j}", d)
            din = d
        if cfg.use_mixer:
            for n, d in enumerate(dims, start=1):
                yield f"mix.proj{n}.w", (d, cfg.D_v), "weight"
            for n in range(1, cfg.N):
                yield f"mix.cross{n}.w", (cfg.D_v, cfg.D_v), "weight"
        else:
            yield f"mix.proj{cfg.N}.w", (dims[-1], cfg.D_v), "weight"
            if cfg.heatmap_stage is not None and cfg.heatmap_stage != cfg.N:
                yield f"mix.proj{cfg.heatmap_stage}.w", (dims[cfg.heatmap_stage - 1], cfg.D_v), "weight"
    hid = cfg.head_hidden
    if cfg.use_classification_branch:
        yield "cls.fc1.w", (cfg.fused_dim, hid), "weight"
        yield "cls.fc1.b", (hid,), "bias"
        yield "cls.fc2.w", (hid, cfg.C), "weight"
        yield "cls.fc2.b", (cfg.C,), "bias"
    if cfg.use_heatmap_branch:
        hin = cfg.fused_dim if cfg.heatmap_stage is None else cfg.D_v
        yield "hm.conv.w", (cfg.k, hin, hid), "weight"
        yield "hm.conv.b", (hid,), "bias"
        yield "hm.fc.w", (hid, cfg.C), "weight"
        yield "hm.fc.b", (cfg.C,), "bias"


def _block_shapes(cfg: ModelConfig, p: str, d: int):
    if cfg.stage_type == "pure_convolution":
        if cfg.depthwise_local_conv:
            yield f"{p}.conv.w", (cfg.k, d), "weight"
        else:
            yield f"{p}.conv.w", (cfg.k, d, d), "weight"
        yield f"{p}.conv.b", (d,), "bias"
        yield f"{p}.lin.w", (d, d), "weight"
        yield f"{p}.lin.b", (d,), "bias"
        return
    if cfg.use_global or cfg.stage_type == "pure_transformer":
        for name in ("q", "k", "v", "o"):
            yield f"{p}.attn.w{name}", (d, d), "weight"
            yield f"{p}.attn.b{name}", (d,), "bias"
    if cfg.stage_type == "pure_transformer":
        hid = cfg.theta * d
        yield f"{p}.ln1.g", (d,), "gain"
        yield f"{p}.ln1.b", (d,), "bias"
        yield f"{p}.ffn.up.w", (d, hid), "weight"
        yield f"{p}.ffn.up.b", (hid,), "bias"
        yield f"{p}.ffn.down.w", (hid, d), "weight"
        yield f"{p}.ffn.down.b", (d,), "bias"
        yield f"{p}.ln2.g", (d,), "gain"
        yield f"{p}.ln2.b", (d,), "bias"
        return
    if not cfg.use_local:
        return
    wide = cfg.theta * d if cfg.local_linear else d
    if cfg.local_linear:
        yield f"{p}.local.up.w", (d, wide), "weight"
        yield f"{p}.local.up.b", (wide,), "bias"
    if cfg.local_conv:
        if cfg.depthwise_local_conv:
            yield f"{p}.local.conv.w", (cfg.k, wide), "weight"
        else:
            yield f"{p}.local.conv.w", (cfg.k, wide, wide), "weight"
        yield f"{p}.local.conv.b", (wide,), "bias"
    if cfg.local_linear:
        yield f"{p}.local.down.w", (wide, d), "weight"
        yield f"{p}.local.down.b", (d,), "bias"


def _fans(shape: tuple[int, ...]) -> tuple[int, int]:
    if len(shape) == 2:
        return shape[0], shape[1]
    k = shape[0]
    return k * shape[1], k * shape[2]


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit layer-norm gains.

    Depthwise kernels (k, C) use fan_in = fan_out = k.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    params = ModelParams()
    for name, shape, kind in param_shapes(cfg):
        if kind == "bias":
            data = np.zeros(shape)
        elif kind == "gain":
            data = np.ones(shape)
        else:
            if kind == "weight" and name.endswith("conv.w") and len(shape) == 2:
                fan_in = fan_out = shape[0]
            else:
                fan_in, fan_out = _fans(shape)
            a = math.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-a, a, size=shape)
        params[name] = nx.parameter(data, name=name)
    return params


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def _act(cfg: ModelConfig):
    return nx.ACTIVATIONS[cfg.activation]


def _record(trace, name, x, y):
    if trace is not None:
        trace.append((name, tuple(x.shape), tuple(y.shape)))


def temporal_merge(x: Tensor, stage_index: int, params: ModelParams, cfg: ModelConfig,
                   trace: list | None = None) -> Tensor:
    """Strided temporal conv (stride 1 at stage 1) that shrinks tokens and widens channels."""
    p = params.scope(f"s{stage_index}.merge")
    stride = 2 if (stage_index > 1 and cfg.temporal_merge) else 1
    if cfg.stage_type == "pure_transformer":
        y = nx.linear(nx.avg_pool_rows(x, stride), p["w"], p["b"])
    else:
        y = nx.conv1d(x, p["w"], p["b"], stride=stride, pad=(cfg.k - 1) // 2)
    _record(trace, f"s{stage_index}.merge", x, y)
    return y


def multi_head_attention(x: Tensor, p: dict[str, Tensor], H: int) -> Tensor:
    """Concatenated per-head scaled dot-product attention mixed by W^O (no residual)."""
    t, d = x.shape
    if d % H:
        raise ConfigError(f"feature dim {d} not divisible by {H} heads")
    dh = d // H

    def heads(z):
        return nx.transpose(nx.reshape(z, (t, H, dh)), (1, 0, 2))  # (H, T, dh)

    q = heads(nx.linear(x, p["wq"], p["bq"]))
    k = heads(nx.linear(x, p["wk"], p["bk"]))
    v = heads(nx.linear(x, p["wv"], p["bv"]))
    scores = nx.mul(nx.matmul(q, nx.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
    att = nx.matmul(nx.softmax_rows(scores), v)  # (H, T, dh)
    merged = nx.reshape(nx.transpose(att, (1, 0, 2)), (t, d))
    return nx.linear(merged, p["wo"], p["bo"])


def global_relational_block(x: Tensor, block_params: dict[str, Tensor], H: int) -> Tensor:
    """Multi-head self-attention plus the residual input."""
    return nx.add(multi_head_attention(x, block_params, H), x)


def local_relational_block(m: Tensor, block_params: dict[str, Tensor], cfg: ModelConfig,
                           trace: list | None = None, name: str = "local") -> Tensor:
    """Linear up to theta*D', temporal conv + activation, linear back down, residual."""
    p = block_params
    u = m
    if cfg.local_linear:
        u = nx.linear(m, p["up.w"], p["up.b"])
        _record(trace, f"{name}.up", m, u)
    if cfg.local_conv:
        c = nx.conv1d(u, p["conv.w"], p["conv.b"], stride=1, pad=(cfg.k - 1) // 2,
                      depthwise=cfg.depthwise_local_conv)
        _record(trace, f"{name}.conv", u, c)
        u = c
    v = _act(cfg)(u)
    out = v
    if cfg.local_linear:
        out = nx.linear(v, p["down.w"], p["down.b"])
        _record(trace, f"{name}.down", v, out)
    return nx.add(out, m) if cfg.local_residual else out


def _sub(p: dict[str, Tensor], prefix: str) -> dict[str, Tensor]:
    n = len(prefix) + 1
    return {k[n:]: v for k, v in p.items() if k.startswith(prefix + ".")}


def _transformer_block(x: Tensor, p: dict[str, Tensor], cfg: ModelConfig) -> Tensor:
    # post-norm: LN(x + MHA(x)), LN(h + FFN(h))
    h = nx.layer_norm(nx.add(x, multi_head_attention(x, _sub(p, "attn"), cfg.H)), p["ln1.g"], p["ln1.b"])
    f = nx.linear(_act(cfg)(nx.linear(h, p["ffn.up.w"], p["ffn.up.b"])), p["ffn.down.w"], p["ffn.down.b"])
    return nx.layer_norm(nx.add(h, f), p["ln2.g"], p["ln2.b"])


def _conv_block(x: Tensor, p: dict[str, Tensor], cfg: ModelConfig) -> Tensor:
    c = nx.conv1d(x, p["conv.w"], p["conv.b"], stride=1, pad=(cfg.k - 1) // 2,
                  depthwise=cfg.depthwise_local_conv)
    return nx.add(_act(cfg)(nx.linear(c, p["lin.w"], p["lin.b"])), x)


def encoder_forward(x0: Tensor, params: ModelParams, cfg: ModelConfig,
                    trace: list | None = None) -> list[Tensor]:
    """Run all stages; returns [F_1, ..., F_N]."""
    if x0.shape != (cfg.T, cfg.D0):
        raise nx.ShapeError(f"encoder input must be {(cfg.T, cfg.D0)}, got {x0.shape}")
    x = x0
    outputs = []
    for n in range(1, cfg.N + 1):
        x = temporal_merge(x, n, params, cfg, trace)
        for j in range(1, cfg.B + 1):
            bp = params.scope(f"s{n}.b{j}")
            if cfg.stage_type == "pure_transformer":
                y = _transformer_block(x, bp, cfg)
                _record(trace, f"s{n}.b{j}.transformer", x, y)
            elif cfg.stage_type == "pure_convolution":
                y = _conv_block(x, bp, cfg)
                _record(trace, f"s{n}.b{j}.conv", x, y)
            else:
                y = x
                if cfg.use_global:
                    y = global_relational_block(x, _sub(bp, "attn"), cfg.H)
                    _record(trace, f"s{n}.b{j}.global", x, y)
                if cfg.use_local:
                    y = local_relational_block(y, _sub(bp, "local"), cfg, trace, f"s{n}.b{j}.local")
            x = y
        outputs.append(x)
    return outputs


def _project_up(fn: Tensor, n: int, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """g_n: project stage-n tokens to D_v, then nearest-repeat back to length T."""
    proj = nx.matmul(fn, params[f"mix.proj{n}.w"])
    factor = cfg.T // fn.shape[0]
    out = nx.repeat_rows(proj, factor)
    if out.shape[0] != cfg.T:
        raise RuntimeError(f"upsampled stage {n} has length {out.shape[0]}, expected {cfg.T}")
    return out


def ts_mixer(F: list[Tensor], params: ModelParams, cfg: ModelConfig) -> Tensor:
    """Fuse stage outputs into a T x (N*D_v) representation."""
    N = cfg.N
    g_last = _project_up(F[N - 1], N, params, cfg)
    if not cfg.use_mixer:
        return g_last
    refined = []
    for n in range(1, N):
        g = _project_up(F[n - 1], n, params, cfg)
        refined.append(nx.add(g, nx.matmul(g_last, params[f"mix.cross{n}.w"])))
    refined.append(g_last)
    return nx.concat(refined, axis=1)


def classifier_forward(fv: Tensor, params: ModelParams, cfg: ModelConfig,
                       heat_input: Tensor | None = None) -> tuple[Tensor | None, Tensor | None]:
    """Classification probabilities and heat-map, each clamped to [eps, 1-eps]."""
    if not (cfg.use_classification_branch or cfg.use_heatmap_branch):
        raise ConfigError("both classification and heat-map branches are disabled")
    act = _act(cfg)
    y = g = None
    if cfg.use_classification_branch:
        h = act(nx.linear(fv, params["cls.fc1.w"], params["cls.fc1.b"]))
        y = nx.clamp(nx.sigmoid(nx.linear(h, params["cls.fc2.w"], params["cls.fc2.b"])), PROB_EPS, 1 - PROB_EPS)
    if cfg.use_heatmap_branch:
        src = fv if heat_input is None else heat_input
        h = act(nx.conv1d(src, params["hm.conv.w"], params["hm.conv.b"], stride=1, pad=(cfg.k - 1) // 2))
        g = nx.clamp(nx.sigmoid(nx.linear(h, params["hm.fc.w"], params["hm.fc.b"])), PROB_EPS, 1 - PROB_EPS)
    return y, g


def forward(x0, params: ModelParams, cfg: ModelConfig,
            trace: list | None = None) -> tuple[Tensor | None, Tensor | None]:
    """Full network: (T, D0) tokens -> (class probabilities, heat-map)."""
    x0 = nx.as_tensor(x0)
    if cfg.uses_positional_embedding:
        x0 = nx.add(x0, params["pos"])
    if not cfg.use_temporal_encoder:
        return classifier_forward(x0, params, cfg)
    F = encoder_forward(x0, params, cfg, trace)
    fv = ts_mixer(F, params, cfg)
    heat_input = None
    if cfg.use_heatmap_branch and cfg.heatmap_stage is not None:
        heat_input = _project_up(F[cfg.heatmap_stage - 1], cfg.heatmap_stage, params, cfg)
    return classifier_forward(fv, params, cfg, heat_input)


class Predictor:
    """Callable (T, D0) array -> (T, C) class probabilities, without graph recording."""

    def __init__(self, params: ModelParams, cfg: ModelConfig):
        self.params = params
        self.cfg = cfg

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.predict(x)[0]

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        with nx.no_grad():
            y, g = forward(nx.Tensor(x), self.params, self.cfg)
        probs = y.data if y is not None else g.data
        return probs, (g.data if g is not None else None)


# ---------------------------------------------------------------------------
# analytic FLOPs
# ---------------------------------------------------------------------------


@dataclass
class LayerCost:
    name: str
    macs: int


def layer_costs(cfg: ModelConfig) -> list[LayerCost]:
    """Per-layer multiply-accumulate counts for one forward pass of T tokens."""
    T, k = cfg.T, cfg.k
    rows: list[LayerCost] = []

    def lin(name, t, din, dout):
        rows.append(LayerCost(name, t * din * dout))

    def conv(name, t, cin, cout, depthwise=False):
        rows.append(LayerCost(name, t * k * cin if depthwise else t * k * cin * cout))

    def attn(name, t, d):
        rows.append(LayerCost(name, 4 * t * d * d + 2 * t * t * d))

    if cfg.use_temporal_encoder:
        din = cfg.D0
        lengths = cfg.stage_lengths()
        dims = cfg.stage_dims()
        for n, (t, d) in enumerate(zip(lengths, dims), start=1):
            if cfg.stage_type == "pure_transformer":
                lin(f"s{n}.merge", t, din, d)
            else:
                conv(f"s{n}.merge", t, din, d)
            for j in range(1, cfg.B + 1):
                p = f"s{n}.b{j}"
                if cfg.stage_type == "pure_convolution":
                    conv(f"{p}.conv", t, d, d, cfg.depthwise_local_conv)
                    lin(f"{p}.lin", t, d, d)
                    continue
                if cfg.use_global or cfg.stage_type == "pure_transformer":
                    attn(f"{p}.global", t, d)
                if cfg.stage_type == "pure_transformer":
                    lin(f"{p}.ffn.up", t, d, cfg.theta * d)
                    lin(f"{p}.ffn.down", t, cfg.theta * d, d)
                    continue
                if not cfg.use_local:
                    continue
                wide = cfg.theta * d if cfg.local_linear else d
                if cfg.local_linear:
                    lin(f"{p}.local.up", t, d, wide)
                if cfg.local_conv:
                    conv(f"{p}.local.conv", t, wide, wide, cfg.depthwise_local_conv)
                if cfg.local_linear:
                    lin(f"{p}.local.down", t, wide, d)
            din = d
        if cfg.use_mixer:
            for n, (t, d) in enumerate(zip(lengths, dims), start=1):
                lin(f"mix.proj{n}", t, d, cfg.D_v)
            for n in range(1, cfg.N):
                lin(f"mix.cross{n}", T, cfg.D_v, cfg.D_v)
        else:
            lin(f"mix.proj{cfg.N}", lengths[-1], dims[-1], cfg.D_v)
    fin = cfg.fused_dim
    if cfg.use_classification_branch:
        lin("cls.fc1", T, fin, cfg.head_hidden)
        lin("cls.fc2", T, cfg.head_hidden, cfg.C)
    if cfg.use_heatmap_branch:
        hin = fin if cfg.heatmap_stage is None else cfg.D_v
        conv("hm.conv", T, hin, cfg.head_hidden)
        lin("hm.fc", T, cfg.head_hidden, cfg.C)
    return rows


def estimate_flops(cfg: ModelConfig) -> dict:
    """Total MACs and FLOPs (2 per MAC) plus the per-layer table."""
    rows = layer_costs(cfg)
    macs = int(sum(r.macs for r in rows))
    return {"macs": macs, "flops": 2 * macs, "layers": rows}


def architecture_table(cfg: ModelConfig) -> list[tuple[str, tuple[int, int], tuple[int, int]]]:
    """Analytic (layer, input size, output size) rows of the temporal encoder."""
    rows = []
    lengths, dims = cfg.stage_lengths(), cfg.stage_dims()
    tin, din = cfg.T, cfg.D0
    for n, (t, d) in enumerate(zip(lengths, dims), start=1):
        rows.append((f"s{n}.merge", (tin, din), (t, d)))
        for j in range(1, cfg.B + 1):
            p = f"s{n}.b{j}"
            if cfg.stage_type != "convtransformer":
                kind = "transformer" if cfg.stage_type == "pure_transformer" else "conv"
                rows.append((f"{p}.{kind}", (t, d), (t, d)))
                continue
            if cfg.use_global:
                rows.append((f"{p}.global", (t, d), (t, d)))
            if cfg.use_local:
                wide = cfg.theta * d if cfg.local_linear else d
                if cfg.local_linear:
                    rows.append((f"{p}.local.up", (t, d), (t, wide)))
                if cfg.local_conv:
                    rows.append((f"{p}.local.conv", (t, wide), (t, wide)))
                if cfg.local_linear:
                    rows.append((f"{p}.local.down", (t, wide), (t, d)))
        tin, din = t, d
    return rows
