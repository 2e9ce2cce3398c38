"""Dense float64 tensors with reverse-mode autodiff, plus the Adam optimizer.

Only the operations the network needs are provided. Broadcasting is limited
to what numpy does for elementwise ops; gradients are summed back to the
input shape (the bias-over-rows case is the one the model relies on).
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """An operation was configured inconsistently."""


class ContractError(RuntimeError):
    """A precondition of an operation was violated."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """An n-d float64 array that records how it was computed.

    ``op`` and ``parents`` form the autograd record; ``_backward`` maps the
    output gradient to parent gradient contributions.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op: str | None = None
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}{tag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def backward(self, grad: np.ndarray | None = None) -> None:
        backward(self, grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True, name=name)


def _make(data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out.parents = parents
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data,
        "add",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.data - b.data,
        "sub",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data,
        "mul",
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def square(x: Tensor) -> Tensor:
    return _make(x.data * x.data, "square", (x,), lambda g: (2.0 * x.data * g,))


def power(x: Tensor, p: float) -> Tensor:
    return _make(x.data**p, "power", (x,), lambda g: (p * x.data ** (p - 1) * g,))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _make(y, "exp", (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    return _make(np.log(x.data), "log", (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return _make(y, "sqrt", (x,), lambda g: (0.5 * g / y,))


def sigmoid(x: Tensor) -> Tensor:
    y = np.empty_like(x.data)
    pos = x.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    y[~pos] = ez / (1.0 + ez)
    return _make(y, "sigmoid", (x,), lambda g: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    m = x.data > 0
    return _make(x.data * m, "relu", (x,), lambda g: (g * m,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation (smooth everywhere, which gradient checks need)."""
    v = x.data
    v2 = v * v
    t = np.tanh(_GELU_C * v * (1.0 + 0.044715 * v2))
    y = 0.5 * v * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * v2)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner),)

    return _make(y, "gelu", (x,), bw)


def identity(x: Tensor) -> Tensor:
    return x


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "gelu": gelu,
    "relu": relu,
    "identity": identity,
}


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values; gradient passes only where the input was inside [lo, hi]."""
    y = np.clip(x.data, lo, hi)
    inside = (x.data >= lo) & (x.data <= hi)
    return _make(y, "clamp", (x,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    y = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(np.asarray(y), "sum", (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _make(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(x.data.transpose(axes), "transpose", (x,), lambda g: (g.transpose(inv),))


def getitem(x: Tensor, idx) -> Tensor:
    def bw(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], "getitem", (x,), bw)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    sizes = [t.shape[axis] for t in xs]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(xs))
        )

    try:
        data = np.concatenate([t.data for t in xs], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in xs]}") from None
    return _make(data, "concat", tuple(xs), bw)


def repeat_rows(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour upsampling along axis 0: [a, b] -> [a, a, b, b] for factor 2."""
    if factor == 1:
        return x
    y = np.repeat(x.data, factor, axis=0)

    def bw(g):
        return (g.reshape(x.shape[0], factor, *x.shape[1:]).sum(axis=1),)

    return _make(y, "repeat_rows", (x,), bw)


def avg_pool_rows(x: Tensor, size: int) -> Tensor:
    """Non-overlapping mean pooling along axis 0 (length must divide)."""
    if size == 1:
        return x
    n = x.shape[0]
    if n % size:
        raise ShapeError(f"avg_pool_rows: length {n} not divisible by {size}")
    y = x.data.reshape(n // size, size, *x.shape[1:]).mean(axis=1)

    def bw(g):
        return (np.repeat(g / size, size, axis=0),)

    return _make(y, "avg_pool_rows", (x,), bw)


# ---------------------------------------------------------------------------
# linear algebra and layers
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    y = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make(y, "matmul", (a, b), bw)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with ``x`` (T, Din), ``w`` (Din, Dout), ``b`` (Dout,)."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias {b.shape} incompatible with weight {w.shape}")
    y = x.data @ w.data
    if b is not None:
        y = y + b.data

    def bw(g):
        gx = g @ w.data.T
        gw = x.data.T @ g
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return _make(y, "linear", parents, bw)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, with max subtraction."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _make(y, "softmax", (x,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each row to zero mean / unit variance, then scale and shift."""
    v = x.data
    mu = v.mean(axis=-1, keepdims=True)
    xc = v - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gain.data + bias.data
    d = v.shape[-1]

    def bw(g):
        gxhat = g * gain.data
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, (g * xhat).reshape(-1, d).sum(axis=0), g.reshape(-1, d).sum(axis=0)

    return _make(y, "layer_norm", (x, gain, bias), bw)


def conv_output_length(length: int, k: int, stride: int, pad: int) -> int:
    return (length + 2 * pad - k) // stride + 1


def conv1d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    pad: int = 0,
    depthwise: bool = False,
) -> Tensor:
    """Temporal cross-correlation (no kernel flip) over rows of ``x``.

    Full conv: ``w`` is (k, Cin, Cout). Depthwise: ``w`` is (k, C) and each
    channel is filtered on its own.
    """
    if x.ndim != 2:
        raise ShapeError(f"conv1d: expected (T, C) input, got {x.shape}")
    length, cin = x.shape
    k = w.shape[0]
    if depthwise:
        if w.ndim != 2:
            raise ConfigError(f"conv1d: depthwise weight must be (k, C), got {w.shape}")
        if w.shape[1] != cin:
            raise ConfigError(f"conv1d: depthwise needs Cin == Cout, got {cin} vs {w.shape[1]}")
        cout = cin
    else:
        if w.ndim != 3 or w.shape[1] != cin:
            raise ShapeError(f"conv1d: input {x.shape} incompatible with weight {w.shape}")
        cout = w.shape[2]
    if k > length + 2 * pad:
        raise ShapeError(f"conv1d: kernel {k} longer than padded input {length + 2 * pad}")
    if b is not None and b.shape != (cout,):
        raise ShapeError(f"conv1d: bias {b.shape} does not match {cout} output channels")
    out_len = conv_output_length(length, k, stride, pad)

    xp = np.pad(x.data, ((pad, pad), (0, 0))) if pad else x.data
    # windows[t, j, c] = xp[t*stride + j, c]
    idx = np.arange(out_len)[:, None] * stride + np.arange(k)[None, :]
    windows = xp[idx]
    if depthwise:
        y = np.einsum("tjc,jc->tc", windows, w.data)
    else:
        y = np.tensordot(windows, w.data, axes=([1, 2], [0, 1]))
    if b is not None:
        y = y + b.data

    def bw(g):
        if depthwise:
            gwin = g[:, None, :] * w.data[None, :, :]
            gw = np.einsum("tjc,tc->jc", windows, g)
        else:
            gwin = np.tensordot(g, w.data, axes=([1], [2]))
            gw = np.tensordot(windows, g, axes=([0], [0]))
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[j : j + stride * (out_len - 1) + 1 : stride] += gwin[:, j, :]
        gx = gxp[pad : pad + length] if pad else gxp
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return _make(y, "conv1d", parents, bw)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Intermediate gradients are discarded; leaves keep accumulating across
    calls until zeroed.
    """
    if grad is None:
        if loss.size != 1:
            raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.asarray(grad, dtype=DTYPE)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------------------
# finite-difference gradient check
# ---------------------------------------------------------------------------


class ProbeError(RuntimeError):
    """The probed function returned a non-finite value."""


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    step: float = 1e-5,
    samples_per_param: int | None = 8,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central differences.

    ``f`` recomputes the scalar loss from the current parameter values.
    Error per coordinate is ``|analytic - numeric| / max(1, |analytic|)``.
    ``samples_per_param=None`` probes every coordinate.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.data).all():
        raise ProbeError("grad_check: loss is not finite at the probe point")
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            if samples_per_param is None or samples_per_param >= flat.size:
                coords = np.arange(flat.size)
            else:
                coords = rng.choice(flat.size, size=samples_per_param, replace=False)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + step
                fp = f().item()
                flat[i] = orig - step
                fm = f().item()
                flat[i] = orig
                if not (math.isfinite(fp) and math.isfinite(fm)):
                    raise ProbeError(f"grad_check: non-finite loss probing {p.name or p.shape}[{i}]")
                num = (fp - fm) / (2 * step)
                a = ga.reshape(-1)[i]
                worst = max(worst, abs(a - num) / max(1.0, abs(a)))
    return worst


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Tensor], state: AdamState, allow_missing: bool = False) -> AdamState:
    """One bias-corrected Adam update in place; zeroes grads afterwards.

    Moment buffers are keyed by position in ``params``, so the parameter
    list must keep a stable order across steps.
    """
    if not allow_missing and any(p.grad is None for p in params):
        missing = [p.name or str(p.shape) for p in params if p.grad is None]
        raise ContractError(f"adam_step: no gradient for {missing[:5]}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i, p in enumerate(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.get(i)
        if m is None:
            m = state.m[i] = np.zeros_like(p.data)
            state.v[i] = np.zeros_like(p.data)
        v = state.v[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None
    return state
