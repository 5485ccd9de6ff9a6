"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Every learnable quantity in this package is a ``DiffValue``.  Forward
evaluation builds a DAG eagerly; ``backward()`` walks it once in reverse
topological order and accumulates (sums) gradients into each node, so shared
subexpressions are handled correctly.  Subgradient conventions: ``min`` and
``argmin``-style reductions route the gradient to the first attaining index,
``abs`` uses sign (0 at 0), ``relu`` and ``clamp`` pass gradient only where
the input is strictly inside the active region (boundary included for clamp).
"""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    ContractViolationError,
    DataError,
    DegenerateInputError,
    NumericError,
)
from .geometry import PI, TWO_PI

Array = np.ndarray


class DiffValue:
    """A float64 array plus the plumbing to backpropagate through it."""

    __slots__ = ("data", "grad", "_parents", "_bwd", "op")

    def __init__(self, data, parents: tuple = (), bwd=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self._parents = parents
        self._bwd = bwd
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"DiffValue(op={self.op}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return multiply(self, -1.0)

    def __sub__(self, other):
        return add(self, multiply(other, -1.0))

    def __rsub__(self, other):
        return add(multiply(self, -1.0), other)

    def backward(self) -> None:
        """Accumulate gradients of ``self`` (seeded with ones) into the DAG.

        Each node is visited exactly once, in reverse topological order.
        """
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._bwd is not None and node.grad is not None:
                node._bwd(node)


def _toposort(root: DiffValue) -> list[DiffValue]:
    order: list[DiffValue] = []
    seen: set[int] = set()
    stack: list[tuple[DiffValue, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_value(x) -> DiffValue:
    return x if isinstance(x, DiffValue) else DiffValue(x)


def _accumulate(node: DiffValue, g: Array) -> None:
    if node.grad is None:
        node.grad = np.array(np.broadcast_to(g, node.data.shape), dtype=np.float64)
    else:
        node.grad += g


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_op(a, b, data_fn, op: str, grad_a, grad_b) -> DiffValue:
    a, b = as_value(a), as_value(b)
    try:
        data = data_fn(a.data, b.data)
    except ValueError as exc:
        raise ContractViolationError(
            f"{op}: incompatible shapes {a.shape} and {b.shape}"
        ) from exc

    def bwd(out: DiffValue) -> None:
        _accumulate(a, _unbroadcast(grad_a(out.grad, a.data, b.data), a.shape))
        _accumulate(b, _unbroadcast(grad_b(out.grad, a.data, b.data), b.shape))

    return DiffValue(data, (a, b), bwd, op)


def add(a, b) -> DiffValue:
    return _broadcast_op(
        a, b, np.add, "add",
        lambda g, x, y: g,
        lambda g, x, y: g,
    )


def multiply(a, b) -> DiffValue:
    return _broadcast_op(
        a, b, np.multiply, "multiply",
        lambda g, x, y: g * y,
        lambda g, x, y: g * x,
    )


def _unary(x, data: Array, grad_fn, op: str) -> DiffValue:
    x = as_value(x)

    def bwd(out: DiffValue) -> None:
        _accumulate(x, grad_fn(out.grad))

    return DiffValue(data, (x,), bwd, op)


def sin(x) -> DiffValue:
    x = as_value(x)
    return _unary(x, np.sin(x.data), lambda g: g * np.cos(x.data), "sin")


def cos(x) -> DiffValue:
    x = as_value(x)
    return _unary(x, np.cos(x.data), lambda g: -g * np.sin(x.data), "cos")


def tanh(x) -> DiffValue:
    x = as_value(x)
    t = np.tanh(x.data)
    return _unary(x, t, lambda g: g * (1.0 - t * t), "tanh")


def sigmoid(x) -> DiffValue:
    x = as_value(x)
    s = expit(x.data)
    return _unary(x, s, lambda g: g * s * (1.0 - s), "sigmoid")


def logsigmoid(x) -> DiffValue:
    """log(sigmoid(x)), computed without overflow for large |x|."""
    x = as_value(x)
    data = -np.logaddexp(0.0, -x.data)
    return _unary(x, data, lambda g: g * expit(-x.data), "logsigmoid")


def relu(x) -> DiffValue:
    x = as_value(x)
    mask = x.data > 0.0
    return _unary(x, np.where(mask, x.data, 0.0), lambda g: g * mask, "relu")


def absolute(x) -> DiffValue:
    x = as_value(x)
    sign = np.sign(x.data)
    return _unary(x, np.abs(x.data), lambda g: g * sign, "abs")


def clamp(x, lo: float, hi: float) -> DiffValue:
    """Clip to [lo, hi]; gradient passes where lo <= x <= hi."""
    x = as_value(x)
    mask = (x.data >= lo) & (x.data <= hi)
    return _unary(x, np.clip(x.data, lo, hi), lambda g: g * mask, "clamp")


def wrap_to_pi(x) -> DiffValue:
    """Reduce angles to [-pi, pi) mod 2pi.  Gradient is the identity (the
    shift is piecewise constant)."""
    x = as_value(x)
    data = x.data - TWO_PI * np.floor((x.data + PI) / TWO_PI)
    data = np.where(data < -PI, data + TWO_PI, data)
    data = np.where(data >= PI, data - TWO_PI, data)
    return _unary(x, data, lambda g: g, "wrap_to_pi")


def atan2(y, x) -> DiffValue:
    """Two-argument arctangent in [-pi, pi)."""
    y, x = as_value(y), as_value(x)
    denom = x.data * x.data + y.data * y.data
    if np.any(denom == 0.0):
        raise DegenerateInputError(
            f"atan2 of zero vector at flat index "
            f"{int(np.argmax(denom == 0.0))}"
        )
    data = np.arctan2(y.data, x.data)
    data = np.where(data >= PI, data - TWO_PI, data)

    def bwd(out: DiffValue) -> None:
        _accumulate(y, _unbroadcast(out.grad * x.data / denom, y.shape))
        _accumulate(x, _unbroadcast(-out.grad * y.data / denom, x.shape))

    return DiffValue(data, (y, x), bwd, "atan2")


def softmax(x, axis: int) -> DiffValue:
    x = as_value(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(out: DiffValue) -> None:
        inner = np.sum(out.grad * s, axis=axis, keepdims=True)
        _accumulate(x, s * (out.grad - inner))

    return DiffValue(s, (x,), bwd, "softmax")


def min_reduce(x, axis: int = 0) -> DiffValue:
    """Minimum along an axis.  Ties route the gradient to the first
    attaining index."""
    x = as_value(x)
    data = np.min(x.data, axis=axis)
    idx = np.expand_dims(np.argmin(x.data, axis=axis), axis)

    def bwd(out: DiffValue) -> None:
        g = np.zeros_like(x.data)
        np.put_along_axis(g, idx, np.expand_dims(out.grad, axis), axis)
        _accumulate(x, g)

    return DiffValue(data, (x,), bwd, "min_reduce")


def sum_reduce(x, axis: int = -1) -> DiffValue:
    x = as_value(x)
    data = np.sum(x.data, axis=axis)

    def bwd(out: DiffValue) -> None:
        _accumulate(x, np.broadcast_to(np.expand_dims(out.grad, axis), x.shape))

    return DiffValue(data, (x,), bwd, "sum")


def mean(x, axis: int = 0) -> DiffValue:
    x = as_value(x)
    n = x.shape[axis]
    data = np.mean(x.data, axis=axis)

    def bwd(out: DiffValue) -> None:
        _accumulate(
            x, np.broadcast_to(np.expand_dims(out.grad / n, axis), x.shape)
        )

    return DiffValue(data, (x,), bwd, "mean")


def concat(values: Sequence, axis: int = -1) -> DiffValue:
    vals = [as_value(v) for v in values]
    data = np.concatenate([v.data for v in vals], axis=axis)
    sizes = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def bwd(out: DiffValue) -> None:
        for v, piece in zip(vals, np.split(out.grad, sizes, axis=axis)):
            _accumulate(v, piece)

    return DiffValue(data, tuple(vals), bwd, "concat")


def stack(values: Sequence, axis: int = 0) -> DiffValue:
    vals = [as_value(v) for v in values]
    data = np.stack([v.data for v in vals], axis=axis)

    def bwd(out: DiffValue) -> None:
        for i, v in enumerate(vals):
            _accumulate(v, np.take(out.grad, i, axis=axis))

    return DiffValue(data, tuple(vals), bwd, "stack")


def reshape(x, shape: tuple) -> DiffValue:
    x = as_value(x)
    old = x.shape
    return _unary(x, x.data.reshape(shape), lambda g: g.reshape(old), "reshape")


def matmul(a, b) -> DiffValue:
    a, b = as_value(a), as_value(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ContractViolationError(
            f"matmul expects 2-D operands, got {a.shape} @ {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ContractViolationError(
            f"matmul: inner dimensions differ, {a.shape} @ {b.shape}"
        )
    data = a.data @ b.data

    def bwd(out: DiffValue) -> None:
        _accumulate(a, out.grad @ b.data.T)
        _accumulate(b, a.data.T @ out.grad)

    return DiffValue(data, (a, b), bwd, "matmul")


def take(param, indices) -> DiffValue:
    """Row lookup ``param[indices]``; the backward pass scatter-adds."""
    param = as_value(param)
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= param.shape[0]):
        raise ContractViolationError(
            f"take: index outside [0, {param.shape[0]})"
        )
    data = param.data[idx]

    def bwd(out: DiffValue) -> None:
        g = np.zeros_like(param.data)
        np.add.at(g, idx, out.grad)
        _accumulate(param, g)

    return DiffValue(data, (param,), bwd, "take")


def take_along_last(x, indices) -> DiffValue:
    """Gather along the last axis; duplicate indices accumulate on backward."""
    x = as_value(x)
    idx = np.asarray(indices)
    data = np.take_along_axis(x.data, idx, axis=-1)
    lead = int(np.prod(x.shape[:-1], dtype=np.int64))
    rows = np.arange(lead)[:, None]

    def bwd(out: DiffValue) -> None:
        g = np.zeros_like(x.data).reshape(lead, x.shape[-1])
        np.add.at(g, (rows, idx.reshape(lead, -1)), out.grad.reshape(lead, -1))
        _accumulate(x, g.reshape(x.shape))

    return DiffValue(data, (x,), bwd, "take_along_last")


# ---------------------------------------------------------------------------
# Parameter store, optimizer, gradient check, checkpointing
# ---------------------------------------------------------------------------


class ParamStore:
    """Named parameter groups, each a leaf DiffValue."""

    def __init__(self):
        self._params: dict[str, DiffValue] = {}

    def register(self, name: str, data: Array) -> DiffValue:
        if name in self._params:
            raise ContractViolationError(f"parameter '{name}' already registered")
        value = DiffValue(np.array(data, dtype=np.float64), op=f"param:{name}")
        self._params[name] = value
        return value

    def __getitem__(self, name: str) -> DiffValue:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def copy_data(self) -> dict[str, Array]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_data(self, data: dict[str, Array]) -> None:
        for name, arr in data.items():
            if name not in self._params:
                raise DataError(f"unknown parameter group '{name}' in checkpoint")
            if self._params[name].data.shape != arr.shape:
                raise DataError(
                    f"shape mismatch for '{name}': store "
                    f"{self._params[name].data.shape}, file {arr.shape}"
                )
            self._params[name].data = arr.astype(np.float64).copy()


class OptimizerState:
    """Adaptive-moment optimizer state: per-parameter first/second moments."""

    def __init__(self, store: ParamStore, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in store.items()}


def adam_step(store: ParamStore, state: OptimizerState) -> None:
    """One adaptive-moment update; clears all gradients afterward."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for name, p in store.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if np.any(np.isnan(g)):
            raise NumericError(f"NaN gradient in parameter group '{name}'")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    store.zero_grad()


def _rel_err(g_ad: float, g_fd: float) -> float:
    return abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))


def grad_check(
    f: Callable[[], DiffValue],
    store: ParamStore,
    eps: float = 1e-5,
    samples_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    param_names: Iterable[str] | None = None,
    subgradient_aware: bool = False,
    noise_tolerance: float | None = None,
) -> float:
    """Compare reverse-mode gradients of the scalar ``f()`` against central
    finite differences.

    Returns the max over sampled coordinates of
    ``|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)``.

    With ``subgradient_aware``, a coordinate whose +-eps interval straddles
    a subgradient kink (a min/clamp tie) may instead match the one-sided
    difference of its active branch: the per-coordinate error becomes the
    minimum of the central, forward, and backward comparisons.  A wrong
    gradient still fails all three references.

    ``noise_tolerance`` guards the finite-difference noise floor: central
    differences carry an absolute error of a few ulps of ``f`` divided by
    2*eps, so coordinates whose gradient magnitude is too small to be
    measured to the given relative tolerance are checked absolutely against
    that floor (a wrong gradient masquerading as tiny makes the difference
    quotient large and is still caught) and excluded from the relative max.
    """
    if eps <= 0:
        raise ContractViolationError("eps must be positive")
    store.zero_grad()
    out = f()
    if out.size != 1:
        raise ContractViolationError("grad_check needs a scalar-valued function")
    if not np.isfinite(out.data).all():
        raise NumericError("non-finite forward value in grad_check")
    f_zero = float(out.data)
    out.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in store.items()
    }
    store.zero_grad()

    names = list(param_names) if param_names is not None else store.names()
    # A handful of ulps per forward evaluation, divided across 2*eps.
    noise_floor = 8.0 * np.finfo(np.float64).eps * max(1.0, abs(f_zero)) / (2.0 * eps)
    max_err = 0.0
    for name in names:
        p = store[name]
        n = p.data.size
        if samples_per_param is None or n <= samples_per_param:
            coords = np.arange(n)
        else:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=samples_per_param, replace=False)
        for c in coords:
            orig = p.data.flat[c]
            p.data.flat[c] = orig + eps
            f_plus = float(f().data)
            p.data.flat[c] = orig - eps
            f_minus = float(f().data)
            p.data.flat[c] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(
                    f"non-finite forward value while perturbing '{name}'"
                )
            g_ad = analytic[name].flat[c]
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            err = _rel_err(g_ad, g_fd)
            if subgradient_aware:
                err = min(
                    err,
                    _rel_err(g_ad, (f_plus - f_zero) / eps),
                    _rel_err(g_ad, (f_zero - f_minus) / eps),
                )
            if noise_tolerance is not None and err > noise_tolerance:
                scale = abs(g_ad) + abs(g_fd)
                if scale < noise_floor / (0.5 * noise_tolerance) and \
                        abs(g_ad - g_fd) <= 10.0 * noise_floor:
                    continue  # below the measurable floor, and consistent
            max_err = max(max_err, err)
    return max_err


CHECKPOINT_VERSION = 1
_PARAM_PREFIX = "param:"


def save_checkpoint(path, store: ParamStore, config: dict) -> None:
    """Write parameters plus config to a versioned npz container.

    Round-trips are bit-exact: arrays are stored as raw float64.
    """
    meta = json.dumps(
        {"format_version": CHECKPOINT_VERSION, "config": config},
        sort_keys=True,
    )
    arrays = {_PARAM_PREFIX + name: p.data for name, p in store.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(meta), **arrays)


def load_checkpoint(path) -> tuple[dict[str, Array], dict]:
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        if "__meta__" not in archive:
            raise DataError(f"{path} is not a rocone checkpoint (no metadata)")
        meta = json.loads(str(archive["__meta__"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise DataError(
                f"unsupported checkpoint version {meta.get('format_version')!r}"
            )
        params = {
            key[len(_PARAM_PREFIX):]: archive[key].copy()
            for key in archive.files
            if key.startswith(_PARAM_PREFIX)
        }
    return params, meta["config"]
