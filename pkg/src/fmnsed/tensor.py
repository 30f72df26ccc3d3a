"""Dense float32 tensors and the numeric kernels all models are built from.

Every kernel is a pure function: identical inputs give bit-identical
outputs.  Reductions (convolution, matmul, softmax, pooling, norm stats)
accumulate in float64 before casting back to float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, expit

__all__ = [
    "ShapeError",
    "Tensor",
    "ConvSpec",
    "conv2d",
    "linear",
    "softmax",
    "batch_norm_infer",
    "layer_norm",
    "activation",
    "global_avg_pool",
    "ACTIVATION_KINDS",
]


class ShapeError(ValueError):
    """An operand dimension violates the operation's contract."""


def _as_array(x) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float32)


class Tensor:
    """Row-major float32 n-d array with explicit shape metadata.

    All dimensions are >= 1 and the flat data length always equals the
    product of the shape. Scalars are promoted to shape (1,).
    """

    __slots__ = ("_arr",)

    def __init__(self, data, shape=None):
        arr = np.asarray(data, dtype=np.float32)
        if shape is not None:
            if int(np.prod(shape)) != arr.size:
                raise ShapeError(
                    f"cannot view {arr.size} values as shape {tuple(shape)}"
                )
            arr = arr.reshape(tuple(shape))
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if min(arr.shape) < 1:
            raise ShapeError(f"tensor dimensions must all be >= 1, got {tuple(arr.shape)}")
        self._arr = np.ascontiguousarray(arr, dtype=np.float32)

    @classmethod
    def zeros(cls, *shape: int) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.float32))

    @classmethod
    def full(cls, shape, value: float) -> "Tensor":
        return cls(np.full(tuple(shape), value, dtype=np.float32))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self._arr.shape)

    @property
    def ndim(self) -> int:
        return self._arr.ndim

    @property
    def size(self) -> int:
        return int(self._arr.size)

    @property
    def data(self) -> np.ndarray:
        """Underlying contiguous float32 ndarray."""
        return self._arr

    def __array__(self, dtype=None, copy=None):
        return self._arr if dtype is None else self._arr.astype(dtype)

    def reshape(self, *shape: int) -> "Tensor":
        return Tensor(self._arr.reshape(shape))

    def transpose(self, *axes: int) -> "Tensor":
        return Tensor(self._arr.transpose(axes) if axes else self._arr.T)

    def __add__(self, other):
        return Tensor(self._arr + _as_array(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Tensor(self._arr - _as_array(other))

    def __mul__(self, other):
        return Tensor(self._arr * _as_array(other))

    __rmul__ = __mul__

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-d convolution (cross-correlation, no kernel flip)."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    dilation: tuple[int, int] = (1, 1)
    groups: int = 1

    def __post_init__(self):
        if self.groups < 1:
            raise ShapeError(f"groups must be >= 1, got {self.groups}")
        if self.in_channels % self.groups:
            raise ShapeError(
                f"in_channels {self.in_channels} not divisible by groups {self.groups}"
            )
        if self.out_channels % self.groups:
            raise ShapeError(
                f"out_channels {self.out_channels} not divisible by groups {self.groups}"
            )
        for field in ("kernel", "stride", "dilation"):
            if min(getattr(self, field)) < 1:
                raise ShapeError(f"{field} components must be >= 1, got {getattr(self, field)}")
        if min(self.padding) < 0:
            raise ShapeError(f"padding must be >= 0, got {self.padding}")

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        dh, dw = self.dilation
        ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
        wo = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
        return ho, wo


def conv2d(x, w, b=None, spec: ConvSpec | None = None) -> Tensor:
    """2-d grouped convolution of x [B,Cin,H,W] with w [Cout,Cin/g,kh,kw].

    Cross-correlation semantics; float64 accumulation per output element.
    """
    if spec is None:
        raise ShapeError("conv2d requires a ConvSpec")
    xa = _as_array(x)
    wa = _as_array(w)
    if xa.ndim != 4:
        raise ShapeError(f"conv2d: input must be [B,Cin,H,W], got shape {xa.shape}")
    batch, cin, h, w_in = xa.shape
    if cin != spec.in_channels:
        raise ShapeError(
            f"conv2d: input has {cin} channels but spec.in_channels is {spec.in_channels}"
        )
    kh, kw = spec.kernel
    g = spec.groups
    expect = (spec.out_channels, cin // g, kh, kw)
    if wa.shape != expect:
        raise ShapeError(f"conv2d: weight shape {wa.shape} does not match expected {expect}")
    ho, wo = spec.out_size(h, w_in)
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"conv2d: output spatial size {(ho, wo)} is empty for input {(h, w_in)}"
        )
    ph, pw = spec.padding
    sh, sw = spec.stride
    dh, dw = spec.dilation

    xp = np.pad(xa, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cing = cin // g
    coutg = spec.out_channels // g
    xg = xp.reshape(batch, g, cing, xp.shape[2], xp.shape[3])
    w64 = wa.astype(np.float64).reshape(g, coutg, cing, kh, kw)

    acc = np.zeros((batch, g, coutg, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            tap = xg[
                :, :, :,
                i * dh : i * dh + sh * (ho - 1) + 1 : sh,
                j * dw : j * dw + sw * (wo - 1) + 1 : sw,
            ]
            acc += np.einsum(
                "bgihw,goi->bgohw", tap.astype(np.float64), w64[..., i, j], optimize=True
            )
    out = acc.reshape(batch, spec.out_channels, ho, wo)
    if b is not None:
        ba = _as_array(b)
        if ba.shape != (spec.out_channels,):
            raise ShapeError(
                f"conv2d: bias shape {ba.shape} does not match out_channels {spec.out_channels}"
            )
        out = out + ba.astype(np.float64).reshape(1, -1, 1, 1)
    return Tensor(out.astype(np.float32))


def linear(x, w, b=None) -> Tensor:
    """Affine map y = x @ w.T + b applied over the last dim of x."""
    xa = _as_array(x)
    wa = _as_array(w)
    if wa.ndim != 2:
        raise ShapeError(f"linear: weight must be [Dout,Din], got shape {wa.shape}")
    if xa.shape[-1] != wa.shape[1]:
        raise ShapeError(
            f"linear: input feature dim {xa.shape[-1]} does not match weight Din {wa.shape[1]}"
        )
    y = xa.astype(np.float64) @ wa.astype(np.float64).T
    if b is not None:
        ba = _as_array(b)
        if ba.shape != (wa.shape[0],):
            raise ShapeError(f"linear: bias shape {ba.shape} does not match Dout {wa.shape[0]}")
        y = y + ba.astype(np.float64)
    return Tensor(y.astype(np.float32))


def softmax(x, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`; sums to 1 along that axis."""
    xa = _as_array(x)
    if not -xa.ndim <= axis < xa.ndim:
        raise ShapeError(f"softmax: axis {axis} out of bounds for ndim {xa.ndim}")
    x64 = xa.astype(np.float64)
    x64 = x64 - x64.max(axis=axis, keepdims=True)
    e = np.exp(x64)
    return Tensor((e / e.sum(axis=axis, keepdims=True)).astype(np.float32))


def batch_norm_infer(x, gamma, beta, running_mean, running_var, eps: float = 1e-5) -> Tensor:
    """Inference-mode batch norm: (x - mean)/sqrt(var + eps) * gamma + beta.

    Statistics are per channel; the channel axis is axis 1 for inputs with
    ndim >= 2 and axis 0 for vectors.
    """
    xa = _as_array(x)
    axis = 1 if xa.ndim >= 2 else 0
    c = xa.shape[axis]
    stats = []
    for name, v in (("gamma", gamma), ("beta", beta),
                    ("running_mean", running_mean), ("running_var", running_var)):
        va = _as_array(v).reshape(-1)
        if va.shape != (c,):
            raise ShapeError(f"batch_norm: {name} has shape {va.shape}, expected ({c},)")
        stats.append(va.astype(np.float64))
    g, bta, mean, var = stats
    if np.any(var < 0):
        raise ValueError("batch_norm: negative running variance")
    bshape = [1] * xa.ndim
    bshape[axis] = c
    scale = (g / np.sqrt(var + eps)).reshape(bshape)
    shift = (bta - mean * g / np.sqrt(var + eps)).reshape(bshape)
    return Tensor((xa.astype(np.float64) * scale + shift).astype(np.float32))


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Layer norm over the last axis with affine parameters."""
    xa = _as_array(x).astype(np.float64)
    g = _as_array(gamma).astype(np.float64)
    bta = _as_array(beta).astype(np.float64)
    if g.shape != (xa.shape[-1],) or bta.shape != (xa.shape[-1],):
        raise ShapeError(
            f"layer_norm: affine shapes {g.shape}/{bta.shape} do not match feature dim {xa.shape[-1]}"
        )
    mean = xa.mean(axis=-1, keepdims=True)
    var = ((xa - mean) ** 2).mean(axis=-1, keepdims=True)
    y = (xa - mean) / np.sqrt(var + eps) * g + bta
    return Tensor(y.astype(np.float32))


def _softplus(xa: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(xa))) + np.maximum(xa, 0.0)


_ACTIVATIONS = {
    "relu": lambda a: np.maximum(a, 0.0),
    "hardswish": lambda a: a * np.clip(a + 3.0, 0.0, 6.0) / 6.0,
    "sigmoid": lambda a: expit(a),
    "gelu": lambda a: 0.5 * a * (1.0 + erf(a / np.sqrt(2.0))),
    "softplus": _softplus,
    "tanh": lambda a: np.tanh(a),
    # extras used by the model blocks
    "hardsigmoid": lambda a: np.clip(a + 3.0, 0.0, 6.0) / 6.0,
    "silu": lambda a: a * expit(a),
    "identity": lambda a: a,
}

ACTIVATION_KINDS = tuple(_ACTIVATIONS)


def activation(x, kind: str) -> Tensor:
    """Elementwise nonlinearity; hardswish(x) = x * clamp(x+3, 0, 6) / 6."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind {kind!r}") from None
    xa = _as_array(x)
    return Tensor(fn(xa.astype(np.float64)).astype(np.float32))


def global_avg_pool(x) -> Tensor:
    """Mean over the two trailing spatial dims of [B,C,H,W] -> [B,C,1,1]."""
    xa = _as_array(x)
    if xa.ndim != 4:
        raise ShapeError(f"global_avg_pool: input must be [B,C,H,W], got shape {xa.shape}")
    m = xa.astype(np.float64).mean(axis=(2, 3), keepdims=True)
    return Tensor(m.astype(np.float32))
