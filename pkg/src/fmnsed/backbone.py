"""Frame-wise MobileNet backbone.

A width-scalable MobileNetV3-Large variant whose strides are rearranged so
frequency is fully pooled away while the time axis is only reduced 4x: a
[1, 128, 1000] log-mel input becomes [embed_channels, 250] frame
embeddings, one embedding per 40 ms.

Stride plan (freq, time), fixed for reproducibility:
  stem (2,2); the first canonical downsampling bottleneck keeps (2,2); the
  other three become (2,1); the first block of each of the two stages that
  originally did not downsample is promoted from (1,1) to (2,1). Frequency
  stride product = 128, time stride product = 4.

Batch-norm statistics are stored folded: each norm contributes one
per-channel `scale` and `shift` pair, so the weight inventory is exactly
the trainable-parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ConvSpec, ShapeError, Tensor, activation, conv2d, global_avg_pool
from .weights import WeightStore

__all__ = [
    "BlockSpec",
    "FmnConfig",
    "make_divisible",
    "build_fmn",
    "forward_fmn",
    "param_inventory",
    "block_layout",
    "STEM_STRIDE",
]

STEM_STRIDE = (2, 2)
STEM_KERNEL = 3
_SE_REDUCTION = 4

# kernel, expansion, out, use_se, activation, (freq, time) stride
_LARGE_TABLE = (
    (3, 16, 16, False, "relu", (2, 1)),
    (3, 64, 24, False, "relu", (2, 2)),
    (3, 72, 24, False, "relu", (1, 1)),
    (5, 72, 40, True, "relu", (2, 1)),
    (5, 120, 40, True, "relu", (1, 1)),
    (5, 120, 40, True, "relu", (1, 1)),
    (3, 240, 80, False, "hardswish", (2, 1)),
    (3, 200, 80, False, "hardswish", (1, 1)),
    (3, 184, 80, False, "hardswish", (1, 1)),
    (3, 184, 80, False, "hardswish", (1, 1)),
    (3, 480, 112, True, "hardswish", (2, 1)),
    (3, 672, 112, True, "hardswish", (1, 1)),
    (5, 672, 160, True, "hardswish", (2, 1)),
    (5, 960, 160, True, "hardswish", (1, 1)),
    (5, 960, 160, True, "hardswish", (1, 1)),
)
_BASE_STEM = 16
_BASE_EMBED = 960


def make_divisible(v: float, divisor: int = 8) -> int:
    """Round to the nearest multiple of divisor, never dropping below 0.9*v."""
    if v <= 0:
        raise ValueError(f"make_divisible needs v > 0, got {v}")
    new_v = max(divisor, int(v + divisor / 2) // divisor * divisor)
    if new_v < 0.9 * v:
        new_v += divisor
    return new_v


@dataclass(frozen=True)
class BlockSpec:
    """One inverted-residual bottleneck."""

    kernel: int
    expansion_channels: int
    out_channels: int
    use_se: bool
    activation: str
    stride: tuple[int, int]  # (freq, time)

    def __post_init__(self):
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError(f"kernel must be odd and >= 1, got {self.kernel}")
        if any(s not in (1, 2) for s in self.stride):
            raise ValueError(f"stride components must be 1 or 2, got {self.stride}")
        if self.activation not in ("relu", "hardswish"):
            raise ValueError(f"unsupported block activation {self.activation!r}")


@dataclass(frozen=True)
class FmnConfig:
    """Backbone architecture: width multiplier applied to the block table."""

    alpha: float
    stem_channels: int
    blocks: tuple[BlockSpec, ...]
    embed_channels: int

    def __post_init__(self):
        freq = STEM_STRIDE[0]
        time = STEM_STRIDE[1]
        for b in self.blocks:
            freq *= b.stride[0]
            time *= b.stride[1]
        if freq != 128:
            raise ValueError(f"frequency stride product must be 128, got {freq}")
        if time != 4:
            raise ValueError(f"time stride product must be 4, got {time}")
        for c in self.channel_counts():
            if c % 8:
                raise ValueError(f"channel count {c} is not a multiple of 8")

    def channel_counts(self) -> list[int]:
        counts = [self.stem_channels]
        for b in self.blocks:
            counts += [b.expansion_channels, b.out_channels]
        counts.append(self.embed_channels)
        return counts


def build_fmn(alpha: float) -> FmnConfig:
    """Scale every channel count of the block table by alpha (rounded to 8s)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    blocks = tuple(
        BlockSpec(
            kernel=k,
            expansion_channels=make_divisible(exp * alpha),
            out_channels=make_divisible(out * alpha),
            use_se=se,
            activation=act,
            stride=stride,
        )
        for k, exp, out, se, act, stride in _LARGE_TABLE
    )
    return FmnConfig(
        alpha=alpha,
        stem_channels=make_divisible(_BASE_STEM * alpha),
        blocks=blocks,
        embed_channels=make_divisible(_BASE_EMBED * alpha),
    )


def _se_channels(expansion: int) -> int:
    return make_divisible(expansion / _SE_REDUCTION)


def block_layout(cfg: FmnConfig):
    """Yield (index, block, in_channels, has_expand, se_channels)."""
    cin = cfg.stem_channels
    for i, b in enumerate(cfg.blocks):
        has_expand = b.expansion_channels != cin
        se = _se_channels(b.expansion_channels) if b.use_se else 0
        yield i, b, cin, has_expand, se
        cin = b.out_channels


def param_inventory(cfg: FmnConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map of every backbone parameter."""
    inv: dict[str, tuple[int, ...]] = {}
    inv["stem.conv.w"] = (cfg.stem_channels, 1, STEM_KERNEL, STEM_KERNEL)
    inv["stem.bn.scale"] = (cfg.stem_channels,)
    inv["stem.bn.shift"] = (cfg.stem_channels,)
    for i, b, cin, has_expand, se in block_layout(cfg):
        p = f"block{i}."
        exp = b.expansion_channels
        if has_expand:
            inv[p + "expand.w"] = (exp, cin, 1, 1)
            inv[p + "expand.bn.scale"] = (exp,)
            inv[p + "expand.bn.shift"] = (exp,)
        inv[p + "dw.w"] = (exp, 1, b.kernel, b.kernel)
        inv[p + "dw.bn.scale"] = (exp,)
        inv[p + "dw.bn.shift"] = (exp,)
        if b.use_se:
            inv[p + "se.fc1.w"] = (se, exp, 1, 1)
            inv[p + "se.fc1.b"] = (se,)
            inv[p + "se.fc2.w"] = (exp, se, 1, 1)
            inv[p + "se.fc2.b"] = (exp,)
        inv[p + "project.w"] = (b.out_channels, exp, 1, 1)
        inv[p + "project.bn.scale"] = (b.out_channels,)
        inv[p + "project.bn.shift"] = (b.out_channels,)
    last = cfg.blocks[-1].out_channels
    inv["final.conv.w"] = (cfg.embed_channels, last, 1, 1)
    inv["final.bn.scale"] = (cfg.embed_channels,)
    inv["final.bn.shift"] = (cfg.embed_channels,)
    return inv


def _affine(x: np.ndarray, store: WeightStore, prefix: str) -> np.ndarray:
    c = x.shape[1]
    scale = store.arr(prefix + ".scale", (c,))
    shift = store.arr(prefix + ".shift", (c,))
    return x * scale.reshape(1, -1, 1, 1) + shift.reshape(1, -1, 1, 1)


def _conv(x, store, name, spec, bias_name=None):
    w = store.get(name, (spec.out_channels, spec.in_channels // spec.groups, *spec.kernel))
    b = store.get(bias_name, (spec.out_channels,)) if bias_name else None
    return conv2d(x, w, b, spec).data


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    return activation(x, kind).data


def forward_fmn(cfg: FmnConfig, weights: WeightStore, mel, trace: dict | None = None) -> Tensor:
    """Run the backbone on a [1, 128, 1000] log-mel; returns [embed, 250].

    Raises WeightError naming the first missing or mis-shaped parameter.
    """
    x = np.asarray(mel, dtype=np.float32)
    if x.shape != (1, 128, 1000):
        raise ShapeError(f"backbone input must be [1,128,1000], got {x.shape}")
    x = x[None]  # [B=1, C=1, F, T]

    x = _conv(x, weights, "stem.conv.w",
              ConvSpec(1, cfg.stem_channels, (3, 3), STEM_STRIDE, (1, 1)))
    x = _act(_affine(x, weights, "stem.bn"), "hardswish")
    if trace is not None:
        trace["stem"] = x[0]

    for i, b, cin, has_expand, se in block_layout(cfg):
        p = f"block{i}."
        exp = b.expansion_channels
        h = x
        if has_expand:
            h = _conv(h, weights, p + "expand.w", ConvSpec(cin, exp))
            h = _act(_affine(h, weights, p + "expand.bn"), b.activation)
        pad = b.kernel // 2
        h = _conv(h, weights, p + "dw.w",
                  ConvSpec(exp, exp, (b.kernel, b.kernel), b.stride, (pad, pad), groups=exp))
        h = _act(_affine(h, weights, p + "dw.bn"), b.activation)
        if b.use_se:
            s = global_avg_pool(h).data
            s = _conv(s, weights, p + "se.fc1.w", ConvSpec(exp, se), p + "se.fc1.b")
            s = _act(s, "relu")
            s = _conv(s, weights, p + "se.fc2.w", ConvSpec(se, exp), p + "se.fc2.b")
            s = _act(s, "hardsigmoid")
            h = h * s
        h = _conv(h, weights, p + "project.w", ConvSpec(exp, b.out_channels))
        h = _affine(h, weights, p + "project.bn")
        if b.stride == (1, 1) and cin == b.out_channels:
            h = h + x
        x = h
        if trace is not None:
            trace[f"block{i}"] = x[0]

    x = _conv(x, weights, "final.conv.w",
              ConvSpec(cfg.blocks[-1].out_channels, cfg.embed_channels))
    x = _act(_affine(x, weights, "final.bn"), "hardswish")

    if x.shape[2] != 1:
        raise ShapeError(f"backbone frequency axis not fully reduced: {x.shape}")
    out = x[0, :, 0, :]
    if trace is not None:
        trace["backbone"] = out
    return Tensor(out)
