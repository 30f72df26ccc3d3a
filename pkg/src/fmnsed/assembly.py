"""Full model assembly: backbone + projection + sequence model + head.

The frame pipeline is
    mel [1,128,1000] -> backbone -> [250, E] -> W_d (+b_d) -> sequence
    model -> W_h (+b_h) -> logits [250, C]
with the projection and sequence model skipped entirely for kind NONE.
Model names follow the grammar `fmn{alpha*10:02d}[+KIND:hidden]`, e.g.
`fmn10+TF:256`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import backbone as bb
from . import seqmodels as sm
from .tensor import Tensor, linear
from .weights import WeightStore

FRAME_SECONDS = 0.04
NUM_FRAMES = 250
HEAD_BIAS_INIT = -5.0

__all__ = [
    "ModelSpec",
    "parse_model_name",
    "format_model_name",
    "forward_full",
    "predict_probs",
    "select_eval_classes",
    "param_inventory",
    "init_weights",
    "frame_to_seconds",
    "seconds_to_frame",
    "FRAME_SECONDS",
    "NUM_FRAMES",
]


@dataclass(frozen=True)
class ModelSpec:
    fmn: bb.FmnConfig
    seq: sm.SeqConfig
    num_classes: int = 447

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.seq.kind != "NONE" and self.seq.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 when a sequence model is used")

    @property
    def head_in_dim(self) -> int:
        return self.seq.hidden_dim if self.seq.kind != "NONE" else self.fmn.embed_channels


_NAME_RE = re.compile(r"^fmn(\d{2})(?:\+([A-Z]+):(\d+))?$")


def parse_model_name(name: str, num_classes: int = 447) -> ModelSpec:
    """Parse `fmn10`, `fmn04+HYBRID:128`, ... into a ModelSpec."""
    m = _NAME_RE.match(name.strip())
    if not m:
        raise ValueError(
            f"cannot parse model name {name!r}; expected fmn{{NN}}[+KIND:hidden]"
        )
    alpha = int(m.group(1)) / 10.0
    if alpha <= 0:
        raise ValueError(f"model name {name!r} has zero width")
    if m.group(2) is None:
        seq = sm.SeqConfig(kind="NONE", hidden_dim=0)
    else:
        kind = m.group(2)
        if kind not in sm.SEQ_KINDS or kind == "NONE":
            raise ValueError(f"unknown sequence model kind {kind!r} in {name!r}")
        seq = sm.SeqConfig(kind=kind, hidden_dim=int(m.group(3)))
    return ModelSpec(fmn=bb.build_fmn(alpha), seq=seq, num_classes=num_classes)


def format_model_name(spec: ModelSpec) -> str:
    base = f"fmn{int(round(spec.fmn.alpha * 10)):02d}"
    if spec.seq.kind == "NONE":
        return base
    return f"{base}+{spec.seq.kind}:{spec.seq.hidden_dim}"


def param_inventory(spec: ModelSpec) -> dict[str, tuple[int, ...]]:
    """Every parameter the WeightStore for this spec must contain, in order."""
    inv = dict(bb.param_inventory(spec.fmn))
    if spec.seq.kind != "NONE":
        inv["head.down.w"] = (spec.seq.hidden_dim, spec.fmn.embed_channels)
        inv["head.down.b"] = (spec.seq.hidden_dim,)
        inv.update(sm.param_inventory(spec.seq))
    inv["head.out.w"] = (spec.num_classes, spec.head_in_dim)
    inv["head.out.b"] = (spec.num_classes,)
    return inv


def check_weights(spec: ModelSpec, weights: WeightStore) -> None:
    """Raise WeightError naming the first missing or mis-shaped parameter."""
    for name, shape in param_inventory(spec).items():
        weights.get(name, shape)


def forward_full(spec: ModelSpec, weights: WeightStore, mel,
                 trace: dict | None = None) -> Tensor:
    """Frame logits [250, num_classes] for one 10-s clip."""
    z = bb.forward_fmn(spec.fmn, weights, mel, trace=trace)
    frames = Tensor(z.data.T)  # [250, E]
    if trace is not None:
        trace["frames"] = frames.data
    h = frames
    if spec.seq.kind != "NONE":
        h = linear(frames, weights.get("head.down.w",
                                       (spec.seq.hidden_dim, spec.fmn.embed_channels)),
                   weights.get("head.down.b", (spec.seq.hidden_dim,)))
        if trace is not None:
            trace["down"] = h.data
        h = sm.run_sequence_model(spec.seq, weights, h, trace=trace)
    logits = linear(h, weights.get("head.out.w", (spec.num_classes, spec.head_in_dim)),
                    weights.get("head.out.b", (spec.num_classes,)))
    if trace is not None:
        trace["logits"] = logits.data
    return logits


def predict_probs(spec: ModelSpec, weights: WeightStore, mel,
                  trace: dict | None = None) -> Tensor:
    """Sigmoid of forward_full: frame-wise event probabilities."""
    logits = forward_full(spec, weights, mel, trace=trace)
    probs = Tensor(expit(logits.data.astype(np.float64)).astype(np.float32))
    if trace is not None:
        trace["probs"] = probs.data
    return probs


def select_eval_classes(probs, eval_indices) -> Tensor:
    """Column-select the evaluated class subset, order preserved."""
    pa = np.asarray(probs, dtype=np.float32)
    idx = list(eval_indices)
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("eval class indices must be strictly increasing")
    if idx and (idx[0] < 0 or idx[-1] >= pa.shape[1]):
        raise IndexError(
            f"eval class index out of range for {pa.shape[1]} classes: {idx[0]}..{idx[-1]}"
        )
    return Tensor(pa[:, idx])


def frame_to_seconds(i: int) -> float:
    return i * FRAME_SECONDS


def seconds_to_frame(s: float) -> int:
    return int(round(s / FRAME_SECONDS))


def init_weights(spec: ModelSpec, seed: int = 0) -> WeightStore:
    """Deterministic random weights matching the spec's inventory.

    Norm scales start at 1, shifts/biases at 0, the classification bias at
    -5 so a fresh model predicts near-silence, and the state-space decay
    and step parameters start in their conventional ranges.
    """
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name, shape in param_inventory(spec).items():
        leaf = name.rsplit(".", 1)[-1]
        if name.endswith((".bn.scale", ".gamma")):
            v = np.ones(shape, dtype=np.float32)
        elif name.endswith(".a_log"):
            v = np.log(np.arange(1, shape[0] + 1, dtype=np.float32))
        elif name.endswith(".dt_bias"):
            dt = rng.uniform(1e-3, 0.1, size=shape)
            v = (dt + np.log(-np.expm1(-dt))).astype(np.float32)  # softplus inverse
        elif name.endswith(".d_skip"):
            v = np.ones(shape, dtype=np.float32)
        elif name == "head.out.b":
            v = np.full(shape, HEAD_BIAS_INIT, dtype=np.float32)
        elif leaf == "b" or leaf.startswith("b_") or name.endswith((".bn.shift", ".beta")):
            v = np.zeros(shape, dtype=np.float32)
        else:
            v = rng.normal(0.0, 0.05, size=shape).astype(np.float32)
        store.add(name, Tensor(v))
    return store
