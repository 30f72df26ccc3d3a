"""Sequence models applied to the 250-frame backbone embeddings.

Six interchangeable kinds, each mapping [T, D] -> [T, D] and stacked as
two blocks by default:

  TF      pre-norm transformer block (rotary attention + 4x gelu FFN)
  ATT     rotary multi-head self-attention with residual (no FFN)
  BIGRU   bidirectional gated recurrent units, D/2 per direction
  TCN     five dilated conv layers (dilation 2^n) with a block residual
  MAMBA   selective state-space block, scalar per-head decay, state dim 64,
          evaluated in a chunked parallel form
  HYBRID  parallel self-attention and bidirectional minGRU branches,
          averaged and linearly projected, with a residual

The recurrent forms used at inference are parallel: the minGRU recurrence
h_t = (1-z_t) h_{t-1} + z_t h~_t runs as a log-space prefix scan
(cumulative log-decay plus logcumsumexp, split by candidate sign), and the
state-space recurrence h_t = a_t h_{t-1} + b_t (x)~ x_t runs chunk-parallel
with sequential state hand-off between chunks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tensor import ShapeError, Tensor, activation, layer_norm, linear
from .weights import WeightStore

__all__ = [
    "SEQ_KINDS",
    "SeqConfig",
    "rotary_embed",
    "mhsa",
    "tf_block",
    "att_block",
    "bigru",
    "tcn_conv_stack",
    "tcn_block",
    "mamba_scan_sequential",
    "mamba_scan_chunked",
    "mamba2_block",
    "mingru_bidirectional",
    "hybrid_block",
    "run_sequence_model",
    "param_inventory",
    "mac_count",
]

SEQ_KINDS = ("TF", "ATT", "BIGRU", "TCN", "MAMBA", "HYBRID", "NONE")

ROTARY_BASE = 10000.0
TCN_DILATIONS = (1, 2, 4, 8, 16)
_ATTENTION_KINDS = ("TF", "ATT", "HYBRID")


@dataclass(frozen=True)
class SeqConfig:
    """Sequence-model choice and size."""

    kind: str
    hidden_dim: int = 256
    num_blocks: int = 2
    num_heads: int | None = None
    state_dim: int = 64
    kernel: int = 3

    def __post_init__(self):
        if self.kind not in SEQ_KINDS:
            raise ValueError(f"unknown sequence model kind {self.kind!r}")
        if self.kind == "NONE":
            return
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.kind in _ATTENTION_KINDS:
            if self.hidden_dim % self.heads:
                raise ValueError(
                    f"hidden_dim {self.hidden_dim} not divisible by {self.heads} heads"
                )
            if (self.hidden_dim // self.heads) % 2:
                raise ValueError("rotary attention needs an even head dim")
        if self.kind in ("BIGRU", "HYBRID") and self.hidden_dim % 2:
            raise ValueError(f"{self.kind} needs an even hidden_dim")
        if self.kind == "MAMBA" and self.state_dim < 1:
            raise ValueError("state_dim must be >= 1")
        if self.kind == "TCN" and (self.kernel < 1 or self.kernel % 2 == 0):
            raise ValueError("TCN kernel must be odd and >= 1")

    @property
    def heads(self) -> int:
        if self.num_heads is not None:
            return self.num_heads
        return max(1, self.hidden_dim // 64)


def _as2d(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float32)
    if a.ndim != 2:
        raise ShapeError(f"sequence input must be [T, D], got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def _rotary64(q: np.ndarray, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t, _, dh = q.shape
    if dh % 2:
        raise ShapeError(f"rotary embedding needs an even head dim, got {dh}")
    half = dh // 2
    theta = ROTARY_BASE ** (-2.0 * np.arange(half) / dh)
    ang = np.arange(t)[:, None] * theta[None, :]
    cos = np.cos(ang)[:, None, :]
    sin = np.sin(ang)[:, None, :]

    def rot(v):
        a, b = v[..., :half], v[..., half:]
        return np.concatenate([a * cos - b * sin, a * sin + b * cos], axis=-1)

    return rot(q), rot(k)


def rotary_embed(q, k) -> tuple[Tensor, Tensor]:
    """Rotate query/key pairs [T, heads, dh] by position-dependent angles.

    Pair i of each head turns by t * base^(-2i/dh); norms are preserved and
    q.k products depend on relative position only.
    """
    qa = np.asarray(q, dtype=np.float64)
    ka = np.asarray(k, dtype=np.float64)
    if qa.shape != ka.shape or qa.ndim != 3:
        raise ShapeError(f"rotary_embed needs matching [T,h,dh] inputs, got {qa.shape} and {ka.shape}")
    qr, kr = _rotary64(qa, ka)
    return Tensor(qr.astype(np.float32)), Tensor(kr.astype(np.float32))


def mhsa(x, weights: WeightStore, num_heads: int, use_rotary: bool = True,
         prefix: str = "attn.") -> Tensor:
    """Bidirectional scaled dot-product self-attention with output projection."""
    xa = _as2d(x)
    t, d = xa.shape
    if d % num_heads:
        raise ShapeError(f"model dim {d} not divisible by {num_heads} heads")
    dh = d // num_heads

    def proj(name):
        w = weights.arr(prefix + name + ".w", (d, d)).astype(np.float64)
        b = weights.arr(prefix + name + ".b", (d,)).astype(np.float64)
        return (xa.astype(np.float64) @ w.T + b).reshape(t, num_heads, dh)

    q, k, v = proj("q"), proj("k"), proj("v")
    if use_rotary:
        q, k = _rotary64(q, k)
    scores = np.einsum("thd,shd->hts", q, k, optimize=True) / np.sqrt(dh)
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    ctx = np.einsum("hts,shd->thd", attn, v, optimize=True).reshape(t, d)
    wo = weights.arr(prefix + "out.w", (d, d)).astype(np.float64)
    bo = weights.arr(prefix + "out.b", (d,)).astype(np.float64)
    return Tensor((ctx @ wo.T + bo).astype(np.float32))


def tf_block(x, weights: WeightStore, prefix: str = "", num_heads: int | None = None) -> Tensor:
    """Pre-norm transformer block: attention then 4x-wide gelu FFN, both residual."""
    xa = _as2d(x)
    d = xa.shape[1]
    heads = num_heads if num_heads is not None else max(1, d // 64)
    n1 = layer_norm(xa, weights.arr(prefix + "ln1.gamma", (d,)),
                    weights.arr(prefix + "ln1.beta", (d,)))
    h = xa + mhsa(n1, weights, heads, use_rotary=True, prefix=prefix + "attn.").data
    n2 = layer_norm(h, weights.arr(prefix + "ln2.gamma", (d,)),
                    weights.arr(prefix + "ln2.beta", (d,)))
    f = linear(n2, weights.get(prefix + "ffn.fc1.w", (4 * d, d)),
               weights.get(prefix + "ffn.fc1.b", (4 * d,)))
    f = activation(f, "gelu")
    f = linear(f, weights.get(prefix + "ffn.fc2.w", (d, 4 * d)),
               weights.get(prefix + "ffn.fc2.b", (d,)))
    return Tensor(h + f.data)


def att_block(x, weights: WeightStore, prefix: str = "", num_heads: int | None = None) -> Tensor:
    """Self-attention with a pre-norm residual and no feed-forward."""
    xa = _as2d(x)
    d = xa.shape[1]
    heads = num_heads if num_heads is not None else max(1, d // 64)
    n = layer_norm(xa, weights.arr(prefix + "ln.gamma", (d,)),
                   weights.arr(prefix + "ln.beta", (d,)))
    return Tensor(xa + mhsa(n, weights, heads, use_rotary=True, prefix=prefix + "attn.").data)


# ---------------------------------------------------------------------------
# gated recurrence
# ---------------------------------------------------------------------------

def _gru_direction(xa: np.ndarray, weights: WeightStore, prefix: str, h_dim: int) -> np.ndarray:
    d = xa.shape[1]
    w = {g: weights.arr(prefix + f"w_{g}", (h_dim, d)).astype(np.float64) for g in "rzn"}
    u = {g: weights.arr(prefix + f"u_{g}", (h_dim, h_dim)).astype(np.float64) for g in "rzn"}
    bi = {g: weights.arr(prefix + f"b_i{g}", (h_dim,)).astype(np.float64) for g in "rzn"}
    bh = {g: weights.arr(prefix + f"b_h{g}", (h_dim,)).astype(np.float64) for g in "rzn"}
    x64 = xa.astype(np.float64)
    xr = x64 @ w["r"].T + bi["r"]
    xz = x64 @ w["z"].T + bi["z"]
    xn = x64 @ w["n"].T + bi["n"]
    h = np.zeros(h_dim)
    out = np.empty((xa.shape[0], h_dim))
    for t in range(xa.shape[0]):
        r = expit(xr[t] + h @ u["r"].T + bh["r"])
        z = expit(xz[t] + h @ u["z"].T + bh["z"])
        n = np.tanh(xn[t] + r * (h @ u["n"].T + bh["n"]))
        h = (1.0 - z) * n + z * h
        out[t] = h
    return out


def bigru(x, weights: WeightStore, prefix: str = "") -> Tensor:
    """Bidirectional GRU; per-direction hidden D/2, outputs concatenated."""
    xa = _as2d(x)
    d = xa.shape[1]
    if d % 2:
        raise ShapeError(f"bigru needs an even model dim, got {d}")
    h_dim = d // 2
    fwd = _gru_direction(xa, weights, prefix + "gru.fwd.", h_dim)
    bwd = _gru_direction(xa[::-1], weights, prefix + "gru.bwd.", h_dim)[::-1]
    return Tensor(np.concatenate([fwd, bwd], axis=1).astype(np.float32))


# ---------------------------------------------------------------------------
# temporal convolution
# ---------------------------------------------------------------------------

def _conv1d_same(xa: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    t = xa.shape[0]
    k = w.shape[2]
    pad = dilation * (k - 1) // 2
    xp = np.pad(xa, ((pad, pad), (0, 0)))
    y = np.zeros((t, w.shape[0]), dtype=np.float64)
    for j in range(k):
        y += xp[j * dilation : j * dilation + t].astype(np.float64) @ w[:, :, j].astype(np.float64).T
    return y + b.astype(np.float64)


def tcn_conv_stack(x, weights: WeightStore, prefix: str = "",
                   activation_kind: str = "relu") -> Tensor:
    """Five dilated same-padded conv1d layers (dilations 2^n), each activated."""
    from .tensor import activation as _activation

    xa = _as2d(x)
    d = xa.shape[1]
    h = xa.astype(np.float64)
    for n, dil in enumerate(TCN_DILATIONS):
        w = weights.arr(prefix + f"conv{n}.w", (d, d, 3))
        b = weights.arr(prefix + f"conv{n}.b", (d,))
        h = _activation(_conv1d_same(h, w, b, dil).astype(np.float32), activation_kind).data
    return Tensor(h)


def tcn_block(x, weights: WeightStore, prefix: str = "",
              activation_kind: str = "relu") -> Tensor:
    """Dilated conv stack with a residual connection around the block."""
    xa = _as2d(x)
    return Tensor(xa + tcn_conv_stack(xa, weights, prefix, activation_kind).data)


def tcn_receptive_field(kernel: int = 3, dilations=TCN_DILATIONS) -> int:
    return 1 + sum((kernel - 1) * d for d in dilations)


# ---------------------------------------------------------------------------
# selective state space
# ---------------------------------------------------------------------------

def mamba_scan_sequential(log_a, b, c, xt) -> np.ndarray:
    """Step-by-step reference of h_t = a_t h_{t-1} + b_t (x) x_t, y_t = c_t . h_t.

    log_a [T,H] per-head log decay, b/c [T,N] state in/out vectors,
    xt [T,H,P] inputs; returns [T,H,P] float64.
    """
    la = np.asarray(log_a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    cv = np.asarray(c, dtype=np.float64)
    xv = np.asarray(xt, dtype=np.float64)
    t_len, heads = la.shape
    n = bv.shape[1]
    p = xv.shape[2]
    a = np.exp(la)
    state = np.zeros((heads, n, p))
    y = np.empty((t_len, heads, p))
    for t in range(t_len):
        state = a[t][:, None, None] * state + bv[t][None, :, None] * xv[t][:, None, :]
        y[t] = np.einsum("n,hnp->hp", cv[t], state)
    return y


def mamba_scan_chunked(log_a, b, c, xt, chunk_size: int = 64) -> np.ndarray:
    """Chunk-parallel evaluation of the selective-scan recurrence.

    Within a chunk the output is the quadratic form
    y_i = sum_{j<=i} (c_i . b_j) exp(cum_i - cum_j) x_j; states are passed
    between chunks through a single sequential recurrence over chunks.
    Equals mamba_scan_sequential up to float rounding.
    """
    la = np.asarray(log_a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    cv = np.asarray(c, dtype=np.float64)
    xv = np.asarray(xt, dtype=np.float64)
    t_len, heads = la.shape
    n = bv.shape[1]
    p = xv.shape[2]

    q = max(1, min(chunk_size, t_len))
    npad = (-t_len) % q
    if npad:
        la = np.pad(la, ((0, npad), (0, 0)))
        bv = np.pad(bv, ((0, npad), (0, 0)))
        cv = np.pad(cv, ((0, npad), (0, 0)))
        xv = np.pad(xv, ((0, npad), (0, 0), (0, 0)))
    nc = la.shape[0] // q
    la = la.reshape(nc, q, heads)
    bv = bv.reshape(nc, q, n)
    cv = cv.reshape(nc, q, n)
    xv = xv.reshape(nc, q, heads, p)

    cum = np.cumsum(la, axis=1)  # [nc,q,H]
    mask = np.tril(np.ones((q, q), dtype=bool))[None, :, :, None]
    diff = np.where(mask, cum[:, :, None, :] - cum[:, None, :, :], -np.inf)
    decay_ij = np.exp(diff)  # [nc,q,q,H]
    scores = np.einsum("cin,cjn->cij", cv, bv, optimize=True)
    y_intra = np.einsum("cij,cijh,cjhp->cihp", scores, decay_ij, xv, optimize=True)

    chunk_in = np.empty((nc, heads, n, p))
    state = np.zeros((heads, n, p))
    for ci in range(nc):
        chunk_in[ci] = state
        total = cum[ci, -1]  # [H]
        tail = np.exp(total[None, :] - cum[ci])  # [q,H], products over r > j
        state = np.exp(total)[:, None, None] * state + np.einsum(
            "jn,jh,jhp->hnp", bv[ci], tail, xv[ci], optimize=True
        )
    y_inter = np.einsum("cin,chnp->cihp", cv, chunk_in, optimize=True) * np.exp(cum)[..., None]

    y = (y_intra + y_inter).reshape(nc * q, heads, p)
    return y[:t_len]


def _mamba_heads(d_inner: int) -> tuple[int, int]:
    if d_inner % 64 == 0:
        return d_inner // 64, 64
    return 1, d_inner


def mamba2_block(x, weights: WeightStore, prefix: str = "", state_dim: int = 64,
                 chunk_size: int = 64) -> Tensor:
    """Selective state-space block with pre-norm residual and gated output.

    A fused input projection produces the gate z, the inner sequence, the
    state in/out vectors b and c, and a per-head step size; the per-head
    decay is a_t = exp(-softplus(dt_t + dt_bias) * exp(a_log)) in (0, 1).
    """
    xa = _as2d(x)
    t, d = xa.shape
    d_inner = 2 * d
    heads, p = _mamba_heads(d_inner)
    n = state_dim
    pre = prefix + "mamba."

    norm = layer_norm(xa, weights.arr(prefix + "ln.gamma", (d,)),
                      weights.arr(prefix + "ln.beta", (d,))).data.astype(np.float64)

    in_w = weights.arr(pre + "in_proj.w", (2 * d_inner + 2 * n + heads, d)).astype(np.float64)
    zxbcdt = norm @ in_w.T
    z = zxbcdt[:, :d_inner]
    xraw = zxbcdt[:, d_inner : 2 * d_inner]
    bmat = zxbcdt[:, 2 * d_inner : 2 * d_inner + n]
    cmat = zxbcdt[:, 2 * d_inner + n : 2 * d_inner + 2 * n]
    dt_raw = zxbcdt[:, 2 * d_inner + 2 * n :]

    dt_bias = weights.arr(pre + "dt_bias", (heads,)).astype(np.float64)
    a_log = weights.arr(pre + "a_log", (heads,)).astype(np.float64)
    d_skip = weights.arr(pre + "d_skip", (heads,)).astype(np.float64)

    xs = xraw * expit(xraw)  # silu
    dt = np.logaddexp(0.0, dt_raw + dt_bias)  # softplus, > 0
    log_a = -dt * np.exp(a_log)[None, :]
    xh = xs.reshape(t, heads, p)
    y = mamba_scan_chunked(log_a, bmat, cmat, xh * dt[:, :, None], chunk_size)
    y = y + d_skip[None, :, None] * xh
    y = y.reshape(t, d_inner)

    gated = y * (z * expit(z))
    rms = np.sqrt((gated ** 2).mean(axis=-1, keepdims=True) + 1e-5)
    gamma = weights.arr(pre + "norm.gamma", (d_inner,)).astype(np.float64)
    out = (gated / rms) * gamma
    out_w = weights.arr(pre + "out_proj.w", (d, d_inner)).astype(np.float64)
    return Tensor((xa.astype(np.float64) + out @ out_w.T).astype(np.float32))


# ---------------------------------------------------------------------------
# minGRU
# ---------------------------------------------------------------------------

def _mingru_direction(xa: np.ndarray, weights: WeightStore, prefix: str, h_dim: int) -> np.ndarray:
    """Log-space prefix scan of h_t = (1-z_t) h_{t-1} + z_t h~_t, h_0 = 0.

    With k the gate logits, log(1-z) = -softplus(k) and log z = -softplus(-k),
    so every coefficient is expressed exactly in log space; the identity
    candidate h~ can be negative, so positive and negative contributions are
    scanned separately and subtracted.
    """
    d = xa.shape[1]
    w_z = weights.arr(prefix + "w_z", (h_dim, d)).astype(np.float64)
    b_z = weights.arr(prefix + "b_z", (h_dim,)).astype(np.float64)
    w_h = weights.arr(prefix + "w_h", (h_dim, d)).astype(np.float64)
    b_h = weights.arr(prefix + "b_h", (h_dim,)).astype(np.float64)
    x64 = xa.astype(np.float64)
    k = x64 @ w_z.T + b_z
    cand = x64 @ w_h.T + b_h

    log_a = -np.logaddexp(0.0, k)  # log(1 - z)
    with np.errstate(divide="ignore"):
        log_zh = -np.logaddexp(0.0, -k) + np.log(np.abs(cand))
    cum = np.cumsum(log_a, axis=0)

    out = np.zeros_like(cand)
    for sign in (1.0, -1.0):
        picked = np.where((cand * sign) > 0, log_zh, -np.inf) - cum
        scanned = np.logaddexp.accumulate(picked, axis=0)
        out += sign * np.exp(cum + scanned)
    return out


def mingru_bidirectional(x, weights: WeightStore, prefix: str = "") -> Tensor:
    """Forward and backward minGRU passes concatenated to width D."""
    xa = _as2d(x)
    d = xa.shape[1]
    if d % 2:
        raise ShapeError(f"mingru needs an even model dim, got {d}")
    h_dim = d // 2
    fwd = _mingru_direction(xa, weights, prefix + "mingru.fwd.", h_dim)
    bwd = _mingru_direction(xa[::-1], weights, prefix + "mingru.bwd.", h_dim)[::-1]
    return Tensor(np.concatenate([fwd, bwd], axis=1).astype(np.float32))


# ---------------------------------------------------------------------------
# hybrid
# ---------------------------------------------------------------------------

def hybrid_block(x, weights: WeightStore, prefix: str = "",
                 num_heads: int | None = None) -> Tensor:
    """Average of parallel attention and bidirectional-minGRU branches,
    linearly projected, with a residual around the block."""
    xa = _as2d(x)
    d = xa.shape[1]
    heads = num_heads if num_heads is not None else max(1, d // 64)
    n = layer_norm(xa, weights.arr(prefix + "ln.gamma", (d,)),
                   weights.arr(prefix + "ln.beta", (d,)))
    attn = mhsa(n, weights, heads, use_rotary=False, prefix=prefix + "attn.").data
    rec = mingru_bidirectional(n, weights, prefix).data
    mixed = linear((attn + rec) / 2.0,
                   weights.get(prefix + "mix.w", (d, d)),
                   weights.get(prefix + "mix.b", (d,))).data
    return Tensor(xa + mixed)


# ---------------------------------------------------------------------------
# dispatch, inventory, MACs
# ---------------------------------------------------------------------------

def run_sequence_model(cfg: SeqConfig, weights: WeightStore, x,
                       trace: dict | None = None) -> Tensor:
    """Apply cfg.num_blocks blocks of the configured kind; NONE is identity."""
    if cfg.kind == "NONE":
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    xa = _as2d(x)
    if xa.shape[1] != cfg.hidden_dim:
        raise ShapeError(
            f"sequence input width {xa.shape[1]} does not match hidden_dim {cfg.hidden_dim}"
        )
    out = Tensor(xa)
    for i in range(cfg.num_blocks):
        p = f"seq.block{i}."
        if cfg.kind == "TF":
            out = tf_block(out, weights, p, cfg.heads)
        elif cfg.kind == "ATT":
            out = att_block(out, weights, p, cfg.heads)
        elif cfg.kind == "BIGRU":
            out = bigru(out, weights, p)
        elif cfg.kind == "TCN":
            out = tcn_block(out, weights, p)
        elif cfg.kind == "MAMBA":
            out = mamba2_block(out, weights, p, cfg.state_dim)
        elif cfg.kind == "HYBRID":
            out = hybrid_block(out, weights, p, cfg.heads)
        else:  # pragma: no cover - guarded by SeqConfig
            raise ValueError(f"unknown sequence model kind {cfg.kind!r}")
        if trace is not None:
            trace[f"seq.block{i}"] = out.data
    return out


def _attn_inventory(d: int) -> dict[str, tuple[int, ...]]:
    inv = {}
    for name in ("q", "k", "v", "out"):
        inv[f"attn.{name}.w"] = (d, d)
        inv[f"attn.{name}.b"] = (d,)
    return inv


def param_inventory(cfg: SeqConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map of all sequence-model parameters."""
    if cfg.kind == "NONE":
        return {}
    d = cfg.hidden_dim
    inv: dict[str, tuple[int, ...]] = {}
    for i in range(cfg.num_blocks):
        p = f"seq.block{i}."
        if cfg.kind == "TF":
            inv[p + "ln1.gamma"] = (d,)
            inv[p + "ln1.beta"] = (d,)
            for k, v in _attn_inventory(d).items():
                inv[p + k] = v
            inv[p + "ln2.gamma"] = (d,)
            inv[p + "ln2.beta"] = (d,)
            inv[p + "ffn.fc1.w"] = (4 * d, d)
            inv[p + "ffn.fc1.b"] = (4 * d,)
            inv[p + "ffn.fc2.w"] = (d, 4 * d)
            inv[p + "ffn.fc2.b"] = (d,)
        elif cfg.kind == "ATT":
            inv[p + "ln.gamma"] = (d,)
            inv[p + "ln.beta"] = (d,)
            for k, v in _attn_inventory(d).items():
                inv[p + k] = v
        elif cfg.kind == "BIGRU":
            h = d // 2
            for direction in ("fwd", "bwd"):
                q = p + f"gru.{direction}."
                for g in "rzn":
                    inv[q + f"w_{g}"] = (h, d)
                for g in "rzn":
                    inv[q + f"u_{g}"] = (h, h)
                for g in "rzn":
                    inv[q + f"b_i{g}"] = (h,)
                for g in "rzn":
                    inv[q + f"b_h{g}"] = (h,)
        elif cfg.kind == "TCN":
            for n in range(len(TCN_DILATIONS)):
                inv[p + f"conv{n}.w"] = (d, d, cfg.kernel)
                inv[p + f"conv{n}.b"] = (d,)
        elif cfg.kind == "MAMBA":
            d_inner = 2 * d
            heads, _ = _mamba_heads(d_inner)
            inv[p + "ln.gamma"] = (d,)
            inv[p + "ln.beta"] = (d,)
            inv[p + "mamba.in_proj.w"] = (2 * d_inner + 2 * cfg.state_dim + heads, d)
            inv[p + "mamba.dt_bias"] = (heads,)
            inv[p + "mamba.a_log"] = (heads,)
            inv[p + "mamba.d_skip"] = (heads,)
            inv[p + "mamba.norm.gamma"] = (d_inner,)
            inv[p + "mamba.out_proj.w"] = (d, d_inner)
        elif cfg.kind == "HYBRID":
            h = d // 2
            inv[p + "ln.gamma"] = (d,)
            inv[p + "ln.beta"] = (d,)
            for k, v in _attn_inventory(d).items():
                inv[p + k] = v
            for direction in ("fwd", "bwd"):
                q = p + f"mingru.{direction}."
                inv[q + "w_z"] = (h, d)
                inv[q + "b_z"] = (h,)
                inv[q + "w_h"] = (h, d)
                inv[q + "b_h"] = (h,)
            inv[p + "mix.w"] = (d, d)
            inv[p + "mix.b"] = (d,)
    return inv


def mac_count(cfg: SeqConfig, frames: int = 250) -> int:
    """Multiply-accumulates of one forward pass over `frames` steps.

    Only matrix products count: attention includes its T^2 score and value
    mixing terms; recurrent gating, pointwise products, and sums are free.
    """
    if cfg.kind == "NONE":
        return 0
    t = frames
    d = cfg.hidden_dim
    attn = 4 * t * d * d + 2 * t * t * d
    if cfg.kind == "TF":
        per_block = attn + 2 * t * d * (4 * d)
    elif cfg.kind == "ATT":
        per_block = attn
    elif cfg.kind == "BIGRU":
        h = d // 2
        per_block = 2 * t * 3 * (d * h + h * h)
    elif cfg.kind == "TCN":
        per_block = len(TCN_DILATIONS) * t * cfg.kernel * d * d
    elif cfg.kind == "MAMBA":
        d_inner = 2 * d
        heads, _ = _mamba_heads(d_inner)
        n = cfg.state_dim
        per_block = (
            t * d * (2 * d_inner + 2 * n + heads)
            + 2 * t * n * d_inner
            + t * d_inner * d
        )
    elif cfg.kind == "HYBRID":
        h = d // 2
        per_block = attn + 2 * t * 2 * d * h + t * d * d
    else:  # pragma: no cover
        raise ValueError(cfg.kind)
    return cfg.num_blocks * per_block
