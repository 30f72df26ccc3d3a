"""PyTorch reference models mirroring the released architecture family.

This is the converter-side source runtime: a frame-wise MobileNetV3-Large
backbone (strides rearranged so a 128x1000 mel input yields embeddings of
shape [channels, 1, 250]) with an optional two-block sequence model and a
frame-wise classification head. Checkpoints produced by `make_checkpoint`
use plain torch module naming (fused GRU gates, separate batch-norm
statistics) so the NameMap exercises every transform it supports.
"""

from __future__ import annotations

import math
import re

import torch
import torch.nn as nn
import torch.nn.functional as F

ROTARY_BASE = 10000.0

# kernel, expansion, out, use_se, activation, (freq, time) stride
LARGE_TABLE = (
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
STEM_CH = 16
EMBED_CH = 960


def make_divisible(v: float, divisor: int = 8) -> int:
    new_v = max(divisor, int(v + divisor / 2) // divisor * divisor)
    if new_v < 0.9 * v:
        new_v += divisor
    return new_v


_NAME_RE = re.compile(r"^fmn(\d{2})(?:\+([A-Z]+):(\d+))?$")


def parse_name(name: str) -> tuple[float, str, int]:
    m = _NAME_RE.match(name.strip())
    if not m:
        raise ValueError(f"cannot parse model name {name!r}")
    alpha = int(m.group(1)) / 10.0
    kind = m.group(2) or "NONE"
    hidden = int(m.group(3)) if m.group(3) else 0
    return alpha, kind, hidden


def _act(kind: str) -> nn.Module:
    return nn.ReLU() if kind == "relu" else nn.Hardswish()


class SqueezeExcite(nn.Module):
    def __init__(self, channels: int, squeeze: int):
        super().__init__()
        self.se_fc1 = nn.Conv2d(channels, squeeze, 1)
        self.se_fc2 = nn.Conv2d(squeeze, channels, 1)

    def forward(self, x):
        s = x.mean(dim=(2, 3), keepdim=True)
        s = F.relu(self.se_fc1(s))
        s = F.hardsigmoid(self.se_fc2(s))
        return x * s


class InvertedResidual(nn.Module):
    def __init__(self, cin, kernel, exp, out, use_se, act, stride):
        super().__init__()
        self.has_expand = exp != cin
        self.use_res = stride == (1, 1) and cin == out
        if self.has_expand:
            self.expand = nn.Conv2d(cin, exp, 1, bias=False)
            self.expand_bn = nn.BatchNorm2d(exp)
        self.dw = nn.Conv2d(exp, exp, kernel, stride=stride,
                            padding=kernel // 2, groups=exp, bias=False)
        self.dw_bn = nn.BatchNorm2d(exp)
        self.se = SqueezeExcite(exp, make_divisible(exp / 4)) if use_se else None
        self.project = nn.Conv2d(exp, out, 1, bias=False)
        self.project_bn = nn.BatchNorm2d(out)
        self.act = _act(act)

    def forward(self, x):
        h = x
        if self.has_expand:
            h = self.act(self.expand_bn(self.expand(h)))
        h = self.act(self.dw_bn(self.dw(h)))
        if self.se is not None:
            h = self.se(h)
        h = self.project_bn(self.project(h))
        return h + x if self.use_res else h


class Backbone(nn.Module):
    def __init__(self, alpha: float):
        super().__init__()
        stem = make_divisible(STEM_CH * alpha)
        self.stem_conv = nn.Conv2d(1, stem, 3, stride=(2, 2), padding=1, bias=False)
        self.stem_bn = nn.BatchNorm2d(stem)
        blocks = []
        cin = stem
        for k, exp, out, se, act, stride in LARGE_TABLE:
            exp_c = make_divisible(exp * alpha)
            out_c = make_divisible(out * alpha)
            blocks.append(InvertedResidual(cin, k, exp_c, out_c, se, act, stride))
            cin = out_c
        self.blocks = nn.ModuleList(blocks)
        self.embed = make_divisible(EMBED_CH * alpha)
        self.final_conv = nn.Conv2d(cin, self.embed, 1, bias=False)
        self.final_bn = nn.BatchNorm2d(self.embed)

    def forward(self, mel, trace=None):
        x = F.hardswish(self.stem_bn(self.stem_conv(mel)))
        if trace is not None:
            trace["stem"] = x[0]
        for i, block in enumerate(self.blocks):
            x = block(x)
            if trace is not None:
                trace[f"block{i}"] = x[0]
        x = F.hardswish(self.final_bn(self.final_conv(x)))
        out = x[0, :, 0, :]
        if trace is not None:
            trace["backbone"] = out
        return out


def _rotary(q, k):
    t, heads, dh = q.shape
    half = dh // 2
    theta = ROTARY_BASE ** (-2.0 * torch.arange(half, dtype=q.dtype) / dh)
    ang = torch.arange(t, dtype=q.dtype)[:, None] * theta[None, :]
    cos = torch.cos(ang)[:, None, :]
    sin = torch.sin(ang)[:, None, :]

    def rot(v):
        a, b = v[..., :half], v[..., half:]
        return torch.cat([a * cos - b * sin, a * sin + b * cos], dim=-1)

    return rot(q), rot(k)


class Attention(nn.Module):
    def __init__(self, d: int, heads: int, use_rotary: bool):
        super().__init__()
        self.heads = heads
        self.use_rotary = use_rotary
        self.q = nn.Linear(d, d)
        self.k = nn.Linear(d, d)
        self.v = nn.Linear(d, d)
        self.out = nn.Linear(d, d)

    def forward(self, x):
        t, d = x.shape
        dh = d // self.heads
        q = self.q(x).reshape(t, self.heads, dh)
        k = self.k(x).reshape(t, self.heads, dh)
        v = self.v(x).reshape(t, self.heads, dh)
        if self.use_rotary:
            q, k = _rotary(q, k)
        scores = torch.einsum("thd,shd->hts", q, k) / math.sqrt(dh)
        attn = torch.softmax(scores, dim=-1)
        ctx = torch.einsum("hts,shd->thd", attn, v).reshape(t, d)
        return self.out(ctx)


class TfBlock(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.attn = Attention(d, heads, use_rotary=True)
        self.ln2 = nn.LayerNorm(d)
        self.fc1 = nn.Linear(d, 4 * d)
        self.fc2 = nn.Linear(4 * d, d)

    def forward(self, x):
        h = x + self.attn(self.ln1(x))
        return h + self.fc2(F.gelu(self.fc1(self.ln2(h))))


class AttBlock(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.ln = nn.LayerNorm(d)
        self.attn = Attention(d, heads, use_rotary=True)

    def forward(self, x):
        return x + self.attn(self.ln(x))


class BigruBlock(nn.Module):
    def __init__(self, d: int):
        super().__init__()
        self.gru = nn.GRU(d, d // 2, bidirectional=True)

    def forward(self, x):
        out, _ = self.gru(x.unsqueeze(1))
        return out[:, 0, :]


class TcnBlock(nn.Module):
    def __init__(self, d: int):
        super().__init__()
        self.convs = nn.ModuleList(
            [nn.Conv1d(d, d, 3, dilation=2 ** n, padding=2 ** n) for n in range(5)]
        )

    def forward(self, x):
        h = x.t().unsqueeze(0)  # [1, D, T]
        for conv in self.convs:
            h = F.relu(conv(h))
        return x + h[0].t()


class MambaBlock(nn.Module):
    """Sequential reference of the selective state-space block."""

    def __init__(self, d: int, state_dim: int = 64):
        super().__init__()
        self.d = d
        self.d_inner = 2 * d
        self.heads = self.d_inner // 64 if self.d_inner % 64 == 0 else 1
        self.head_dim = self.d_inner // self.heads
        self.state_dim = state_dim
        self.ln = nn.LayerNorm(d)
        self.in_proj = nn.Linear(d, 2 * self.d_inner + 2 * state_dim + self.heads,
                                 bias=False)
        self.dt_bias = nn.Parameter(torch.zeros(self.heads))
        self.a_log = nn.Parameter(torch.zeros(self.heads))
        self.d_skip = nn.Parameter(torch.ones(self.heads))
        self.norm_gamma = nn.Parameter(torch.ones(self.d_inner))
        self.out_proj = nn.Linear(self.d_inner, d, bias=False)

    def forward(self, x):
        t = x.shape[0]
        di, n, h = self.d_inner, self.state_dim, self.heads
        zxbcdt = self.in_proj(self.ln(x))
        z = zxbcdt[:, :di]
        xraw = zxbcdt[:, di : 2 * di]
        b = zxbcdt[:, 2 * di : 2 * di + n]
        c = zxbcdt[:, 2 * di + n : 2 * di + 2 * n]
        dt_raw = zxbcdt[:, 2 * di + 2 * n :]

        xs = F.silu(xraw)
        dt = F.softplus(dt_raw + self.dt_bias)
        a = torch.exp(-dt * torch.exp(self.a_log))  # [T, H]
        xh = xs.reshape(t, h, self.head_dim)
        xd = xh * dt[:, :, None]
        state = x.new_zeros(h, n, self.head_dim)
        ys = []
        for ti in range(t):
            state = a[ti][:, None, None] * state + b[ti][None, :, None] * xd[ti][:, None, :]
            ys.append(torch.einsum("n,hnp->hp", c[ti], state))
        y = torch.stack(ys) + self.d_skip[None, :, None] * xh
        y = y.reshape(t, di)
        gated = y * F.silu(z)
        rms = torch.sqrt((gated ** 2).mean(dim=-1, keepdim=True) + 1e-5)
        return x + self.out_proj(gated / rms * self.norm_gamma)


def _mingru_direction(x, lin_z, lin_h):
    z = torch.sigmoid(lin_z(x))
    cand = lin_h(x)
    h = torch.zeros_like(cand[0])
    out = []
    for t in range(x.shape[0]):
        h = (1.0 - z[t]) * h + z[t] * cand[t]
        out.append(h)
    return torch.stack(out)


class HybridBlock(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        half = d // 2
        self.ln = nn.LayerNorm(d)
        self.attn = Attention(d, heads, use_rotary=False)
        self.zf = nn.Linear(d, half)
        self.hf = nn.Linear(d, half)
        self.zb = nn.Linear(d, half)
        self.hb = nn.Linear(d, half)
        self.mix = nn.Linear(d, d)

    def forward(self, x):
        n = self.ln(x)
        attn = self.attn(n)
        fwd = _mingru_direction(n, self.zf, self.hf)
        bwd = _mingru_direction(n.flip(0), self.zb, self.hb).flip(0)
        rec = torch.cat([fwd, bwd], dim=1)
        return x + self.mix((attn + rec) / 2.0)


def _seq_block(kind: str, hidden: int) -> nn.Module:
    heads = max(1, hidden // 64)
    if kind == "TF":
        return TfBlock(hidden, heads)
    if kind == "ATT":
        return AttBlock(hidden, heads)
    if kind == "BIGRU":
        return BigruBlock(hidden)
    if kind == "TCN":
        return TcnBlock(hidden)
    if kind == "MAMBA":
        return MambaBlock(hidden)
    if kind == "HYBRID":
        return HybridBlock(hidden, heads)
    raise ValueError(f"unknown sequence model kind {kind!r}")


class SedModel(nn.Module):
    def __init__(self, name: str, num_classes: int = 447, num_blocks: int = 2):
        super().__init__()
        alpha, kind, hidden = parse_name(name)
        self.kind = kind
        self.backbone = Backbone(alpha)
        if kind != "NONE":
            self.down = nn.Linear(self.backbone.embed, hidden)
            self.seq = nn.ModuleList(_seq_block(kind, hidden) for _ in range(num_blocks))
            head_in = hidden
        else:
            head_in = self.backbone.embed
        self.head = nn.Linear(head_in, num_classes)

    def forward(self, mel, trace=None):
        z = self.backbone(mel, trace=trace)
        frames = z.t()
        if trace is not None:
            trace["frames"] = frames
        h = frames
        if self.kind != "NONE":
            h = self.down(h)
            if trace is not None:
                trace["down"] = h
            for i, block in enumerate(self.seq):
                h = block(h)
                if trace is not None:
                    trace[f"seq.block{i}"] = h
        logits = self.head(h)
        if trace is not None:
            trace["logits"] = logits
        return logits

    def frame_probs(self, mel, trace=None):
        probs = torch.sigmoid(self.forward(mel, trace=trace))
        if trace is not None:
            trace["probs"] = probs
        return probs


def make_checkpoint(name: str, seed: int = 0) -> dict[str, torch.Tensor]:
    """Randomly initialized state dict with non-trivial batch-norm statistics."""
    torch.manual_seed(seed)
    model = SedModel(name)
    for module in model.modules():
        if isinstance(module, nn.BatchNorm2d):
            with torch.no_grad():
                module.weight.uniform_(0.5, 1.5)
                module.bias.normal_(0.0, 0.2)
                module.running_mean.normal_(0.0, 0.3)
                module.running_var.uniform_(0.5, 2.0)
        elif isinstance(module, (nn.Linear, nn.Conv2d, nn.Conv1d)):
            with torch.no_grad():
                module.weight.normal_(0.0, 0.08)
                if module.bias is not None:
                    module.bias.normal_(0.0, 0.05)
        elif isinstance(module, MambaBlock):
            with torch.no_grad():
                module.dt_bias.uniform_(-4.0, -1.0)
                module.a_log.uniform_(-0.5, 1.0)
                module.d_skip.normal_(1.0, 0.1)
                module.norm_gamma.normal_(1.0, 0.1)
    return model.state_dict()
