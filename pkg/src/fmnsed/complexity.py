"""Analytic parameter/MAC counting and wall-clock throughput measurement.

MAC convention: only multiply-accumulates of matrix products and
convolutions count. Softmax, normalization, activations, gating, and
pointwise products/sums contribute zero. Attention score and value-mixing
matmuls (T^2 * D each) are counted.
"""

from __future__ import annotations

import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import assembly, backbone, seqmodels
from .weights import WeightStore

CSV_HEADER = "name,alpha,kind,hidden,params,macs,throughput,batch,threads,hardware"

__all__ = ["ComplexityReport", "count_params", "count_macs", "conv_macs",
           "linear_macs", "backbone_macs", "bench_throughput", "worker_threads",
           "CSV_HEADER"]


@dataclass
class ComplexityReport:
    config_name: str
    params: int
    macs: int
    throughput: float | None = None
    batch_size: int = 64
    threads: int = 1
    hardware: str = ""
    alpha: float = 0.0
    kind: str = "NONE"
    hidden: int = 0

    def __post_init__(self):
        if self.params <= 0 or self.macs <= 0:
            raise ValueError("params and macs must be positive for a non-empty model")
        if self.throughput is not None and self.throughput <= 0:
            raise ValueError("throughput must be positive once measured")

    def csv_row(self) -> str:
        tp = f"{self.throughput:.4f}" if self.throughput is not None else ""
        return (
            f"{self.config_name},{self.alpha:g},{self.kind},{self.hidden},"
            f"{self.params},{self.macs},{tp},{self.batch_size},{self.threads},"
            f"{self.hardware}"
        )


def count_params(spec: assembly.ModelSpec) -> int:
    """Total float count of every tensor the spec's WeightStore must hold."""
    return sum(math.prod(shape) for shape in assembly.param_inventory(spec).values())


def conv_macs(cin: int, cout: int, kernel: tuple[int, int], groups: int,
              out_h: int, out_w: int) -> int:
    """(Cin/groups) * kh * kw multiply-accumulates per output element."""
    kh, kw = kernel
    return (cin // groups) * kh * kw * cout * out_h * out_w


def linear_macs(din: int, dout: int, positions: int = 1) -> int:
    return din * dout * positions


def backbone_macs(cfg: backbone.FmnConfig, freq_bins: int = 128,
                  frames: int = 1000) -> int:
    """MACs of one backbone pass; pooling, norms, activations, and the SE
    scaling multiply count zero."""
    def down(n, s):
        # matches the padded-conv output-size formula with pad k//2
        return (n + s - 1) // s

    f, t = down(freq_bins, backbone.STEM_STRIDE[0]), down(frames, backbone.STEM_STRIDE[1])
    macs = conv_macs(1, cfg.stem_channels, (3, 3), 1, f, t)
    for _, b, cin, has_expand, se in backbone.block_layout(cfg):
        exp = b.expansion_channels
        if has_expand:
            macs += conv_macs(cin, exp, (1, 1), 1, f, t)
        f, t = down(f, b.stride[0]), down(t, b.stride[1])
        macs += conv_macs(exp, exp, (b.kernel, b.kernel), exp, f, t)
        if b.use_se:
            macs += conv_macs(exp, se, (1, 1), 1, 1, 1)
            macs += conv_macs(se, exp, (1, 1), 1, 1, 1)
        macs += conv_macs(exp, b.out_channels, (1, 1), 1, f, t)
    macs += conv_macs(cfg.blocks[-1].out_channels, cfg.embed_channels, (1, 1), 1, f, t)
    return macs


def count_macs(spec: assembly.ModelSpec, input_shape=(1, 128, 1000)) -> int:
    """Multiply-accumulates for one clip with the given mel input shape."""
    _, freq, frames = input_shape
    t_out = frames // 4
    macs = backbone_macs(spec.fmn, freq_bins=freq, frames=frames)
    if spec.seq.kind != "NONE":
        macs += linear_macs(spec.fmn.embed_channels, spec.seq.hidden_dim, t_out)
        macs += seqmodels.mac_count(spec.seq, frames=t_out)
    macs += linear_macs(spec.head_in_dim, spec.num_classes, t_out)
    return macs


def worker_threads(requested: int | None = None) -> int:
    """Thread count for batch work, capped by FMNSED_THREADS."""
    n = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get("FMNSED_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def hardware_descriptor() -> str:
    cpu = platform.processor() or platform.machine() or "unknown-cpu"
    return f"{cpu} x{os.cpu_count()}".replace(",", " ")


def bench_throughput(spec: assembly.ModelSpec, weights: WeightStore,
                     batch_size: int = 64, warmup_iters: int = 1,
                     timed_iters: int = 3, threads: int | None = None,
                     seed: int = 0) -> ComplexityReport:
    """Median clips/second over timed iterations of a full forward batch."""
    if timed_iters < 3:
        raise ValueError("timed_iters must be >= 3")
    nthreads = worker_threads(threads)
    rng = np.random.default_rng(seed)
    mels = [rng.normal(size=(1, 128, 1000)).astype(np.float32) for _ in range(batch_size)]

    def run_batch():
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            list(pool.map(lambda m: assembly.predict_probs(spec, weights, m), mels))

    for _ in range(warmup_iters):
        run_batch()
    rates = []
    for _ in range(timed_iters):
        t0 = time.perf_counter()
        run_batch()
        rates.append(batch_size / (time.perf_counter() - t0))
    return ComplexityReport(
        config_name=assembly.format_model_name(spec),
        params=count_params(spec),
        macs=count_macs(spec),
        throughput=float(np.median(rates)),
        batch_size=batch_size,
        threads=nthreads,
        hardware=hardware_descriptor(),
        alpha=spec.fmn.alpha,
        kind=spec.seq.kind,
        hidden=spec.seq.hidden_dim,
    )
