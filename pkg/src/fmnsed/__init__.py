"""fmnsed: frame-wise MobileNet sound event detection toolkit."""

__version__ = "0.1.0"

from .tensor import ConvSpec, ShapeError, Tensor  # noqa: F401
from .weights import WeightError, WeightStore, load_fmnw, save_fmnw  # noqa: F401
from .features import MelConfig, log_mel  # noqa: F401
from .backbone import FmnConfig, build_fmn, forward_fmn, make_divisible  # noqa: F401
from .seqmodels import SeqConfig, run_sequence_model  # noqa: F401
from .assembly import (  # noqa: F401
    ModelSpec,
    forward_full,
    format_model_name,
    init_weights,
    parse_model_name,
    predict_probs,
)
from .complexity import ComplexityReport, bench_throughput, count_macs, count_params  # noqa: F401
from .postprocess import EventList, decode_events, median_filter  # noqa: F401
from .psds import evaluate_psds1, psds_score  # noqa: F401
from .objectives import KdBatch, kd_loss, mixup  # noqa: F401
