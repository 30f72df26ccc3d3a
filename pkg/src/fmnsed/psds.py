"""PSDS1: threshold-independent detection scoring.

Matching uses intersection criteria: a detection is valid when its total
same-class overlap with ground truth covers at least dtc of its own
duration, and a ground-truth event counts as detected when valid
detections cover at least gtc of it (both 0.7 here). Per-class TPR curves
over the union eFPR grid are made monotone by a running maximum,
interpolated stepwise (left-continuous), extended at constant value, and
the area under max(0, mean_c - alpha_st * std_c) up to e_max = 100 FP/h is
normalized to [0, 1].

eFPR for an operating point is the total false-positive count across
classes per hour of audio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import postprocess
from .postprocess import EventList

DTC_DEFAULT = 0.7
GTC_DEFAULT = 0.7
ALPHA_ST_DEFAULT = 1.0
EFPR_MAX_DEFAULT = 100.0

__all__ = ["OperatingPoint", "RocPoint", "intersection_counts", "build_psd_roc",
           "psds_score", "per_class_auc", "evaluate_psds1", "default_thresholds"]


@dataclass
class OperatingPoint:
    """Detections produced at one decision threshold."""

    threshold: float
    detections: dict[str, EventList] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass
class RocPoint:
    efpr: float
    tpr_per_class: np.ndarray

    def __post_init__(self):
        self.tpr_per_class = np.asarray(self.tpr_per_class, dtype=np.float64)
        if self.efpr < 0:
            raise ValueError("efpr must be >= 0")
        if np.any(self.tpr_per_class < 0) or np.any(self.tpr_per_class > 1):
            raise ValueError("tpr values must lie in [0, 1]")


def _overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    return max(0.0, min(a[1], b[1]) - max(a[0], b[0]))


def intersection_counts(dets: dict[str, EventList], gts: dict[str, EventList],
                        num_classes: int, dtc: float = DTC_DEFAULT,
                        gtc: float = GTC_DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Per-class (tp, fp) counts under the intersection criteria.

    tp[c] counts ground-truth events of class c covered by valid detections;
    fp[c] counts invalid detections of class c. Valid detections that do not
    complete any ground-truth event are neither.
    """
    for coll in (dets, gts):
        for ev in coll.values():
            ev.validate()

    tp = np.zeros(num_classes, dtype=np.int64)
    fp = np.zeros(num_classes, dtype=np.int64)
    clip_ids = set(dets) | set(gts)
    for clip_id in clip_ids:
        det_events = dets.get(clip_id, EventList(clip_id)).events
        gt_events = gts.get(clip_id, EventList(clip_id)).events
        for c in {e[0] for e in det_events} | {e[0] for e in gt_events}:
            d_spans = [(on, off) for cls, on, off in det_events if cls == c]
            g_spans = [(on, off) for cls, on, off in gt_events if cls == c]
            valid = []
            for span in d_spans:
                inter = sum(_overlap(span, g) for g in g_spans)
                if inter >= dtc * (span[1] - span[0]) - 1e-12:
                    valid.append(span)
                else:
                    fp[c] += 1
            for g in g_spans:
                inter = sum(_overlap(g, v) for v in valid)
                if inter >= gtc * (g[1] - g[0]) - 1e-12:
                    tp[c] += 1
    return tp, fp


def _gt_counts(gts: dict[str, EventList], num_classes: int) -> np.ndarray:
    counts = np.zeros(num_classes, dtype=np.int64)
    for ev in gts.values():
        for cls, _, _ in ev.events:
            counts[cls] += 1
    return counts


def build_psd_roc(points: list[OperatingPoint], gts: dict[str, EventList],
                  num_classes: int, total_audio_hours: float,
                  dtc: float = DTC_DEFAULT, gtc: float = GTC_DEFAULT) -> list[RocPoint]:
    """Monotone per-class TPR curves on the union eFPR grid.

    Classes without ground-truth events contribute TPR 0. Stepwise-constant
    (left-continuous) interpolation: the curve value at e is the running
    maximum over operating points with eFPR <= e.
    """
    if not points:
        raise ValueError("need at least one operating point")
    thresholds = [p.threshold for p in points]
    if len(set(thresholds)) != len(thresholds):
        raise ValueError("operating-point thresholds must be unique")
    if total_audio_hours <= 0:
        raise ValueError("total_audio_hours must be positive")

    gt_n = _gt_counts(gts, num_classes)
    raw = []
    for p in points:
        tp, fp = intersection_counts(p.detections, gts, num_classes, dtc, gtc)
        with np.errstate(invalid="ignore", divide="ignore"):
            tpr = np.where(gt_n > 0, tp / np.maximum(gt_n, 1), 0.0)
        raw.append((float(fp.sum()) / total_audio_hours, tpr))
    raw.sort(key=lambda r: r[0])

    grid = sorted({e for e, _ in raw})
    roc = []
    best = np.zeros(num_classes, dtype=np.float64)
    i = 0
    for e in grid:
        while i < len(raw) and raw[i][0] <= e:
            best = np.maximum(best, raw[i][1])
            i += 1
        roc.append(RocPoint(efpr=e, tpr_per_class=best.copy()))
    return roc


def _effective_tpr(tpr: np.ndarray, alpha_st: float) -> float:
    mean = float(tpr.mean())
    std = float(tpr.std())  # population std across classes
    return max(0.0, mean - alpha_st * std)


def _curve_nodes(roc: list[RocPoint], e_max: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """Integration nodes in [0, e_max] and the stepwise TPR vector at each."""
    if not roc:
        raise ValueError("empty ROC")
    nodes = [0.0]
    for p in roc:
        if 0.0 < p.efpr < e_max:
            nodes.append(p.efpr)
    nodes.append(e_max)
    nodes = np.unique(np.asarray(nodes, dtype=np.float64))

    num_classes = roc[0].tpr_per_class.shape[0]
    values = []
    for e in nodes:
        current = np.zeros(num_classes, dtype=np.float64)
        for p in roc:
            if p.efpr <= e + 1e-12:
                current = p.tpr_per_class
            else:
                break
        values.append(current)
    return nodes, values


def psds_score(roc: list[RocPoint], alpha_st: float = ALPHA_ST_DEFAULT,
               e_max: float = EFPR_MAX_DEFAULT) -> float:
    """Normalized area under the effective-TPR curve; always in [0, 1]."""
    nodes, values = _curve_nodes(roc, e_max)
    etpr = np.asarray([_effective_tpr(v, alpha_st) for v in values])
    return float(np.trapezoid(etpr, nodes) / e_max)


def per_class_auc(roc: list[RocPoint], e_max: float = EFPR_MAX_DEFAULT) -> np.ndarray:
    """Normalized area under each class's own TPR curve."""
    nodes, values = _curve_nodes(roc, e_max)
    mat = np.stack(values, axis=0)  # [nodes, C]
    return np.trapezoid(mat, nodes, axis=0) / e_max


def default_thresholds(n: int = 50) -> np.ndarray:
    """Uniform decision-threshold grid, 0.01 to 0.99 inclusive."""
    return np.linspace(0.01, 0.99, n)


def evaluate_psds1(probs_per_clip: dict[str, "np.ndarray"], gts: dict[str, EventList],
                   num_classes: int, thresholds=None, median_window: int = 9,
                   dtc: float = DTC_DEFAULT, gtc: float = GTC_DEFAULT,
                   alpha_st: float = ALPHA_ST_DEFAULT, e_max: float = EFPR_MAX_DEFAULT,
                   total_audio_hours: float | None = None,
                   return_roc: bool = False):
    """Median filter -> threshold sweep -> PSD-ROC -> PSDS1 score."""
    if thresholds is None:
        thresholds = default_thresholds()
    if total_audio_hours is None:
        clip_ids = set(probs_per_clip) | set(gts)
        total_audio_hours = len(clip_ids) * postprocess.CLIP_SECONDS / 3600.0

    filtered = {
        cid: postprocess.median_filter(p, median_window).data
        for cid, p in probs_per_clip.items()
    }
    points = []
    for thr in thresholds:
        dets = {
            cid: postprocess.decode_events(p, float(thr), clip_id=cid)
            for cid, p in filtered.items()
        }
        points.append(OperatingPoint(threshold=float(thr), detections=dets))
    roc = build_psd_roc(points, gts, num_classes, total_audio_hours, dtc, gtc)
    score = psds_score(roc, alpha_st, e_max)
    if return_roc:
        return score, roc
    return score
