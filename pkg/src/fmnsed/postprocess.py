"""Median filtering of frame probabilities and decoding into timed events.

Events are (class_index, onset_seconds, offset_seconds) at 40 ms frame
resolution. The interchange format is a DCASE-style TSV with header
`filename\tonset\toffset\tevent_label` and seconds printed to 3 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

FRAME_SECONDS = 0.04
CLIP_SECONDS = 10.0
TSV_HEADER = "filename\tonset\toffset\tevent_label"

__all__ = ["EventList", "median_filter", "decode_events", "paint_frames",
           "write_events_tsv", "read_events_tsv", "TSV_HEADER"]


@dataclass
class EventList:
    """Per-clip detections or ground truth; same-class events never overlap."""

    clip_id: str
    events: list[tuple[int, float, float]] = field(default_factory=list)

    def validate(self, clip_seconds: float = CLIP_SECONDS) -> "EventList":
        by_class: dict[int, list[tuple[float, float]]] = {}
        for cls, onset, offset in self.events:
            if not 0.0 <= onset < offset <= clip_seconds + 1e-9:
                raise ValueError(
                    f"clip {self.clip_id!r}: event ({cls}, {onset}, {offset}) "
                    f"violates 0 <= onset < offset <= {clip_seconds}"
                )
            by_class.setdefault(cls, []).append((onset, offset))
        for cls, spans in by_class.items():
            spans.sort()
            for (_, off_a), (on_b, _) in zip(spans, spans[1:]):
                if on_b < off_a - 1e-9:
                    raise ValueError(
                        f"clip {self.clip_id!r}: overlapping events of class {cls}"
                    )
        return self


def median_filter(probs, window: int) -> Tensor:
    """Per-class centered median over `window` frames.

    Windows shrink at clip edges (median over valid frames only); an even
    count of valid frames takes the lower median. Even window sizes are
    rejected.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 1, got {window}")
    pa = np.asarray(probs, dtype=np.float32)
    if pa.ndim != 2:
        raise ValueError(f"probs must be [T, C], got shape {pa.shape}")
    if window == 1:
        return Tensor(pa.copy())
    t_len = pa.shape[0]
    half = window // 2
    out = np.empty_like(pa)
    for t in range(t_len):
        lo = max(0, t - half)
        hi = min(t_len, t + half + 1)
        win = np.sort(pa[lo:hi], axis=0)
        out[t] = win[(hi - lo - 1) // 2]
    return Tensor(out)


def decode_events(probs, threshold, frame_seconds: float = FRAME_SECONDS,
                  clip_id: str = "") -> EventList:
    """Maximal runs of frames with prob >= threshold become events.

    threshold is a scalar or per-class vector in (0, 1); onset/offset are
    first_frame * dt and (last_frame + 1) * dt.
    """
    pa = np.asarray(probs, dtype=np.float32)
    thr = np.asarray(threshold, dtype=np.float32)
    if thr.ndim == 0:
        thr = np.full(pa.shape[1], float(thr), dtype=np.float32)
    if thr.shape != (pa.shape[1],):
        raise ValueError(f"threshold shape {thr.shape} does not match {pa.shape[1]} classes")
    if np.any(thr <= 0.0) or np.any(thr >= 1.0):
        raise ValueError("thresholds must lie strictly inside (0, 1)")

    active = pa >= thr[None, :]
    events: list[tuple[int, float, float]] = []
    for c in range(pa.shape[1]):
        col = active[:, c]
        if not col.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate(([False], col, [False]))))
        for start, stop in zip(edges[::2], edges[1::2]):
            events.append((c, start * frame_seconds, stop * frame_seconds))
    events.sort(key=lambda e: (e[1], e[2], e[0]))
    return EventList(clip_id=clip_id, events=events)


def paint_frames(ev: EventList, num_frames: int, num_classes: int,
                 frame_seconds: float = FRAME_SECONDS) -> Tensor:
    """Inverse of decode_events for frame-aligned events: a binary [T, C] grid."""
    grid = np.zeros((num_frames, num_classes), dtype=np.float32)
    for cls, onset, offset in ev.events:
        a = int(round(onset / frame_seconds))
        b = int(round(offset / frame_seconds))
        grid[a:b, cls] = 1.0
    return Tensor(grid)


def write_events_tsv(path, event_lists: dict[str, EventList], class_names) -> None:
    """Write all clips' events as one TSV, sorted by clip then onset."""
    names = list(class_names)
    lines = [TSV_HEADER]
    for clip_id in sorted(event_lists):
        for cls, onset, offset in event_lists[clip_id].events:
            lines.append(f"{clip_id}\t{onset:.3f}\t{offset:.3f}\t{names[cls]}")
    with open(path, "w", encoding="utf-8") as fp:
        fp.write("\n".join(lines) + "\n")


def read_events_tsv(path, label_to_index) -> dict[str, EventList]:
    """Parse an event TSV; unknown labels raise KeyError."""
    out: dict[str, EventList] = {}
    with open(path, "r", encoding="utf-8") as fp:
        header = fp.readline().rstrip("\n")
        if header.split("\t") != TSV_HEADER.split("\t"):
            raise ValueError(f"{path}: bad TSV header {header!r}")
        for lineno, line in enumerate(fp, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            clip_id, onset, offset, label = parts
            if callable(getattr(label_to_index, "get", None)):
                if label not in label_to_index:
                    raise KeyError(f"class label {label!r} is not in the class map")
                cls = label_to_index[label]
            else:
                cls = label_to_index(label)
            out.setdefault(clip_id, EventList(clip_id)).events.append(
                (cls, float(onset), float(offset))
            )
    for ev in out.values():
        ev.validate()
    return out
