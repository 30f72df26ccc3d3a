"""Training objectives as pure computations: distillation loss and mixup.

No optimizer or training loop lives here; the loss is a 0.9/0.1 weighted
sum of soft-target and hard-label binary cross-entropies over frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tensor import Tensor

PROB_CLAMP = 1e-7
MIXUP_BETA = 0.3

__all__ = ["KdBatch", "kd_loss", "mixup", "sample_mixup_lam"]


@dataclass
class KdBatch:
    """Student logits with teacher probabilities and hard labels."""

    student_logits: Tensor
    teacher_probs: Tensor
    hard_labels: Tensor
    lambda_kd: float = 0.9

    def __post_init__(self):
        s = np.asarray(self.student_logits)
        t = np.asarray(self.teacher_probs)
        h = np.asarray(self.hard_labels)
        if not (s.shape == t.shape == h.shape):
            raise ValueError(
                f"shape mismatch: logits {s.shape}, teacher {t.shape}, labels {h.shape}"
            )
        if np.any(np.isnan(s)) or np.any(np.isnan(t)) or np.any(np.isnan(h)):
            raise ValueError("NaN values in distillation batch")
        if t.min() < 0.0 or t.max() > 1.0:
            raise ValueError("teacher probabilities must lie in [0, 1]")
        if not np.all((h == 0.0) | (h == 1.0)):
            raise ValueError("hard labels must be 0 or 1")
        if not 0.0 <= self.lambda_kd <= 1.0:
            raise ValueError(f"lambda_kd must be in [0, 1], got {self.lambda_kd}")


def _bce(p: np.ndarray, target: np.ndarray) -> np.ndarray:
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(target * np.log(p) + (1.0 - target) * np.log1p(-p))


def kd_loss(batch: KdBatch) -> float:
    """lambda * BCE(student, teacher) + (1 - lambda) * BCE(student, labels),
    averaged over every element."""
    p = expit(np.asarray(batch.student_logits, dtype=np.float64))
    soft = _bce(p, np.asarray(batch.teacher_probs, dtype=np.float64))
    hard = _bce(p, np.asarray(batch.hard_labels, dtype=np.float64))
    lam = batch.lambda_kd
    return float((lam * soft + (1.0 - lam) * hard).mean())


def mixup(x1, x2, y1, y2, lam: float) -> tuple[Tensor, Tensor]:
    """Convex combination of an input pair and its targets."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must be in [0, 1], got {lam}")
    a1, a2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    t1, t2 = np.asarray(y1, dtype=np.float64), np.asarray(y2, dtype=np.float64)
    if a1.shape != a2.shape or t1.shape != t2.shape:
        raise ValueError("mixup inputs must have matching shapes")
    x = lam * a1 + (1.0 - lam) * a2
    y = lam * t1 + (1.0 - lam) * t2
    return Tensor(x.astype(np.float32)), Tensor(y.astype(np.float32))


def sample_mixup_lam(rng: np.random.Generator, alpha: float = MIXUP_BETA) -> float:
    """Draw the mixing coefficient from Beta(alpha, alpha)."""
    return float(rng.beta(alpha, alpha))
