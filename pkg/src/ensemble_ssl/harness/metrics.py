"""Accuracy and macro precision/recall/F1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    accuracy: float
    precision: float
    recall: float
    f1: float


def compute_metrics(predictions, truths, num_classes: int = 2, epoch: int = -1,
                    split: str = "") -> EpochMetrics:
    """Macro P and R over classes (0/0 counts as 0); F1 is their harmonic mean."""
    pred = np.asarray(predictions)
    true = np.asarray(truths)
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction set")
    precisions, recalls = [], []
    for c in range(num_classes):
        tp = np.sum((pred == c) & (true == c))
        n_pred = np.sum(pred == c)
        n_true = np.sum(true == c)
        precisions.append(tp / n_pred if n_pred else 0.0)
        recalls.append(tp / n_true if n_true else 0.0)
    p = float(np.mean(precisions))
    r = float(np.mean(recalls))
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return EpochMetrics(epoch, split, float(np.mean(pred == true)), p, r, f1)
