"""Losses and teacher-disagreement uncertainty.

Every function accepts a single example (1-D arrays, scalar class) or a
batch (leading axis = examples) and returns per-example values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    alpha_sup: float = 1.0
    beta_cons: float = 1.0

    def __post_init__(self):
        for name in ("alpha_sup", "beta_cons"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class UncertaintyReport:
    variance_per_class: np.ndarray
    uncertainty: np.ndarray | float
    weight: np.ndarray | float


def cross_entropy(probs, true_class):
    """Return ``(loss, grad_wrt_logits)``; grad is ``probs - onehot``."""
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    p = np.atleast_2d(probs)
    y = np.atleast_1d(np.asarray(true_class))
    n_classes = p.shape[1]
    if y.shape[0] != p.shape[0] or not np.issubdtype(y.dtype, np.integer) \
            or (y < 0).any() or (y >= n_classes).any():
        raise ValueError(f"invalid class index {true_class!r} for {n_classes} classes")
    rows = np.arange(p.shape[0])
    loss = -np.log(np.maximum(p[rows, y], PROB_FLOOR))
    grad = p.copy()
    grad[rows, y] -= 1.0
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


def consistency_mse(student_logits, ensemble_mean_logits):
    """Squared L2 distance to the (constant) ensemble mean; grad ``2(s - m)``."""
    s = np.asarray(student_logits, dtype=np.float64)
    m = np.asarray(ensemble_mean_logits, dtype=np.float64)
    if s.shape != m.shape:
        raise ValueError(f"logit shapes differ: {s.shape} vs {m.shape}")
    diff = s - m
    loss = np.sum(diff * diff, axis=-1)
    grad = 2.0 * diff
    if s.ndim == 1:
        return float(loss), grad
    return loss, grad


def uncertainty_from_logits(teacher_logits, n_teachers: int | None = 3) -> UncertaintyReport:
    """Population variance of teacher logits per class, its class mean, and
    the weight ``1 / (1 + uncertainty)``.

    ``teacher_logits`` is a sequence of per-teacher arrays, shape ``(C,)`` or
    ``(n, C)``. Pass ``n_teachers=None`` to accept any count.
    """
    z = np.stack([np.asarray(t, dtype=np.float64) for t in teacher_logits])
    if n_teachers is not None and z.shape[0] != n_teachers:
        raise ValueError(f"expected {n_teachers} teachers, got {z.shape[0]}")
    variance = np.var(z, axis=0)  # ddof=0: divisor is the teacher count
    uncertainty = variance.mean(axis=-1)
    weight = 1.0 / (1.0 + uncertainty)
    if z.ndim == 2:
        return UncertaintyReport(variance, float(uncertainty), float(weight))
    return UncertaintyReport(variance, uncertainty, weight)


def total_loss(sup, cons, weight, lw: LossWeights = LossWeights()):
    """``alpha * sup + beta * weight * cons``."""
    return lw.alpha_sup * sup + lw.beta_cons * weight * cons


def batch_objective(sup_probs, sup_labels, sup_weights, student_cons_logits,
                    teacher_mean_logits, cons_weights, lw: LossWeights = LossWeights()):
    """Batch-averaged total loss and its gradients w.r.t. both sets of logits.

    The supervised term is the sample-weighted mean CE over the supervised
    batch; the consistency term is the mean of per-example
    ``weight * ||s - m||^2`` over the consistency batch. Either batch may be
    empty.

    Returns ``(loss, sup_term, cons_term, d_sup_logits, d_cons_logits)``.
    """
    sup_term = 0.0
    d_sup = np.zeros((0, 0))
    if len(sup_labels):
        ce, g = cross_entropy(np.atleast_2d(sup_probs), np.asarray(sup_labels))
        w = np.asarray(sup_weights, dtype=np.float64)
        n = len(sup_labels)
        sup_term = float(np.sum(w * ce) / n)
        d_sup = lw.alpha_sup * (w[:, None] * g / n)
    cons_term = 0.0
    d_cons = np.zeros((0, 0))
    if len(student_cons_logits):
        mse, g = consistency_mse(np.atleast_2d(student_cons_logits), np.atleast_2d(teacher_mean_logits))
        w = np.asarray(cons_weights, dtype=np.float64)
        n = len(mse)
        cons_term = float(np.sum(w * mse) / n)
        d_cons = lw.beta_cons * (w[:, None] * g / n)
    loss = lw.alpha_sup * sup_term + lw.beta_cons * cons_term
    return loss, sup_term, cons_term, d_sup, d_cons
