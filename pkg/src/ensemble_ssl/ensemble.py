"""Three-teacher ensemble: warmup, soft voting, pseudo-label filtering, EMA."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .model import ModelConfig, TextClassifier, fit_supervised, init_model, softmax
from .objective import UncertaintyReport, uncertainty_from_logits

DEFAULT_SEEDS = (42, 43, 44)
DEFAULT_DROPOUTS = (0.1, 0.2, 0.3)


@dataclass
class TeacherBank:
    teachers: list[TextClassifier]
    ema_decay: float = 0.99

    def __post_init__(self):
        if not self.teachers:
            raise ValueError("a teacher bank needs at least one teacher")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ValueError(f"ema_decay must be in [0, 1], got {self.ema_decay}")
        sizes = {t.params.size for t in self.teachers}
        if len(sizes) != 1:
            raise ValueError("all teachers must share one parameter layout")

    def __len__(self):
        return len(self.teachers)

    def logits(self, ids: np.ndarray) -> np.ndarray:
        """Eval-mode logits, shape ``(T, n, C)``."""
        return np.stack([t.predict_logits(ids) for t in self.teachers])


@dataclass
class EnsembleVerdict:
    example_id: object
    mean_logits: np.ndarray
    mean_probs: np.ndarray
    predicted_label: int
    confidence: float
    report: UncertaintyReport


@dataclass(frozen=True)
class PseudoLabel:
    example_id: object
    label: int
    confidence: float
    weight: float
    epoch_assigned: int = 0
    uncertainty: float = 0.0


def init_teachers(base_config: ModelConfig, labeled_ids: np.ndarray, labels: np.ndarray,
                  seeds: Sequence[int] = DEFAULT_SEEDS,
                  dropouts: Sequence[float] = DEFAULT_DROPOUTS, warmup_epochs: int = 5,
                  lr: float = 0.05, batch_size: int = 32, ema_decay: float = 0.99) -> TeacherBank:
    """Build one teacher per (seed, dropout) and warm each on the labeled pool."""
    if len(seeds) != len(dropouts):
        raise ValueError(f"{len(seeds)} seeds but {len(dropouts)} dropout rates")
    if len(labels) == 0:
        raise ValueError("teachers need a non-empty labeled pool")
    teachers = []
    for seed, rate in zip(seeds, dropouts):
        t = init_model(replace(base_config, seed=int(seed), dropout_rate=float(rate)))
        fit_supervised(t, labeled_ids, labels, warmup_epochs, lr, batch_size,
                       np.random.default_rng([int(seed), 1]))
        teachers.append(t)
    return TeacherBank(teachers, ema_decay)


def ensemble_scores(bank: TeacherBank, ids: np.ndarray):
    """Columnar soft vote: ``(teacher_logits, mean_logits, mean_probs, report)``."""
    z = bank.logits(ids)
    mean_logits = z.mean(axis=0)
    mean_probs = softmax(z).mean(axis=0)
    report = uncertainty_from_logits(list(z), n_teachers=None)
    return z, mean_logits, mean_probs, report


def ensemble_predict(bank: TeacherBank, batch, example_ids=None) -> list[EnsembleVerdict]:
    if isinstance(batch, np.ndarray) and batch.ndim == 1:
        batch = batch[None, :]
    ids = bank.teachers[0]._ids(batch)
    _, mean_logits, mean_probs, report = ensemble_scores(bank, ids)
    if example_ids is None:
        example_ids = range(len(ids))
    labels = mean_probs.argmax(axis=1)
    out = []
    for row, ex_id in enumerate(example_ids):
        rep = UncertaintyReport(report.variance_per_class[row], float(report.uncertainty[row]),
                                float(report.weight[row]))
        out.append(EnsembleVerdict(ex_id, mean_logits[row], mean_probs[row], int(labels[row]),
                                   float(mean_probs[row, labels[row]]), rep))
    return out


def filter_pseudo_labels(verdicts: Sequence[EnsembleVerdict], tau: float,
                         max_uncertainty: float = 1.0, epoch: int = 0) -> list[PseudoLabel]:
    """Keep verdicts with ``confidence >= tau`` and ``uncertainty <= max_uncertainty``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if max_uncertainty <= 0:
        raise ValueError("max_uncertainty must be > 0")
    return [
        PseudoLabel(v.example_id, v.predicted_label, v.confidence, float(v.report.weight),
                    epoch, float(v.report.uncertainty))
        for v in verdicts
        if v.confidence >= tau and v.report.uncertainty <= max_uncertainty
    ]


def ema_update(bank: TeacherBank, student_params: np.ndarray) -> TeacherBank:
    """``theta_t <- d * theta_t + (1 - d) * theta_s`` for every teacher, in place."""
    d = bank.ema_decay
    for t in bank.teachers:
        if t.params.shape != student_params.shape:
            raise ValueError("student/teacher parameter layouts differ")
        t.params *= d
        t.params += (1.0 - d) * student_params
    return bank
