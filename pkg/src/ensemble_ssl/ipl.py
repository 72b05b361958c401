"""Incremental pseudo-labeling: threshold schedule, promotion, demotion.

Example ids in a :class:`PoolState` are row indices into the corpus-wide
padded token matrix, so re-scoring can slice it directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ensemble import PseudoLabel, TeacherBank, ensemble_scores


@dataclass(frozen=True)
class ThresholdSchedule:
    tau0: float = 0.92
    tau_min: float = 0.80
    decay_per_epoch: float = 0.01
    accuracy_gate: float = 0.70

    def __post_init__(self):
        if not 0.0 < self.tau_min <= self.tau0 <= 1.0:
            raise ValueError(f"need 0 < tau_min <= tau0 <= 1, got {self.tau_min}, {self.tau0}")
        if self.decay_per_epoch < 0:
            raise ValueError("decay_per_epoch must be >= 0")


def current_tau(schedule: ThresholdSchedule, epoch: int, train_accuracy: float) -> float:
    """Linear decay from ``tau0`` to ``tau_min``, held at ``tau0`` while the
    student's labeled-set accuracy is below the gate."""
    if train_accuracy < schedule.accuracy_gate:
        return schedule.tau0
    return max(schedule.tau_min, schedule.tau0 - schedule.decay_per_epoch * epoch)


@dataclass
class PoolState:
    human_labeled: list
    unlabeled_remaining: set
    pseudo_labeled: dict = field(default_factory=dict)  # id -> PseudoLabel
    cap_fraction: float = 0.5
    epoch: int = 0

    def __post_init__(self):
        self.human_labeled = sorted(self.human_labeled)
        self.unlabeled_remaining = set(self.unlabeled_remaining)
        if set(self.human_labeled) & self.unlabeled_remaining:
            raise ValueError("human-labeled and unlabeled pools overlap")

    @property
    def cap(self) -> int:
        return math.floor(self.cap_fraction * len(self.human_labeled))

    def sizes(self) -> tuple[int, int, int]:
        return len(self.human_labeled), len(self.pseudo_labeled), len(self.unlabeled_remaining)

    def check(self) -> None:
        """Raise if disjointness or the cap is violated."""
        h, p, u = set(self.human_labeled), set(self.pseudo_labeled), self.unlabeled_remaining
        if h & p or h & u or p & u:
            raise AssertionError("pools overlap")
        if len(p) > self.cap:
            raise AssertionError(f"{len(p)} pseudo-labels exceed cap {self.cap}")


@dataclass
class PromotionReport:
    admitted: list
    deferred: list
    sizes: tuple[int, int, int]


@dataclass
class DemotionReport:
    demoted: list
    rechecked: int
    skipped: bool = False


def promote(state: PoolState, accepted: list[PseudoLabel]):
    """Move accepted pseudo-labels into the ledger, best first, up to the cap.

    Returns ``(state, report)``; ``state`` is updated in place.
    """
    ids = [pl.example_id for pl in accepted]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate example id in accepted pseudo-labels")
    missing = [i for i in ids if i not in state.unlabeled_remaining]
    if missing:
        raise ValueError(f"ids not in the unlabeled pool: {missing[:5]}")
    ranked = sorted(accepted, key=lambda pl: (-pl.confidence, pl.example_id))
    headroom = max(0, state.cap - len(state.pseudo_labeled))
    admitted, deferred = ranked[:headroom], ranked[headroom:]
    for pl in admitted:
        state.unlabeled_remaining.discard(pl.example_id)
        state.pseudo_labeled[pl.example_id] = pl
    report = PromotionReport([pl.example_id for pl in admitted],
                             [pl.example_id for pl in deferred], state.sizes())
    return state, report


def recheck(state: PoolState, bank: TeacherBank, token_ids: np.ndarray, tau: float,
            demote_margin: float = 0.05, period: int = 5):
    """Re-score the ledger and send weak or flipped pseudo-labels back.

    Only runs when ``state.epoch`` is a multiple of ``period``. A pseudo-label
    is demoted when the ensemble's probability for its stored label drops
    below ``tau - demote_margin`` or the ensemble now predicts another class.
    """
    if period <= 0 or state.epoch % period != 0 or not state.pseudo_labeled:
        return state, DemotionReport([], 0, skipped=True)
    keys = sorted(state.pseudo_labeled)
    _, _, mean_probs, _ = ensemble_scores(bank, token_ids[keys])
    predicted = mean_probs.argmax(axis=1)
    demoted = []
    for row, key in enumerate(keys):
        stored = state.pseudo_labeled[key].label
        if mean_probs[row, stored] < tau - demote_margin or predicted[row] != stored:
            demoted.append(key)
    for key in demoted:
        del state.pseudo_labeled[key]
        state.unlabeled_remaining.add(key)
    return state, DemotionReport(demoted, len(keys))


def training_view(state: PoolState, human_labels, seed: int, epoch: int,
                  uniform_weights: bool = False):
    """Shuffled ``(ids, labels, sample_weights)`` for the supervised term.

    Human-labeled examples carry weight 1 and their true label; pseudo-labeled
    ones carry the stored label and uncertainty weight (or 1 with
    ``uniform_weights``). ``human_labels`` maps example id to label.
    """
    keys = list(state.human_labeled) + sorted(state.pseudo_labeled)
    labels = [human_labels[k] for k in state.human_labeled]
    weights = [1.0] * len(labels)
    for k in sorted(state.pseudo_labeled):
        pl = state.pseudo_labeled[k]
        labels.append(pl.label)
        weights.append(1.0 if uniform_weights else pl.weight)
    order = np.random.default_rng([seed, 2, epoch]).permutation(len(keys))
    ids = np.asarray(keys, dtype=np.int64)[order]
    return ids, np.asarray(labels, dtype=np.int64)[order], np.asarray(weights)[order]
