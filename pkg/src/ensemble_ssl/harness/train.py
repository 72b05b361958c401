"""Epoch driver wiring teachers, pseudo-label pools, augmentation and the student.

Random streams are keyed, never shared, so switching a mechanism off cannot
shift the randomness another mechanism sees:

    [seed, 1]         student warmup (shuffle + dropout)
    [seed, 2, epoch]  supervised batch order (``training_view``)
    [seed, 3, epoch]  student dropout on supervised batches
    [seed, 4, epoch]  student dropout on consistency batches
    [seed, 5, epoch]  consistency example order
    (seed, id, epoch) per-example augmentation
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import augment as aug
from ..data import (Example, Resources, SplitPools, Vocabulary, build_vocab, pad_batch,
                    preprocess, tokenize)
from ..ensemble import TeacherBank, ema_update, ensemble_predict, filter_pseudo_labels, init_teachers
from ..ipl import PoolState, current_tau, promote, recheck, training_view
from ..model import ModelConfig, TextClassifier, fit_supervised, init_model, save_checkpoint
from ..objective import batch_objective, uncertainty_from_logits
from .config import TrainConfig
from .metrics import EpochMetrics, compute_metrics

log = logging.getLogger(__name__)

METRICS_COLUMNS = ["epoch", "split", "acc", "precision", "recall", "f1", "tau", "human",
                   "pseudo", "unlabeled", "mean_weight"]
POOL_COLUMNS = ["epoch", "tau", "human", "pseudo", "unlabeled", "promoted", "deferred", "demoted"]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Prepared:
    """Tokenized corpus: padded id matrix plus per-example bookkeeping."""

    vocab: Vocabulary
    ids: np.ndarray  # (N, max_len) int64, PAD-padded
    tokens: list[list[int]]
    degenerate: np.ndarray
    labels: np.ndarray  # ground truth; only labeled-pool rows are read during training

    def batch(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        width = max(1, max((len(self.tokens[r]) for r in rows), default=1))
        return self.ids[rows, :width]


def prepare(cfg: TrainConfig, corpus: Sequence[Example], pools: SplitPools,
            resources: dict | None = None, vocab: Vocabulary | None = None) -> Prepared:
    resources = resources or {}
    texts = [preprocess(ex.text, resources.get(ex.lang, resources.get("*", Resources())))
             for ex in corpus]
    if vocab is None:
        # test texts never shape the vocabulary
        vocab = build_vocab([texts[i] for i in pools.labeled + pools.unlabeled], cfg.min_freq)
    seqs = [tokenize(t, vocab, cfg.max_len) for t in texts]
    tokens = [s.tokens for s in seqs]
    ids = pad_batch(tokens, min_len=cfg.max_len)
    labels = np.array([-1 if ex.label is None else ex.label for ex in corpus], dtype=np.int64)
    return Prepared(vocab, ids, tokens, np.array([s.degenerate for s in seqs]), labels)


@dataclass
class TrainResult:
    student: TextClassifier
    bank: TeacherBank
    state: PoolState
    vocab: Vocabulary
    metrics: list[dict] = field(default_factory=list)
    pool_log: list[dict] = field(default_factory=list)

    def metrics_csv(self) -> str:
        return _csv(METRICS_COLUMNS, self.metrics)

    def pool_csv(self) -> str:
        return _csv(POOL_COLUMNS, self.pool_log)

    def final(self, split: str = "test") -> dict:
        return [m for m in self.metrics if m["split"] == split][-1]


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def evaluate(model: TextClassifier, prep: Prepared, rows, epoch: int, split: str) -> EpochMetrics:
    rows = list(rows)
    preds = model.predict_logits(prep.batch(rows)).argmax(axis=1)
    return compute_metrics(preds, prep.labels[rows], epoch=epoch, split=split)


def _metrics_row(m: EpochMetrics, tau, sizes, mean_weight) -> dict:
    return {"epoch": m.epoch, "split": m.split, "acc": _fmt(m.accuracy),
            "precision": _fmt(m.precision), "recall": _fmt(m.recall), "f1": _fmt(m.f1),
            "tau": _fmt(tau), "human": sizes[0], "pseudo": sizes[1], "unlabeled": sizes[2],
            "mean_weight": _fmt(mean_weight)}


def _student_config(cfg: TrainConfig, vocab_size: int) -> ModelConfig:
    return ModelConfig(vocab_size, cfg.embed_dim, cfg.hidden_dim, 2, cfg.student_dropout,
                       cfg.seed, cfg.hidden_layer)


def build_augmenter(cfg: TrainConfig, vocab: Vocabulary) -> aug.Augmenter:
    synonyms = {}
    if cfg.synonyms_path:
        for word, syns in aug.load_synonyms(cfg.synonyms_path).items():
            if word in vocab:
                ids = [vocab[s] for s in syns if s in vocab]
                if ids:
                    synonyms[vocab[word]] = ids
    translator = None
    if cfg.translator_path:
        translator = aug.DictionaryTranslator.from_tsv(cfg.translator_path).map_tokens(
            lambda w: vocab[w] if w in vocab else None)
    return aug.Augmenter(cfg.augment_policy(), synonyms, list(range(2, len(vocab))), translator)


def _check_finite(loss, student, epoch, step):
    if not math.isfinite(loss):
        norms = {name: float(np.linalg.norm(getattr(student, name))) for name in student.layout}
        raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {step}; parameter norms {norms}")


def train(cfg: TrainConfig, corpus: Sequence[Example], pools: SplitPools,
          resources: dict | None = None, prep: Prepared | None = None) -> TrainResult:
    """Warm teachers and student on the labeled pool, then run ``cfg.epochs``
    epochs of pseudo-labeling, consistency training and EMA tracking."""
    prep = prep or prepare(cfg, corpus, pools, resources)
    labeled = list(pools.labeled)
    if not labeled:
        raise ValueError("labeled pool is empty")
    human_labels = {i: int(prep.labels[i]) for i in labeled}
    y_lab = np.array([human_labels[i] for i in labeled])
    lw = cfg.loss_weights()
    schedule = cfg.schedule()
    augmenter = build_augmenter(cfg, prep.vocab)

    student = init_model(_student_config(cfg, len(prep.vocab)))
    fit_supervised(student, prep.batch(labeled), y_lab, cfg.warmup_epochs, cfg.lr,
                   cfg.batch_size, np.random.default_rng([cfg.seed, 1]))
    seeds, dropouts = cfg.teachers()
    bank = init_teachers(student.config, prep.batch(labeled), y_lab, seeds, dropouts,
                         cfg.warmup_epochs, cfg.lr, cfg.batch_size, cfg.ema_decay)
    state = PoolState(labeled, pools.unlabeled, cap_fraction=cfg.cap_fraction)
    result = TrainResult(student, bank, state, prep.vocab)
    train_acc = evaluate(student, prep, labeled, -1, "train").accuracy

    for epoch in range(cfg.epochs):
        state.epoch = epoch
        tau = current_tau(schedule, epoch, train_acc)
        promoted = deferred = demoted = 0
        if not cfg.no_ipl:
            cand = sorted(i for i in state.unlabeled_remaining if not prep.degenerate[i])
            if cand:
                verdicts = ensemble_predict(bank, prep.batch(cand), example_ids=cand)
                accepted = filter_pseudo_labels(verdicts, tau, cfg.max_uncertainty, epoch)
                _, rep = promote(state, accepted)
                promoted, deferred = len(rep.admitted), len(rep.deferred)
            _, dem = recheck(state, bank, prep.ids, tau, cfg.demote_margin, cfg.recheck_period)
            demoted = len(dem.demoted)

        view_ids, view_labels, view_w = training_view(state, human_labels, cfg.seed, epoch,
                                                      uniform_weights=cfg.no_uncertainty)
        cons_pool = sorted(i for i in state.unlabeled_remaining | set(state.pseudo_labeled)
                           if not prep.degenerate[i])
        cons_order = np.random.default_rng([cfg.seed, 5, epoch]).permutation(
            np.asarray(cons_pool, dtype=np.int64))
        n_steps = math.ceil(len(view_ids) / cfg.batch_size)
        cons_bs = math.ceil(len(cons_order) / n_steps) if n_steps else 0
        sup_rng = np.random.default_rng([cfg.seed, 3, epoch])
        cons_rng = np.random.default_rng([cfg.seed, 4, epoch])
        weight_sum, weight_n = 0.0, 0

        for step in range(n_steps):
            sl = slice(step * cfg.batch_size, (step + 1) * cfg.batch_size)
            rows = view_ids[sl]
            _, probs, sup_cache = student.forward(prep.batch(rows), train=True, rng=sup_rng)
            cons_rows = cons_order[step * cons_bs: (step + 1) * cons_bs]
            s_logits, t_mean, c_w, cons_cache = (), (), (), None
            if len(cons_rows):
                augmented = [augmenter(prep.tokens[r], aug.example_rng(cfg.seed, corpus[r].id, epoch))
                             for r in cons_rows]
                cons_ids = pad_batch(augmented)
                z = bank.logits(cons_ids)
                t_mean = z.mean(axis=0)
                if cfg.no_uncertainty:
                    c_w = np.ones(len(cons_rows))
                else:
                    c_w = uncertainty_from_logits(list(z), n_teachers=None).weight
                weight_sum += float(np.sum(c_w))
                weight_n += len(cons_rows)
                s_logits, _, cons_cache = student.forward(cons_ids, train=True, rng=cons_rng)
            loss, _, _, d_sup, d_cons = batch_objective(probs, view_labels[sl], view_w[sl],
                                                        s_logits, t_mean, c_w, lw)
            _check_finite(loss, student, epoch, step)
            grad = student.backward(sup_cache, d_sup)
            if cons_cache is not None:
                grad = grad + student.backward(cons_cache, d_cons)
            student.sgd_step(grad, cfg.lr)
            ema_update(bank, student.params)

        sizes = state.sizes()
        tau_logged = None if cfg.no_ipl else tau
        mean_w = weight_sum / weight_n if weight_n and lw.beta_cons > 0 else None
        m_train = evaluate(student, prep, labeled, epoch, "train")
        m_test = evaluate(student, prep, pools.test, epoch, "test") if pools.test else None
        train_acc = m_train.accuracy
        for m in (m_train, m_test):
            if m is not None:
                result.metrics.append(_metrics_row(m, tau_logged, sizes, mean_w))
        result.pool_log.append({"epoch": epoch, "tau": _fmt(tau_logged), "human": sizes[0],
                                "pseudo": sizes[1], "unlabeled": sizes[2], "promoted": promoted,
                                "deferred": deferred, "demoted": demoted})
        log.info("epoch %d tau=%s pseudo=%d test_f1=%s", epoch, tau_logged, sizes[1],
                 m_test.f1 if m_test else None)
    return result


def train_supervised(cfg: TrainConfig, corpus: Sequence[Example], pools: SplitPools,
                     resources: dict | None = None, prep: Prepared | None = None) -> TrainResult:
    """Labeled-pool-only student under the same stream contract as :func:`train`."""
    prep = prep or prepare(cfg, corpus, pools, resources)
    labeled = list(pools.labeled)
    y_all = prep.labels
    student = init_model(_student_config(cfg, len(prep.vocab)))
    fit_supervised(student, prep.batch(labeled), y_all[labeled], cfg.warmup_epochs, cfg.lr,
                   cfg.batch_size, np.random.default_rng([cfg.seed, 1]))
    lw = cfg.loss_weights()
    state = PoolState(labeled, pools.unlabeled, cap_fraction=cfg.cap_fraction)
    result = TrainResult(student, TeacherBank([student]), state, prep.vocab)
    sizes = state.sizes()
    for epoch in range(cfg.epochs):
        order = np.asarray(labeled, dtype=np.int64)[
            np.random.default_rng([cfg.seed, 2, epoch]).permutation(len(labeled))]
        rng = np.random.default_rng([cfg.seed, 3, epoch])
        for step in range(0, len(order), cfg.batch_size):
            rows = order[step: step + cfg.batch_size]
            _, probs, cache = student.forward(prep.batch(rows), train=True, rng=rng)
            loss, _, _, d_sup, _ = batch_objective(probs, y_all[rows], np.ones(len(rows)),
                                                   (), (), (), lw)
            _check_finite(loss, student, epoch, step // cfg.batch_size)
            student.sgd_step(student.backward(cache, d_sup), cfg.lr)
        m_train = evaluate(student, prep, labeled, epoch, "train")
        result.metrics.append(_metrics_row(m_train, None, sizes, None))
        if pools.test:
            result.metrics.append(_metrics_row(evaluate(student, prep, pools.test, epoch, "test"),
                                               None, sizes, None))
        result.pool_log.append({"epoch": epoch, "tau": "", "human": sizes[0], "pseudo": 0,
                                "unlabeled": sizes[2], "promoted": 0, "deferred": 0, "demoted": 0})
    return result


def pseudo_label_records(state: PoolState, corpus: Sequence[Example]) -> list[dict]:
    return [{"id": corpus[k].id, "label": pl.label, "confidence": pl.confidence,
             "uncertainty": pl.uncertainty, "weight": pl.weight, "epoch": pl.epoch_assigned}
            for k, pl in sorted(state.pseudo_labeled.items())]


def write_run(result: TrainResult, cfg: TrainConfig, corpus, out_dir) -> Path:
    """Write metrics.csv, pool_log.csv, checkpoints, vocabulary, config and pseudo-labels."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(result.metrics_csv(), encoding="utf-8")
    (out / "pool_log.csv").write_text(result.pool_csv(), encoding="utf-8")
    (out / "student.ckpt").write_bytes(save_checkpoint(result.student))
    for i, t in enumerate(result.bank.teachers):
        (out / f"teacher_{i}.ckpt").write_bytes(save_checkpoint(t))
    result.vocab.save(out / "vocab.txt")
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    with open(out / "pseudo_labels.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in pseudo_label_records(result.state, corpus):
            fh.write(json.dumps(rec) + "\n")
    return out
