"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Results go to the
declared output paths; progress goes to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import data
from ..ensemble import TeacherBank, ensemble_predict, filter_pseudo_labels
from ..model import load_checkpoint
from .ablate import ablate, table_csv
from .config import TrainConfig, load_config, parse_overrides
from .metrics import compute_metrics
from .synthetic import SyntheticSpec, generate_synthetic
from .train import Prepared, prepare, train, write_run

log = logging.getLogger("ensemble_ssl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    return p


def _resources(directory):
    """Per-language resources from ``DIR/<lang>/``; files directly in DIR apply to all."""
    if not directory:
        return {}
    root = _existing(directory)
    out = {"*": data.Resources.from_dir(root)}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        out[sub.name] = data.Resources.from_dir(sub)
    return out


def _config(args) -> TrainConfig:
    try:
        cfg = load_config(_existing(args.config)) if args.config else TrainConfig()
        cfg = parse_overrides(args.set or [], cfg)
    except ValueError as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _corpus_and_splits(args):
    corpus = data.load_corpus(_existing(args.corpus))
    pools = data.SplitPools.load(_existing(args.splits), corpus)
    return corpus, pools


def cmd_gen(args):
    spec = SyntheticSpec(n_examples=args.n, n_languages=args.langs, noise_rate=args.noise,
                         seed=args.seed if args.seed is not None else 0)
    data.save_corpus(generate_synthetic(spec), args.out)
    log.info("wrote %d examples to %s", args.n, args.out)


def cmd_preprocess(args):
    corpus = data.load_corpus(_existing(args.corpus))
    res = _resources(args.resources)
    empty = data.Resources()
    out = [data.Example(ex.id, data.preprocess(ex.text, res.get(ex.lang, res.get("*", empty))),
                        ex.label, ex.lang) for ex in corpus]
    data.save_corpus(out, args.out)
    n_empty = sum(not ex.text for ex in out)
    if n_empty:
        log.warning("%d examples are empty after preprocessing", n_empty)


def cmd_split(args):
    corpus = data.load_corpus(_existing(args.corpus))
    try:
        fractions = tuple(float(x) for x in args.fractions.split(","))
    except ValueError:
        raise UsageError(f"bad --fractions {args.fractions!r}") from None
    seed = args.seed if args.seed is not None else 0
    pools = data.stratified_split(corpus, fractions, seed, by_lang=args.by_lang)
    pools.save(args.out, corpus)
    log.info("labeled=%d unlabeled=%d test=%d", len(pools.labeled), len(pools.unlabeled),
             len(pools.test))


def cmd_train(args):
    cfg = _config(args)
    corpus, pools = _corpus_and_splits(args)
    result = train(cfg, corpus, pools, _resources(args.resources))
    write_run(result, cfg, corpus, args.out)
    log.info("final test %s", result.final("test") if pools.test else "n/a")


def _load_run(run_dir: Path, corpus, pools):
    cfg = load_config(_existing(run_dir / "config.txt"))
    vocab = data.Vocabulary.load(_existing(run_dir / "vocab.txt"))
    prep = prepare(cfg, corpus, pools, vocab=vocab)
    return cfg, prep


def cmd_eval(args):
    run = _existing(args.run)
    corpus, pools = _corpus_and_splits(args)
    _, prep = _load_run(run, corpus, pools)
    student = load_checkpoint((run / "student.ckpt").read_bytes())
    rows = {"labeled": pools.labeled, "unlabeled": pools.unlabeled, "test": pools.test}[args.split]
    preds = student.predict_logits(prep.batch(rows)).argmax(axis=1)
    m = compute_metrics(preds, prep.labels[rows], split=args.split)
    text = json.dumps({"split": m.split, "acc": m.accuracy, "precision": m.precision,
                       "recall": m.recall, "f1": m.f1}, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def cmd_ablate(args):
    cfg = _config(args)
    corpus, pools = _corpus_and_splits(args)
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = ablate(cfg, lambda s: (corpus, pools), seeds,
                  progress=lambda r: log.info("%s seed=%s f1=%.4f", r["variant"], r["seed"], r["f1"]))
    Path(args.out).write_text(table_csv(rows), encoding="utf-8")


def cmd_pseudo_dump(args):
    run = _existing(args.run)
    corpus, pools = _corpus_and_splits(args)
    cfg, prep = _load_run(run, corpus, pools)
    teachers = [load_checkpoint(p.read_bytes()) for p in sorted(run.glob("teacher_*.ckpt"))]
    if not teachers:
        raise UsageError(f"no teacher checkpoints in {run}")
    bank = TeacherBank(teachers, cfg.ema_decay)
    cand = [i for i in pools.unlabeled if not prep.degenerate[i]]
    tau = args.tau if args.tau is not None else cfg.tau0
    verdicts = ensemble_predict(bank, prep.batch(cand), example_ids=cand) if cand else []
    kept = filter_pseudo_labels(verdicts, tau, cfg.max_uncertainty)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for pl in kept:
            fh.write(json.dumps({"id": corpus[pl.example_id].id, "label": pl.label,
                                 "confidence": pl.confidence, "uncertainty": pl.uncertainty,
                                 "weight": pl.weight, "epoch": pl.epoch_assigned}) + "\n")
    log.info("dumped %d of %d candidates at tau=%.3f", len(kept), len(cand), tau)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ensemble-ssl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=False, run=False):
        sp.add_argument("--corpus", required=True)
        sp.add_argument("--splits", required=True)
        if config:
            sp.add_argument("--config")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE")
            sp.add_argument("--seed", type=int)
        if run:
            sp.add_argument("--run", required=True, help="directory written by `train`")

    sp = sub.add_parser("gen", help="generate a synthetic corpus")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--langs", type=int, default=4)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("preprocess", help="normalize corpus text")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--resources", help="directory of stopwords.txt/emoji.tsv/dialect.tsv")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("split", help="stratified labeled/unlabeled/test split")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--fractions", default="0.2,0.6,0.2")
    sp.add_argument("--by-lang", action="store_true")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("train", help="run the full framework")
    common(sp, config=True)
    sp.add_argument("--resources")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a trained student")
    common(sp, run=True)
    sp.add_argument("--split", choices=("labeled", "unlabeled", "test"), default="test")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", help="full model vs. single-switch ablations")
    common(sp, config=True)
    sp.add_argument("--seeds", default="0,1,2,3,4")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("pseudo-dump", help="write ensemble pseudo-labels for the unlabeled pool")
    common(sp, run=True)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_pseudo_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"{parser.format_usage()}{exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
