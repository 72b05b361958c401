"""Full model versus the four single-switch ablations over shared seeds."""
from __future__ import annotations

import csv
import io
from typing import Callable, Sequence

import numpy as np

from .config import TrainConfig
from .train import train

VARIANTS = ("full", "no_augment", "no_ipl", "no_uncertainty", "no_ensemble")
TABLE_COLUMNS = ["variant", "seed", "acc", "precision", "recall", "f1"]


def variant_config(cfg: TrainConfig, variant: str, seed: int) -> TrainConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    switches = {v: False for v in VARIANTS[1:]}
    if variant != "full":
        switches[variant] = True
    return cfg.replace(seed=seed, **switches)


def ablate(cfg: TrainConfig, data_for_seed: Callable[[int], tuple], seeds: Sequence[int],
           variants: Sequence[str] = VARIANTS, progress=None) -> list[dict]:
    """Run every variant on every seed; one row per (variant, seed) plus a mean row per variant.

    ``data_for_seed(seed)`` returns ``(corpus, pools)``; a fixed corpus just
    ignores the seed.
    """
    rows = []
    data = {s: data_for_seed(s) for s in seeds}
    for variant in variants:
        per_seed = []
        for s in seeds:
            corpus, pools = data[s]
            res = train(variant_config(cfg, variant, s), corpus, pools)
            m = res.final("test")
            rec = {"variant": variant, "seed": s,
                   **{k: float(m[k]) for k in ("acc", "precision", "recall", "f1")}}
            per_seed.append(rec)
            if progress:
                progress(rec)
        rows += per_seed
        rows.append({"variant": variant, "seed": "mean",
                     **{k: float(np.mean([r[k] for r in per_seed]))
                        for k in ("acc", "precision", "recall", "f1")}})
    return rows


def mean_f1(rows: list[dict]) -> dict[str, float]:
    return {r["variant"]: r["f1"] for r in rows if r["seed"] == "mean"}


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{r[k]:.4f}" if isinstance(r[k], float) else r[k]) for k in TABLE_COLUMNS})
    return buf.getvalue()
