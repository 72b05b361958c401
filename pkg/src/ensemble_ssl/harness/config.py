"""Training configuration and the ``key = value`` config-file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from ..augment import OPS, AugmentPolicy
from ..ipl import ThresholdSchedule
from ..objective import LossWeights


@dataclass
class TrainConfig:
    # loss composition
    alpha_sup: float = 1.0
    beta_cons: float = 1.0
    # teachers
    ema_decay: float = 0.99
    teacher_seeds: tuple = (42, 43, 44)
    teacher_dropouts: tuple = (0.1, 0.2, 0.3)
    max_uncertainty: float = 1.0
    # incremental pseudo-labeling
    tau0: float = 0.92
    tau_min: float = 0.80
    tau_decay: float = 0.01
    accuracy_gate: float = 0.70
    cap_fraction: float = 0.5
    recheck_period: int = 5
    demote_margin: float = 0.05
    # augmentation
    aug_ops: tuple = ("swap", "insert", "delete", "substitute")
    n_swaps: int = 1
    n_inserts: int = 1
    delete_rate: float = 0.1
    substitute_rate: float = 0.1
    synonyms_path: str = ""
    translator_path: str = ""
    # student / optimization
    student_dropout: float = 0.1
    embed_dim: int = 32
    hidden_dim: int = 32
    hidden_layer: bool = False
    lr: float = 0.5
    epochs: int = 30
    warmup_epochs: int = 10
    batch_size: int = 8
    max_len: int = 64
    min_freq: int = 1
    seed: int = 0
    # ablation switches
    no_augment: bool = False
    no_ipl: bool = False
    no_uncertainty: bool = False
    no_ensemble: bool = False

    def __post_init__(self):
        self.teacher_seeds = tuple(int(s) for s in self.teacher_seeds)
        self.teacher_dropouts = tuple(float(d) for d in self.teacher_dropouts)
        self.aug_ops = tuple(self.aug_ops)
        if len(self.teacher_seeds) != len(self.teacher_dropouts):
            raise ValueError("teacher_seeds and teacher_dropouts must have equal length")
        if self.epochs < 0 or self.warmup_epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs/warmup_epochs must be >= 0 and batch_size >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.cap_fraction:
            raise ValueError("cap_fraction must be >= 0")
        # validate component invariants eagerly
        self.schedule(), self.loss_weights(), self.augment_policy()

    def schedule(self) -> ThresholdSchedule:
        return ThresholdSchedule(self.tau0, self.tau_min, self.tau_decay, self.accuracy_gate)

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.alpha_sup, self.beta_cons)

    def augment_policy(self) -> AugmentPolicy:
        ops = frozenset() if self.no_augment else frozenset(self.aug_ops)
        return AugmentPolicy(ops, self.n_swaps, self.n_inserts, self.delete_rate,
                             self.substitute_rate, self.seed)

    def teachers(self) -> tuple[tuple, tuple]:
        if self.no_ensemble:
            return self.teacher_seeds[:1], self.teacher_dropouts[:1]
        return self.teacher_seeds, self.teacher_dropouts

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    # -- text format -----------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(TrainConfig)}
_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(key: str, raw: str):
    default = _FIELDS[key].default
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() not in _BOOL:
            raise ValueError(f"{key}: expected a boolean, got {raw!r}")
        return _BOOL[raw.lower()]
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if key == "teacher_seeds":
            return tuple(int(x) for x in items)
        if key == "teacher_dropouts":
            return tuple(float(x) for x in items)
        if key == "aug_ops":
            bad = set(items) - set(OPS)
            if bad:
                raise ValueError(f"aug_ops: unknown ops {sorted(bad)}")
        return tuple(items)
    return raw


def parse_overrides(pairs, base: TrainConfig | None = None) -> TrainConfig:
    """Apply ``key=value`` strings on top of ``base``; unknown keys raise."""
    changes = {}
    for item in pairs:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, raw)
    return dataclasses.replace(base or TrainConfig(), **changes)


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        pairs.append(line)
    return parse_overrides(pairs, base)


def load_config(path, overrides=()) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = parse_config_text(fh.read())
    return parse_overrides(overrides, cfg)
