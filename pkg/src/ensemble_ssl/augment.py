"""Token-level weak augmentation (swap, insert, delete, substitute, back-translate).

Operators take any token type (strings or vocabulary ids) and a
``random.Random``-like rng exposing ``randrange`` and ``random``.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Protocol, Sequence

log = logging.getLogger(__name__)

OPS = ("swap", "insert", "delete", "substitute", "backtranslate")


@dataclass
class AugmentPolicy:
    ops_enabled: frozenset = frozenset({"swap", "insert", "delete", "substitute"})
    n_swaps: int = 1
    n_inserts: int = 1
    delete_rate: float = 0.1
    substitute_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.ops_enabled = frozenset(self.ops_enabled)
        unknown = self.ops_enabled - set(OPS)
        if unknown:
            raise ValueError(f"unknown augmentation ops: {sorted(unknown)}")
        if self.n_swaps < 0 or self.n_inserts < 0:
            raise ValueError("op counts must be >= 0")
        for name in ("delete_rate", "substitute_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    @classmethod
    def disabled(cls) -> "AugmentPolicy":
        return cls(ops_enabled=frozenset())


def random_swap(tokens: Sequence, n_swaps: int, rng) -> list:
    out = list(tokens)
    n = len(out)
    if n < 2:
        return out
    for _ in range(n_swaps):
        i = rng.randrange(n)
        j = rng.randrange(n - 1)
        if j >= i:
            j += 1
        out[i], out[j] = out[j], out[i]
    return out


def random_delete(tokens: Sequence, rate: float, rng) -> list:
    """Drop each token with probability ``rate``; never returns empty for non-empty input."""
    tokens = list(tokens)
    if not tokens or rate <= 0.0:
        return tokens
    kept = [t for t in tokens if rng.random() >= rate]
    if not kept:
        kept = [tokens[rng.randrange(len(tokens))]]
    return kept


def random_insert(tokens: Sequence, n_inserts: int, rng, synonyms: dict | None = None,
                  vocabulary: Sequence = ()) -> list:
    """Insert ``n_inserts`` tokens at uniform positions.

    Each inserted token is a synonym of a uniformly chosen existing token, or
    a uniform vocabulary draw when that token has no synonyms.
    """
    out = list(tokens)
    synonyms = synonyms or {}
    for _ in range(n_inserts):
        new = None
        if out:
            options = synonyms.get(out[rng.randrange(len(out))])
            if options:
                new = options[rng.randrange(len(options))]
        if new is None:
            if not vocabulary:
                continue
            new = vocabulary[rng.randrange(len(vocabulary))]
        out.insert(rng.randrange(len(out) + 1), new)
    return out


def substitute(tokens: Sequence, rate: float, rng, synonyms: dict | None = None) -> list:
    """Replace each token that has synonyms with a random one, with probability ``rate``."""
    if not synonyms or rate <= 0.0:
        return list(tokens)
    out = []
    for t in tokens:
        options = synonyms.get(t)
        if options and rng.random() < rate:
            t = options[rng.randrange(len(options))]
        out.append(t)
    return out


class Translator(Protocol):
    deterministic: bool

    def translate(self, tokens: Sequence, source_lang: str, target_lang: str) -> list: ...


class IdentityTranslator:
    deterministic = True

    def translate(self, tokens, source_lang, target_lang):
        return list(tokens)


class DictionaryTranslator:
    """Bidirectional word-pair stub.

    Translating into ``pivot`` applies the pairs left to right; translating
    out of ``pivot`` applies them right to left. Unmapped tokens pass through.
    """

    deterministic = True

    def __init__(self, pairs: dict, pivot: str = "pivot"):
        self.forward = dict(pairs)
        self.reverse = {v: k for k, v in pairs.items()}
        self.pivot = pivot

    @classmethod
    def from_tsv(cls, path, pivot: str = "pivot") -> "DictionaryTranslator":
        pairs = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    a, b = line.rstrip("\n").split("\t", 1)
                    pairs[a] = b
        return cls(pairs, pivot)

    def map_tokens(self, fn) -> "DictionaryTranslator":
        """Same stub over transformed tokens (e.g. vocabulary ids); pairs mapping to None drop."""
        pairs = {}
        for a, b in self.forward.items():
            fa, fb = fn(a), fn(b)
            if fa is not None and fb is not None:
                pairs[fa] = fb
        return DictionaryTranslator(pairs, self.pivot)

    def translate(self, tokens, source_lang, target_lang):
        if target_lang == self.pivot:
            table = self.forward
        elif source_lang == self.pivot:
            table = self.reverse
        else:
            return list(tokens)
        return [table.get(t, t) for t in tokens]


@dataclass
class BacktranslationStats:
    failures: int = 0


_stats = BacktranslationStats()


def backtranslate(tokens: Sequence, lang: str, pivot: str, translator: Translator,
                  stats: BacktranslationStats | None = None) -> list:
    """Round-trip through ``pivot``; on translator failure the input passes through."""
    stats = stats or _stats
    try:
        there = translator.translate(list(tokens), lang, pivot)
        return list(translator.translate(there, pivot, lang))
    except Exception as exc:  # any backend failure skips the augmentation
        stats.failures += 1
        log.debug("back-translation skipped: %s", exc)
        return list(tokens)


@dataclass
class Augmenter:
    """Resources a policy draws from: synonym lexicon, vocabulary, translator."""

    policy: AugmentPolicy = field(default_factory=AugmentPolicy)
    synonyms: dict = field(default_factory=dict)
    vocabulary: Sequence = ()
    translator: Translator | None = None
    lang: str = "und"
    pivot: str = "pivot"
    stats: BacktranslationStats = field(default_factory=BacktranslationStats)

    def __call__(self, tokens, rng):
        return weak_augment(tokens, self.policy, rng, self)


def weak_augment(tokens: Sequence, policy: AugmentPolicy, rng, resources: Augmenter | None = None) -> list:
    """Apply enabled ops in the fixed order swap, insert, delete, substitute, backtranslate."""
    res = resources or Augmenter(policy)
    ops = policy.ops_enabled
    out = list(tokens)
    if "swap" in ops:
        out = random_swap(out, policy.n_swaps, rng)
    if "insert" in ops:
        out = random_insert(out, policy.n_inserts, rng, res.synonyms, res.vocabulary)
    if "delete" in ops:
        out = random_delete(out, policy.delete_rate, rng)
    if "substitute" in ops:
        out = substitute(out, policy.substitute_rate, rng, res.synonyms)
    if "backtranslate" in ops and res.translator is not None:
        out = backtranslate(out, res.lang, res.pivot, res.translator, res.stats)
    return out


def example_rng(seed: int, example_id, epoch: int) -> random.Random:
    """Per-example stream keyed on (run seed, example id, epoch); order-independent."""
    return random.Random(f"{seed}:{example_id}:{epoch}")


def load_synonyms(path) -> dict[str, list[str]]:
    """``token<TAB>syn1,syn2,...`` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tok, syns = line.rstrip("\n").split("\t", 1)
                out[tok] = [s for s in syns.split(",") if s]
    return out
