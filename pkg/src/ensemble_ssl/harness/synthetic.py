"""Desk-scale multilingual corpus with disjoint per-language vocabularies.

Each language owns a vocabulary split into class-0 signal words, class-1
signal words and neutral filler. An example draws ``signal_tokens`` signal
words from its class (Zipf-weighted, so many words are rare), each swapped
for an opposite-class word with probability ``noise_rate``, plus
``filler_tokens`` filler words, in random order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Example

LANG_CODES = ("ar", "bn", "en", "es", "fr", "de", "hi", "ur")


@dataclass(frozen=True)
class SyntheticSpec:
    n_examples: int = 2000
    n_languages: int = 4
    signal_tokens: int = 10
    signal_vocab: int = 1500
    filler_vocab: int = 30
    filler_tokens: int = 3
    noise_rate: float = 0.1
    zipf: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_examples < 1 or self.n_languages < 1:
            raise ValueError("need at least one example and one language")
        if self.signal_tokens < 1 or self.signal_vocab < 1:
            raise ValueError("signal_tokens and signal_vocab must be >= 1")
        if not 0.0 <= self.noise_rate < 0.5:
            raise ValueError("noise_rate must be in [0, 0.5)")


def _lang_code(k: int) -> str:
    return LANG_CODES[k] if k < len(LANG_CODES) else f"l{k}"


def language_vocab(spec: SyntheticSpec, k: int, rng) -> tuple[list, list, list]:
    """``(class0_words, class1_words, filler_words)`` for language ``k``."""
    code = _lang_code(k)
    n = 2 * spec.signal_vocab + spec.filler_vocab
    words = [f"{code}{i:04d}" for i in rng.permutation(n)]
    s = spec.signal_vocab
    return words[:s], words[s: 2 * s], words[2 * s:]


def generate_synthetic(spec: SyntheticSpec) -> list[Example]:
    rng = np.random.default_rng(spec.seed)
    vocabs = [language_vocab(spec, k, rng) for k in range(spec.n_languages)]
    ranks = np.arange(1, spec.signal_vocab + 1, dtype=np.float64)
    zipf_p = ranks ** -spec.zipf
    zipf_p /= zipf_p.sum()
    out = []
    for i in range(spec.n_examples):
        k = i % spec.n_languages  # round-robin languages
        label = int(rng.integers(2))
        signal = vocabs[k][:2]
        picks = rng.choice(spec.signal_vocab, size=spec.signal_tokens, p=zipf_p)
        flips = rng.random(spec.signal_tokens) < spec.noise_rate
        words = [signal[label ^ int(f)][j] for j, f in zip(picks, flips)]
        if spec.filler_tokens and spec.filler_vocab:
            words += [vocabs[k][2][j] for j in rng.integers(spec.filler_vocab, size=spec.filler_tokens)]
        words = [words[j] for j in rng.permutation(len(words))]
        out.append(Example(id=f"syn{i:06d}", text=" ".join(words), label=label, lang=_lang_code(k)))
    return out


def signal_count_rule(examples, spec: SyntheticSpec) -> np.ndarray:
    """Predict by majority of class-signal words (the separability oracle)."""
    rng = np.random.default_rng(spec.seed)
    c0, c1 = set(), set()
    for k in range(spec.n_languages):
        a, b, _ = language_vocab(spec, k, rng)
        c0.update(a)
        c1.update(b)
    preds = []
    for ex in examples:
        toks = ex.text.split()
        score = sum(t in c1 for t in toks) - sum(t in c0 for t in toks)
        preds.append(1 if score > 0 else 0)
    return np.asarray(preds)
