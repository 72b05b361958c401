"""Corpus ingestion, text normalization, tokenization and stratified splits."""
from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
CLASS_NAMES = ("non_depressed", "depressed")


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    label: int | None = None
    lang: str = "und"

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"example {self.id!r}: invalid label {self.label!r}")


@dataclass
class TokenSequence:
    tokens: list[int]
    original_length: int
    degenerate: bool = False


# ---------------------------------------------------------------------------
# Corpus / resource I/O
# ---------------------------------------------------------------------------


def load_corpus(path) -> list[Example]:
    """Read a JSONL corpus; ids must be unique."""
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            ex = Example(id=str(rec["id"]), text=rec["text"], label=rec.get("label"),
                         lang=rec.get("lang", "und"))
            if ex.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {ex.id!r}")
            seen.add(ex.id)
            out.append(ex)
    return out


def save_corpus(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            rec = {"id": ex.id, "text": ex.text, "label": ex.label, "lang": ex.lang}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_stopwords(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def load_tsv_map(path) -> dict[str, str]:
    """``surface<TAB>replacement`` lines; used for emoji maps and dialect lexicons."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected surface<TAB>replacement")
            surface, repl = line.split("\t", 1)
            out[surface] = repl
    return out


@dataclass
class Resources:
    """Per-language preprocessing resources. All may be empty."""

    stopwords: set[str] = field(default_factory=set)
    emoji: dict[str, str] = field(default_factory=dict)
    dialect: dict[str, str] = field(default_factory=dict)
    symbols: str = r"[^\w\s]"

    @classmethod
    def from_dir(cls, directory) -> "Resources":
        """Load ``stopwords.txt``, ``emoji.tsv`` and ``dialect.tsv`` when present."""
        d = Path(directory)
        res = cls()
        if (d / "stopwords.txt").exists():
            res.stopwords = load_stopwords(d / "stopwords.txt")
        if (d / "emoji.tsv").exists():
            res.emoji = load_tsv_map(d / "emoji.tsv")
        if (d / "dialect.tsv").exists():
            res.dialect = load_tsv_map(d / "dialect.tsv")
        return res


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)


def _replace_surfaces(text: str, mapping: dict[str, str]) -> str:
    # longest surface first so ":-(" wins over ":("
    for surface in sorted(mapping, key=lambda s: (-len(s), s)):
        key = surface.lower()
        if key and key in text:
            text = text.replace(key, " " + mapping[surface].lower() + " ")
    return text


def _dialect_sub(text: str, lexicon: dict[str, str]) -> str:
    if not lexicon:
        return text
    lowered = {k.lower(): v.lower() for k, v in lexicon.items()}
    return " ".join(lowered.get(tok, tok) for tok in text.split())


def preprocess(text: str, resources: Resources | None = None) -> str:
    """Normalize raw text.

    Fixed order: URL strip, lowercase, emoji map, dialect map, symbol strip,
    stopword removal, whitespace collapse.
    """
    res = resources or Resources()
    text = _URL_RE.sub(" ", text)
    text = text.lower()
    text = _replace_surfaces(text, res.emoji)
    text = _dialect_sub(text, res.dialect)
    text = re.sub(res.symbols, " ", text)
    stop = {s.lower() for s in res.stopwords}
    return " ".join(tok for tok in text.split() if tok not in stop)


# ---------------------------------------------------------------------------
# Vocabulary / tokenization
# ---------------------------------------------------------------------------


class Vocabulary:
    """Token/id bijection with ``PAD=0`` and ``UNK=1``."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        self.frozen = False
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token in self.stoi:
            return self.stoi[token]
        if self.frozen:
            raise ValueError(f"vocabulary is frozen; cannot add {token!r}")
        self.stoi[token] = len(self.itos)
        self.itos.append(token)
        return self.stoi[token]

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __getitem__(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.itos[2:]) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            toks = [line.rstrip("\n") for line in fh]
        return cls([t for t in toks if t]).freeze()


def build_vocab(texts: Iterable[str], min_freq: int = 1) -> Vocabulary:
    """Frequency vocabulary over normalized texts, ordered (freq desc, token asc)."""
    counts = Counter()
    n = 0
    for text in texts:
        counts.update(text.split())
        n += 1
    if n == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    if not kept:
        log.warning("no token reaches min_freq=%d; vocabulary holds only PAD/UNK", min_freq)
    return Vocabulary(kept).freeze()


def tokenize(text: str, vocab: Vocabulary, max_len: int = 64) -> TokenSequence:
    words = text.split()
    if not words:
        return TokenSequence([PAD], 0, degenerate=True)
    ids = [vocab[w] for w in words[:max_len]]
    return TokenSequence(ids, len(words))


def pad_batch(seqs: Sequence[Sequence[int]], min_len: int = 1) -> np.ndarray:
    """Right-pad id lists into an ``(n, L)`` int64 array."""
    width = max([min_len] + [len(s) for s in seqs])
    out = np.zeros((len(seqs), width), dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


@dataclass
class SplitPools:
    labeled: list[int]
    unlabeled: list[int]
    test: list[int]
    seed: int = 0

    def check(self, n: int) -> None:
        sets = [set(self.labeled), set(self.unlabeled), set(self.test)]
        if sum(map(len, sets)) != n or set().union(*sets) != set(range(n)):
            raise ValueError("split pools must be a disjoint cover of the corpus")

    def to_manifest(self, corpus: Sequence[Example]) -> dict:
        return {
            "seed": self.seed,
            "labeled": [corpus[i].id for i in self.labeled],
            "unlabeled": [corpus[i].id for i in self.unlabeled],
            "test": [corpus[i].id for i in self.test],
        }

    @classmethod
    def from_manifest(cls, manifest: dict, corpus: Sequence[Example]) -> "SplitPools":
        index = {ex.id: i for i, ex in enumerate(corpus)}
        try:
            pools = cls(
                labeled=[index[i] for i in manifest["labeled"]],
                unlabeled=[index[i] for i in manifest["unlabeled"]],
                test=[index[i] for i in manifest["test"]],
                seed=int(manifest.get("seed", 0)),
            )
        except KeyError as exc:
            raise ValueError(f"split manifest references unknown id {exc.args[0]!r}") from None
        pools.check(len(corpus))
        return pools

    def save(self, path, corpus) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_manifest(corpus), fh, ensure_ascii=False)

    @classmethod
    def load(cls, path, corpus) -> "SplitPools":
        with open(path, encoding="utf-8") as fh:
            return cls.from_manifest(json.load(fh), corpus)


def _apportion(total: int, sizes: dict, room: dict) -> dict:
    """Largest-remainder apportionment of ``total`` seats proportional to ``sizes``."""
    n = sum(sizes.values())
    quotas = {k: total * v / n for k, v in sizes.items()}
    seats = {k: min(int(math.floor(q)), room[k]) for k, q in quotas.items()}
    left = total - sum(seats.values())
    order = sorted(sizes, key=lambda k: (-(quotas[k] - math.floor(quotas[k])), str(k)))
    while left > 0:
        progressed = False
        for k in order:
            if left and seats[k] < room[k]:
                seats[k] += 1
                left -= 1
                progressed = True
        if not progressed:
            break
    return seats


def stratified_split(corpus: Sequence[Example], fractions=(0.2, 0.6, 0.2), seed: int = 0,
                     by_lang: bool = False) -> SplitPools:
    """Stratified labeled/unlabeled/test split.

    Labeled and test sizes are apportioned per stratum by largest remainder,
    so each stratum's share of those pools is within one example of its
    corpus share. The unlabeled pool takes the rest.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValueError(f"fractions must be three nonnegative values summing to 1, got {fractions}")
    strata: dict = {}
    for i, ex in enumerate(corpus):
        if ex.label is None:
            raise ValueError(f"example {ex.id!r} has no label; splits need ground truth")
        key = (ex.label, ex.lang) if by_lang else ex.label
        strata.setdefault(key, []).append(i)
    need = sum(f > 0 for f in fractions)
    for key, members in strata.items():
        if len(members) < need:
            raise ValueError(f"class {key!r} has {len(members)} examples; {need} pools need it")

    rng = np.random.default_rng(seed)
    keys = sorted(strata, key=str)
    for key in keys:
        members = strata[key]
        strata[key] = [members[j] for j in rng.permutation(len(members))]

    n = len(corpus)
    sizes = {k: len(strata[k]) for k in keys}
    n_lab = round(fractions[0] * n)
    lab = _apportion(n_lab, sizes, sizes)
    room = {k: sizes[k] - lab[k] for k in keys}
    if fractions[1] == 0:
        test = room
    else:
        test = _apportion(min(round(fractions[2] * n), sum(room.values())), sizes, room)

    labeled, unlabeled, test_idx = [], [], []
    for k in keys:
        m = strata[k]
        labeled += m[: lab[k]]
        test_idx += m[lab[k]: lab[k] + test[k]]
        unlabeled += m[lab[k] + test[k]:]
    pools = SplitPools(sorted(labeled), sorted(unlabeled), sorted(test_idx), seed=seed)
    pools.check(n)
    return pools


def masked_labels(corpus: Sequence[Example], pools: SplitPools) -> np.ndarray:
    """Training-facing labels: true labels on the labeled pool, -1 elsewhere."""
    out = np.full(len(corpus), -1, dtype=np.int64)
    for i in pools.labeled:
        out[i] = corpus[i].label
    return out
