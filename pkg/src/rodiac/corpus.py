"""Gold corpus loading, sampling and descriptive statistics."""

from __future__ import annotations

import os
import random
import unicodedata
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Sequence, Tuple

from .textnorm import (
    TextDecodeError,
    count_diacritics,
    normalize,
    strip_diacritics,
    tokenize,
)

__all__ = [
    "Statement",
    "CorpusStats",
    "CorpusError",
    "load_corpus",
    "sample",
    "compute_stats",
    "strip_corpus",
    "distinct_word_key",
]


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Statement:
    id: str
    text: str
    dataset: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise CorpusError(f"statement {self.id!r} is empty")


@dataclass(frozen=True)
class CorpusStats:
    total_statements: int = 0
    total_words: int = 0
    distinct_words: int = 0
    words_with_diacritics: int = 0
    total_diacritic_chars: int = 0
    avg_words_per_statement: float = 0.0
    avg_diacritics_per_statement: float = 0.0
    avg_diacritics_per_word: float = 0.0

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def load_corpus(path: "str | os.PathLike", dataset: str) -> List[Statement]:
    """Read a one-statement-per-line UTF-8 file.

    Lines are trimmed and blank lines skipped; ids are ``<dataset>-<ordinal>``
    counted over the kept lines.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    statements: List[Statement] = []
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        try:
            text = normalize(line).strip()
        except TextDecodeError as exc:
            raise CorpusError(f"{path}: line {lineno}: {exc}") from exc
        if not text:
            continue
        statements.append(Statement(f"{dataset}-{len(statements)}", text, dataset))
    return statements


def sample(corpus: Sequence[Statement], n: int, seed: int) -> List[Statement]:
    """Uniform sample without replacement, returned in corpus order."""
    if n < 0 or n > len(corpus):
        raise IndexError(f"cannot sample {n} statements from a corpus of {len(corpus)}")
    picked = sorted(random.Random(seed).sample(range(len(corpus)), n))
    return [corpus[i] for i in picked]


def _edge_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def distinct_word_key(token: str) -> str:
    """Lowercased token with leading/trailing punctuation removed."""
    start, stop = 0, len(token)
    while start < stop and _edge_punct(token[start]):
        start += 1
    while stop > start and _edge_punct(token[stop - 1]):
        stop -= 1
    return token[start:stop].lower()


def compute_stats(corpus: Iterable[Statement]) -> CorpusStats:
    n_statements = 0
    n_words = 0
    n_diacritics = 0
    vocabulary = set()
    for st in corpus:
        n_statements += 1
        tokens = tokenize(st.text)
        n_words += len(tokens)
        n_diacritics += count_diacritics(st.text)
        for tok in tokens:
            key = distinct_word_key(tok)
            if key:
                vocabulary.add(key)
    with_diacritics = sum(1 for w in vocabulary if count_diacritics(w))
    return CorpusStats(
        total_statements=n_statements,
        total_words=n_words,
        distinct_words=len(vocabulary),
        words_with_diacritics=with_diacritics,
        total_diacritic_chars=n_diacritics,
        avg_words_per_statement=n_words / n_statements if n_statements else 0.0,
        avg_diacritics_per_statement=n_diacritics / n_statements if n_statements else 0.0,
        avg_diacritics_per_word=n_diacritics / n_words if n_words else 0.0,
    )


def strip_corpus(corpus: Iterable[Statement]) -> List[Tuple[str, str]]:
    return [(st.id, strip_diacritics(st.text)) for st in corpus]
