"""Diacritic-level error analysis of restoration outputs.

Outputs are compared with their gold texts position by position when the two
share a skeleton (same length, and every position carries the same base
letter once diacritics are removed).  The â/î pair is treated as one skeleton
class because the two letters spell the same vowel and swapping them is the
commonest orthographic error; everything else that does not line up is
counted as unalignable and excluded from the positional statistics.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .metrics import restoration_accuracy
from .textnorm import (
    DIACRITICS,
    FAMILIES,
    POSITION_CLASSES,
    SENTENCE_POSITIONS,
    count_diacritics,
    diacritic_occurrences,
    sentence_count,
    strip_diacritics,
)

__all__ = [
    "ConfusionMatrix",
    "PositionStats",
    "GenerationStats",
    "TextTypeSplit",
    "GoldDistribution",
    "align",
    "align_and_confuse",
    "confusion_matrix",
    "position_recall",
    "generation_stats",
    "text_type_split",
    "gold_distribution",
]

Pair = Tuple[str, str]


def align(gold: str, out: str) -> bool:
    """True when ``out`` can be compared with ``gold`` position by position."""
    if len(gold) != len(out):
        return False
    if strip_diacritics(gold) == strip_diacritics(out):
        return True
    for g, o in zip(gold, out):
        if g == o:
            continue
        if strip_diacritics(g) == strip_diacritics(o):
            continue
        if g in "âÂîÎ" and o in "âÂîÎ" and g.isupper() == o.isupper():
            continue
        return False
    return True


@dataclass
class ConfusionMatrix:
    counts: Counter = field(default_factory=Counter)
    unalignable_count: int = 0
    alignable_count: int = 0

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts,
                               self.unalignable_count + other.unalignable_count,
                               self.alignable_count + other.alignable_count)

    @property
    def total(self) -> int:
        return self.alignable_count + self.unalignable_count

    def row_total(self, gold_letter: str) -> int:
        return sum(n for (g, _), n in self.counts.items() if g == gold_letter)

    def as_dict(self) -> Dict[Pair, int]:
        return dict(self.counts)

    def table(self) -> Tuple[List[str], List[list]]:
        """Rows = gold letters, columns = produced letters (sorted code points)."""
        gold = sorted({g for g, _ in self.counts})
        produced = sorted({p for _, p in self.counts})
        header = ["gold"] + produced
        rows = [[g] + [self.counts.get((g, p), 0) for p in produced] for g in gold]
        return header, rows


def align_and_confuse(gold: str, out: str) -> ConfusionMatrix:
    """Confusion counts for one pair (or an unalignable marker).

    For every gold diacritic the produced letter at the same position is
    counted; for every gold base letter turned into a diacritic an
    over-generation pair ``(base, diacritic)`` is counted.
    """
    cm = ConfusionMatrix()
    if not align(gold, out):
        cm.unalignable_count = 1
        return cm
    cm.alignable_count = 1
    for g, o in zip(gold, out):
        if g in DIACRITICS:
            cm.counts[(g, o)] += 1
        elif o in DIACRITICS:
            cm.counts[(g, o)] += 1
    return cm


def confusion_matrix(records: Iterable[Pair]) -> ConfusionMatrix:
    total = ConfusionMatrix()
    for gold, out in records:
        total = total.merge(align_and_confuse(gold, out.strip()))
    return total


@dataclass
class PositionStats:
    # group name -> key -> [gold, correct]
    counts: Dict[str, Dict[str, List[int]]] = field(default_factory=dict)

    def recall(self, group: str, key: str) -> Optional[float]:
        gold, correct = self.counts[group][key]
        return correct / gold if gold else None

    def rows(self) -> List[list]:
        out = []
        for group in ("position_class", "sentence_position", "letter"):
            for key, (gold, correct) in self.counts.get(group, {}).items():
                out.append([group, key, gold, correct, correct / gold if gold else None])
        return out


def position_recall(records: Iterable[Pair]) -> PositionStats:
    """Recall of gold diacritics per position class, sentence position and letter.

    Unalignable pairs are skipped.
    """
    stats = PositionStats({
        "position_class": {k: [0, 0] for k in POSITION_CLASSES},
        "sentence_position": {k: [0, 0] for k in SENTENCE_POSITIONS},
        "letter": {k: [0, 0] for k in sorted(DIACRITICS)},
    })
    for gold, out in records:
        out = out.strip()
        if not align(gold, out):
            continue
        for occ in diacritic_occurrences(gold):
            hit = int(out[occ.char_index] == occ.letter)
            for group, key in (("position_class", occ.position_class),
                               ("sentence_position", occ.sentence_position),
                               ("letter", occ.letter)):
                cell = stats.counts[group][key]
                cell[0] += 1
                cell[1] += hit
    return stats


@dataclass
class GenerationStats:
    samples: int
    avg_diacritics_per_sample: float
    total_added: int
    top3: List[Tuple[str, int]]
    expected_per_sample: float

    @property
    def ratio_to_expected(self) -> Optional[float]:
        if not self.expected_per_sample:
            return None
        return self.avg_diacritics_per_sample / self.expected_per_sample


def generation_stats(records: Sequence[Pair]) -> GenerationStats:
    """Diacritic marks produced by a restorer, against the gold expectation."""
    produced: Counter = Counter()
    gold_total = 0
    n = 0
    for gold, out in records:
        n += 1
        produced.update(ch for ch in out if ch in DIACRITICS)
        gold_total += count_diacritics(gold)
    total = sum(produced.values())
    top3 = sorted(produced.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
    return GenerationStats(
        samples=n,
        avg_diacritics_per_sample=total / n if n else 0.0,
        total_added=total,
        top3=top3,
        expected_per_sample=gold_total / n if n else 0.0,
    )


@dataclass
class TextTypeSplit:
    single_count: int
    multi_count: int
    single_error: Optional[float]
    multi_error: Optional[float]

    @property
    def relative_delta(self) -> Optional[float]:
        """``(multi - single) / single``; None when a bucket is empty or the
        single-sentence error is zero while the multi-sentence one is not."""
        if self.single_error is None or self.multi_error is None:
            return None
        if self.single_error == self.multi_error:
            return 0.0
        if not self.single_error:
            return None
        return (self.multi_error - self.single_error) / self.single_error


def text_type_split(records: Iterable[Pair]) -> TextTypeSplit:
    """Mean error ``1 - RA_CS_CL`` for single- vs multi-sentence gold texts."""
    single: List[float] = []
    multi: List[float] = []
    for gold, out in records:
        err = 1.0 - restoration_accuracy(gold, out.strip(), True, "char")
        (multi if sentence_count(gold) > 1 else single).append(err)

    def mean(xs: List[float]) -> Optional[float]:
        return math.fsum(xs) / len(xs) if xs else None

    return TextTypeSplit(len(single), len(multi), mean(single), mean(multi))


@dataclass
class GoldDistribution:
    cased: Dict[str, int]
    families: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.cased.values())

    def shares(self, view: str = "families") -> Dict[str, float]:
        counts = self.families if view == "families" else self.cased
        total = sum(counts.values())
        return {k: v / total for k, v in counts.items()} if total else {}


def gold_distribution(texts: Iterable[str]) -> GoldDistribution:
    """Counts of the ten cased diacritics and of the five case-folded families."""
    cased: Counter = Counter()
    for text in texts:
        cased.update(ch for ch in text if ch in DIACRITICS)
    families: Counter = Counter()
    for letter, n in cased.items():
        families[letter.lower()] += n
    order = {k: i for i, k in enumerate(FAMILIES)}
    return GoldDistribution(
        cased=dict(sorted(cased.items(), key=lambda kv: (order[kv[0].lower()], kv[0]))),
        families=dict(sorted(families.items(), key=lambda kv: order[kv[0]])),
    )
