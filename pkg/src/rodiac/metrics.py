"""Restoration accuracy and Levenshtein-based restoration scores.

Eight evaluators are defined, one per combination of

* metric: positional restoration accuracy (``RA``) or edit-distance
  restoration error score (``RER``),
* case handling: case-sensitive (``CS``) or case-insensitive (``CI``),
* granularity: character level (``CL``) or word level (``WL``).

Every score lies in ``[0, 1]`` and higher is better.  ``RER`` is reported as
``1 - distance / max(len(ref), len(out))`` so that it orders the same way as
``RA``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Sequence

from .textnorm import tokenize

__all__ = [
    "EVALUATORS",
    "ScoreRecord",
    "levenshtein",
    "restoration_accuracy",
    "restoration_error_score",
    "evaluate",
    "evaluate_all",
]

EVALUATORS = (
    "RA_CS_CL",
    "RA_CI_CL",
    "RA_CS_WL",
    "RA_CI_WL",
    "RER_CS_CL",
    "RER_CI_CL",
    "RER_CS_WL",
    "RER_CI_WL",
)

LEVELS = ("char", "word")


def levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost edit distance between two sequences.

    Works on strings (code points) and on token lists alike.  Uses the
    bit-parallel formulation of Myers/Hyyrö after trimming the common
    prefix and suffix, so the cost is linear in the longer sequence for
    every practical length.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la < lb:
        a, b, la, lb = b, a, lb, la
    start = 0
    while start < lb and a[start] == b[start]:
        start += 1
    while lb > start and a[la - 1] == b[lb - 1]:
        la -= 1
        lb -= 1
    m = lb - start
    if m == 0:
        return la - start

    # pattern bitmasks over the shorter sequence
    peq: Dict[Hashable, int] = {}
    bit = 1
    for c in b[start:lb]:
        peq[c] = peq.get(c, 0) | bit
        bit <<= 1
    full = bit - 1
    high = bit >> 1
    pv, mv, score = full, 0, m
    get = peq.get
    for c in a[start:la]:
        eq = get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (full ^ (xh | pv))
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = ((ph << 1) | 1) & full
        pv = ((mh << 1) & full) | (full ^ (xv | ph))
        mv = ph & xv
    return score


def _units(text: str, case_sensitive: bool, level: str):
    if not case_sensitive:
        text = text.lower()
    if level == "char":
        return text
    if level == "word":
        return tokenize(text)
    raise ValueError(f"level must be 'char' or 'word', got {level!r}")


def _accuracy(r, o) -> float:
    denom = max(len(r), len(o))
    if denom == 0:
        return 1.0
    return sum(1 for x, y in zip(r, o) if x == y) / denom


def _error_score(r, o) -> float:
    denom = max(len(r), len(o))
    if denom == 0:
        return 1.0
    return 1.0 - levenshtein(r, o) / denom


def restoration_accuracy(ref: str, out: str, case_sensitive: bool = True,
                         level: str = "char") -> float:
    """Share of aligned positions where ``out`` matches ``ref``.

    Positions are compared index by index up to the shorter length and the
    match count is divided by the longer length, so truncation and
    over-generation are both penalized.
    """
    return _accuracy(_units(ref, case_sensitive, level),
                     _units(out, case_sensitive, level))


def restoration_error_score(ref: str, out: str, case_sensitive: bool = True,
                            level: str = "char") -> float:
    """``1 - levenshtein(ref, out) / max(len(ref), len(out))``."""
    return _error_score(_units(ref, case_sensitive, level),
                        _units(out, case_sensitive, level))


def evaluate(evaluator: str, ref: str, out: str) -> float:
    if evaluator not in EVALUATORS:
        raise KeyError(f"unknown evaluator {evaluator!r}")
    metric, case, level = evaluator.split("_")
    fn = restoration_accuracy if metric == "RA" else restoration_error_score
    return fn(ref, out, case == "CS", "char" if level == "CL" else "word")


def evaluate_all(ref: str, out: str) -> Dict[str, float]:
    """Scores of all eight evaluators for one (reference, output) pair.

    The model output is trimmed of leading/trailing whitespace; nothing else
    is normalized.
    """
    out = out.strip()
    scores: Dict[str, float] = {}
    for case_sensitive, case in ((True, "CS"), (False, "CI")):
        ref_c = ref if case_sensitive else ref.lower()
        out_c = out if case_sensitive else out.lower()
        for level, lv in (("char", "CL"), ("word", "WL")):
            r = ref_c if level == "char" else tokenize(ref_c)
            o = out_c if level == "char" else tokenize(out_c)
            scores[f"RA_{case}_{lv}"] = _accuracy(r, o)
            scores[f"RER_{case}_{lv}"] = _error_score(r, o)
    return {name: scores[name] for name in EVALUATORS}


@dataclass
class ScoreRecord:
    statement_id: str
    scores: Dict[str, float] = field(default_factory=dict)
    failed: bool = False

    def __post_init__(self) -> None:
        missing = [e for e in EVALUATORS if e not in self.scores]
        if missing:
            raise ValueError(f"missing evaluator scores: {missing}")
        for name, value in self.scores.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def row(self) -> List:
        return [self.statement_id] + [self.scores[e] for e in EVALUATORS]
