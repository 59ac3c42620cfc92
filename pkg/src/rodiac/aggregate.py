"""Score aggregation: APS, TAS, MTAS, RPR and the pivot report.

* APS - mean per-statement score of one (model, template, dataset, evaluator).
* TAS - mean of a (model, template)'s APS values over all eight evaluators
  and every dataset (16 values for the usual two datasets).
* MTAS - a model's best TAS over its templates.
* RPR - a model's MTAS divided by the Echo baseline's MTAS.

Numbers are kept at full precision; rounding happens only when rendering.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .metrics import EVALUATORS

logger = logging.getLogger(__name__)

__all__ = [
    "AggregationError",
    "AggregateReport",
    "ECHO_MODEL",
    "NO_TEMPLATE",
    "aps",
    "tas",
    "mtas",
    "rpr",
    "build_report",
    "pivot_report",
    "summary_rows",
    "render_text",
]

ECHO_MODEL = "echo"
NO_TEMPLATE = "none"


class AggregationError(ValueError):
    pass


def aps(scores: Sequence[float]) -> float:
    """Arithmetic mean with correctly rounded summation (order-independent)."""
    scores = list(scores)
    if not scores:
        raise AggregationError("APS of an empty score list")
    return math.fsum(scores) / len(scores)


def tas(aps_values: Sequence[float], n_datasets: int = 2) -> float:
    """Mean of ``8 * n_datasets`` APS values.

    ``n_datasets`` below 2 is the reduced mode used when a run covers fewer
    datasets; the cardinality is still enforced.
    """
    values = list(aps_values)
    expected = len(EVALUATORS) * n_datasets
    if n_datasets < 1 or len(values) != expected:
        raise AggregationError(f"TAS expects {expected} APS values, got {len(values)}")
    return math.fsum(values) / len(values)


def mtas(tas_by_template: Mapping[str, float]) -> Tuple[float, str]:
    """Best TAS and its template; ties go to the lexicographically smallest id."""
    if not tas_by_template:
        raise AggregationError("MTAS of an empty mapping")
    template = min(tas_by_template, key=lambda t: (-tas_by_template[t], t))
    return tas_by_template[template], template


def rpr(model_mtas: float, echo_mtas: float) -> float:
    if not echo_mtas > 0:
        raise AggregationError(f"Echo MTAS must be positive, got {echo_mtas}")
    return model_mtas / echo_mtas


Cell = Tuple[str, str, str]  # (model, template, dataset)


@dataclass
class AggregateReport:
    datasets: List[str]
    aps: Dict[Tuple[str, str, str, str], float] = field(default_factory=dict)
    tas: Dict[Tuple[str, str], float] = field(default_factory=dict)
    tas_datasets: Dict[Tuple[str, str], int] = field(default_factory=dict)
    mtas: Dict[str, Tuple[float, str]] = field(default_factory=dict)
    rpr: Dict[str, float] = field(default_factory=dict)
    developers: Dict[str, str] = field(default_factory=dict)
    counts: Dict[Cell, int] = field(default_factory=dict)

    @property
    def models(self) -> List[str]:
        return sorted(self.mtas)

    @property
    def has_rpr(self) -> bool:
        return ECHO_MODEL in self.mtas


def build_report(per_statement: Mapping[Cell, Sequence[Mapping[str, float]]],
                 datasets: Optional[Sequence[str]] = None,
                 developers: Optional[Mapping[str, str]] = None) -> AggregateReport:
    """Aggregate per-statement score dicts keyed by (model, template, dataset)."""
    if not per_statement:
        raise AggregationError("no scores to aggregate")
    present = sorted({d for (_, _, d) in per_statement})
    if datasets is None:
        datasets = present
    else:
        datasets = [d for d in datasets if d in present]
        datasets += [d for d in present if d not in datasets]
    report = AggregateReport(datasets=list(datasets))
    report.developers = dict(developers or {})
    report.developers.setdefault(ECHO_MODEL, "baseline")

    for (model, template, dataset), rows in per_statement.items():
        report.counts[(model, template, dataset)] = len(rows)
        for ev in EVALUATORS:
            report.aps[(model, template, dataset, ev)] = aps([r[ev] for r in rows])

    pairs = sorted({(m, t) for (m, t, _) in per_statement})
    for model, template in pairs:
        covered = [d for d in report.datasets if (model, template, d) in per_statement]
        values = [report.aps[(model, template, d, ev)] for d in covered for ev in EVALUATORS]
        report.tas[(model, template)] = tas(values, len(covered))
        report.tas_datasets[(model, template)] = len(covered)

    for model in sorted({m for m, _ in pairs}):
        report.mtas[model] = mtas({t: v for (m, t), v in report.tas.items() if m == model})

    if ECHO_MODEL in report.mtas:
        echo = report.mtas[ECHO_MODEL][0]
        for model, (best, _) in report.mtas.items():
            report.rpr[model] = rpr(best, echo)
    else:
        logger.warning("no Echo baseline among the scores; RPR omitted")
    return report


def pivot_report(report: AggregateReport) -> Tuple[List[str], List[list]]:
    """One row per (developer, model, template); 8 score columns per dataset, then TAS."""
    header = ["developer", "model", "template"]
    header += [f"{d}:{ev}" for d in report.datasets for ev in EVALUATORS]
    header += ["TAS"]
    rows = []
    for model, template in report.tas:
        row = [report.developers.get(model, ""), model, template]
        for d in report.datasets:
            for ev in EVALUATORS:
                row.append(report.aps.get((model, template, d, ev)))
        row.append(report.tas[(model, template)])
        rows.append(row)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return header, rows


def summary_rows(report: AggregateReport) -> Tuple[List[str], List[list]]:
    """Per-model MTAS / RPR sheet, best model first."""
    header = ["developer", "model", "best_template", "MTAS", "echo_MTAS", "RPR"]
    echo = report.mtas[ECHO_MODEL][0] if report.has_rpr else None
    rows = []
    for model, (best, template) in report.mtas.items():
        rows.append([report.developers.get(model, ""), model, template, best, echo,
                     report.rpr.get(model)])
    rows.sort(key=lambda r: (-r[3], r[1]))
    return header, rows


def _fmt(value, digits: int) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def render_text(report: AggregateReport) -> str:
    """Plain-text tables: model summary (MTAS/RPR) followed by TAS per template."""
    lines = []
    _, rows = summary_rows(report)
    table = [["Model", "Best template", "MTAS", "Echo MTAS", "RPR"]]
    for _dev, model, template, best, echo, ratio in rows:
        table.append([model, template, _fmt(best, 4), _fmt(echo, 4), _fmt(ratio, 3)])
    lines += _grid(table)
    lines.append("")
    table = [["Model", "Template", "TAS", "datasets"]]
    for (model, template), value in sorted(report.tas.items()):
        table.append([model, template, _fmt(value, 4),
                      str(report.tas_datasets[(model, template)])])
    lines += _grid(table)
    return "\n".join(lines) + "\n"


def _grid(table: List[List[str]]) -> List[str]:
    widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
    out = []
    for n, row in enumerate(table):
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return out
