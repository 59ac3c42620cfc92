"""Command-line entry point: ``rodiac <command> ...``.

Stages communicate only through files under the run's output directory::

    gold/<TAG>.jsonl                      sampled gold statements
    records/<TAG>/<restorer>__<template>.jsonl
    timings/<TAG>/<restorer>__<template>.jsonl   wall-clock data (not reproducible)
    scores/<TAG>/<restorer>__<template>.csv
    report/{aps,tas,mtas,rpr,pivot}-<digest>.csv, report-<digest>.txt
    analysis/<TAG>/...
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .aggregate import (
    ECHO_MODEL,
    NO_TEMPLATE,
    AggregationError,
    build_report,
    pivot_report,
    render_text,
    rpr,
    summary_rows,
)
from .corpus import CorpusError, CorpusStats, Statement, compute_stats, load_corpus, sample
from .error_analysis import (
    confusion_matrix,
    generation_stats,
    gold_distribution,
    position_recall,
    text_type_split,
)
from .gateway import Gateway, ReplayTransport
from .io import read_csv, read_jsonl, write_csv, write_jsonl
from .manifest import ManifestError, RunManifest
from .metrics import EVALUATORS, evaluate_all
from .restorers import (
    EchoRestorer,
    IdentityRestorer,
    ModelRestorer,
    RestorationRecord,
    run_batch,
)
from .textnorm import strip_diacritics

logger = logging.getLogger("rodiac")


class CommandError(Exception):
    pass


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _run_name(restorer_id: str, template_id: Optional[str]) -> str:
    return f"{_slug(restorer_id)}__{_slug(template_id or NO_TEMPLATE)}"


# --------------------------------------------------------------------------
# standalone corpus commands


def cmd_corpus_stats(args) -> int:
    corpus = load_corpus(args.path, args.dataset)
    stats = compute_stats(corpus)
    for name, value in stats.as_dict().items():
        print(f"{name}: {value:.6f}" if isinstance(value, float) else f"{name}: {value}")
    if args.out:
        names = CorpusStats.field_names()
        write_csv(args.out, ["dataset"] + names,
                  [[args.dataset] + [getattr(stats, n) for n in names]])
    return 0


def _write_lines(path: Optional[str], lines: Sequence[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def cmd_sample(args) -> int:
    corpus = load_corpus(args.path, args.dataset)
    picked = sample(corpus, args.n, args.seed)
    _write_lines(args.out, [st.text for st in picked])
    return 0


def cmd_strip(args) -> int:
    corpus = load_corpus(args.path, args.dataset)
    _write_lines(args.out, [strip_diacritics(st.text) for st in corpus])
    return 0


# --------------------------------------------------------------------------
# manifest-driven pipeline


def _load_manifest(args) -> RunManifest:
    manifest = RunManifest.load(args.manifest)
    return manifest.override(
        output_dir=Path(args.output_dir) if getattr(args, "output_dir", None) else None,
        cache_dir=Path(args.cache_dir) if getattr(args, "cache_dir", None) else None,
        replay_dir=Path(args.replay) if getattr(args, "replay", None) else None,
        concurrency=getattr(args, "concurrency", None),
        sanitize=True if getattr(args, "sanitize", False) else None,
    )


def _run_digest(manifest: RunManifest) -> str:
    """Digest recorded by the ``run`` stage (flags given to it are part of it)."""
    path = manifest.output_dir / "manifest.json"
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))["digest"]
    return manifest.digest()


def _gold(out: Path, tag: str) -> Dict[str, Statement]:
    path = out / "gold" / f"{tag}.jsonl"
    if not path.exists():
        raise CommandError(f"missing {path}; run the 'run' stage first")
    return {r["id"]: Statement(r["id"], r["text"], tag) for r in read_jsonl(path)}


def _record_files(out: Path, tag: str) -> List[Path]:
    return sorted((out / "records" / tag).glob("*.jsonl"))


def _load_records(path: Path) -> List[RestorationRecord]:
    return [RestorationRecord(**r) for r in read_jsonl(path)]


def cmd_run(args) -> int:
    manifest = _load_manifest(args)
    manifest.validate()
    digest = manifest.digest()
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(manifest.describe(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8")

    gateways = []
    replay = ReplayTransport(manifest.replay_dir) if manifest.replay_dir else None
    for endpoint in manifest.endpoints:
        gateways.append(Gateway(endpoint, transport=replay, cache_dir=manifest.cache_dir))

    failures = 0
    for ds in manifest.datasets:
        corpus = load_corpus(ds.path, ds.tag)
        if manifest.sample_size is not None:
            corpus = sample(corpus, manifest.sample_size, manifest.seed)
        write_jsonl(out / "gold" / f"{ds.tag}.jsonl",
                    [json.dumps({"id": st.id, "text": st.text}, ensure_ascii=False)
                     for st in corpus], digest)
        items = [(st.id, strip_diacritics(st.text)) for st in corpus]
        # drop records of restorers no longer in the manifest
        for stale in _record_files(out, ds.tag):
            stale.unlink()

        restorers = [EchoRestorer()]
        if manifest.include_identity:
            restorers.append(IdentityRestorer().fit([t for _, t in items],
                                                    [st.text for st in corpus]))
        for gw in gateways:
            for template in manifest.templates:
                restorers.append(ModelRestorer(gw.endpoint, template, gateway=gw,
                                               sanitize=manifest.sanitize))

        for restorer in restorers:
            records = run_batch(restorer, items, manifest.concurrency, dataset=ds.tag)
            name = _run_name(restorer.restorer_id, restorer.template_id)
            write_jsonl(out / "records" / ds.tag / f"{name}.jsonl",
                        [r.to_json() for r in records], digest)
            write_jsonl(out / "timings" / ds.tag / f"{name}.jsonl",
                        [r.timing_json() for r in records])
            failed = sum(r.failed for r in records)
            failures += failed
            logger.info("%s %s: %d records, %d failed", ds.tag, name, len(records), failed)
    if failures:
        logger.warning("%d restorations failed; they are recorded and score 0", failures)
    return 0


def cmd_eval(args) -> int:
    manifest = _load_manifest(args)
    digest = _run_digest(manifest)
    out = manifest.output_dir
    header = ["statement_id", "dataset", "model", "template", "failed"] + list(EVALUATORS)
    for ds in manifest.datasets:
        gold = _gold(out, ds.tag)
        for path in _record_files(out, ds.tag):
            records = _load_records(path)
            missing = sorted({r.statement_id for r in records} - set(gold))
            if missing:
                raise CommandError(f"{path}: statement ids not in gold corpus: {missing}")
            rows = []
            for r in records:
                scores = evaluate_all(gold[r.statement_id].text, "" if r.failed else r.output)
                model = r.restorer_id
                rows.append([r.statement_id, ds.tag, model, r.template_id or NO_TEMPLATE,
                             r.failed] + [scores[e] for e in EVALUATORS])
            write_csv(out / "scores" / ds.tag / f"{path.stem}.csv", header, rows, digest)
    return 0


def _model_name(restorer_id: str) -> str:
    return restorer_id[len("model:"):] if restorer_id.startswith("model:") else restorer_id


def _collect_scores(manifest: RunManifest):
    out = manifest.output_dir
    cells = defaultdict(list)
    for ds in manifest.datasets:
        for path in sorted((out / "scores" / ds.tag).glob("*.csv")):
            for row in read_csv(path):
                key = (_model_name(row["model"]), row["template"], row["dataset"])
                cells[key].append({e: float(row[e]) for e in EVALUATORS})
    if not cells:
        raise CommandError(f"no score files under {out / 'scores'}; run 'eval' first")
    developers = {e.model_id: e.developer for e in manifest.endpoints}
    developers.setdefault("identity", "oracle")
    return build_report(cells, [d.tag for d in manifest.datasets], developers)


def cmd_aggregate(args) -> int:
    if args.from_mtas:
        return _rpr_from_mtas(args.from_mtas, args.echo_mtas, args.out)
    manifest = _load_manifest(args)
    digest = _run_digest(manifest)
    short = digest[:12]
    report = _collect_scores(manifest)
    rdir = manifest.output_dir / "report"

    aps_rows = [[m, t, d, e, v, report.counts[(m, t, d)]]
                for (m, t, d, e), v in sorted(report.aps.items())]
    write_csv(rdir / f"aps-{short}.csv",
              ["model", "template", "dataset", "evaluator", "APS", "statements"],
              aps_rows, digest)
    write_csv(rdir / f"tas-{short}.csv", ["model", "template", "TAS", "datasets"],
              [[m, t, v, report.tas_datasets[(m, t)]] for (m, t), v in sorted(report.tas.items())],
              digest)
    write_csv(rdir / f"mtas-{short}.csv", ["model", "developer", "best_template", "MTAS"],
              [[m, report.developers.get(m, ""), t, v]
               for m, (v, t) in sorted(report.mtas.items())], digest)
    if report.has_rpr:
        header, rows = summary_rows(report)
        write_csv(rdir / f"rpr-{short}.csv", header, rows, digest)
    header, rows = pivot_report(report)
    write_csv(rdir / f"pivot-{short}.csv", header, rows, digest)
    text = f"rodiac {__version__} manifest={digest}\n\n" + render_text(report)
    (rdir / f"report-{short}.txt").write_text(text, encoding="utf-8", newline="\n")
    return 0


def _rpr_from_mtas(path: str, echo_mtas: Optional[float], out: Optional[str]) -> int:
    rows = read_csv(path)
    table = {r["model"]: float(r["MTAS"]) for r in rows}
    if echo_mtas is None:
        if ECHO_MODEL not in table:
            raise CommandError(f"{path}: no '{ECHO_MODEL}' row; pass --echo-mtas")
        echo_mtas = table[ECHO_MODEL]
    result = [[m, v, echo_mtas, rpr(v, echo_mtas)] for m, v in table.items()]
    for m, v, e, ratio in result:
        print(f"{m}\t{v}\t{e}\t{ratio:.3f}")
    if out:
        write_csv(out, ["model", "MTAS", "echo_MTAS", "RPR"], result)
    return 0


def cmd_analyze(args) -> int:
    manifest = _load_manifest(args)
    digest = _run_digest(manifest)
    out = manifest.output_dir
    tags = [args.dataset] if args.dataset else [d.tag for d in manifest.datasets]
    for tag in tags:
        gold = _gold(out, tag)
        adir = out / "analysis" / tag
        dist = gold_distribution(st.text for st in gold.values())
        dist_rows = []
        for view, counts in (("family", dist.families), ("cased", dist.cased)):
            shares = dist.shares("families" if view == "family" else "cased")
            dist_rows += [[view, k, n, shares[k]] for k, n in counts.items()]
        write_csv(adir / "gold_distribution.csv", ["view", "letter", "count", "share"],
                  dist_rows, digest)

        generation = []
        for path in _record_files(out, tag):
            records = _load_records(path)
            pairs = [(gold[r.statement_id].text, "" if r.failed else r.output)
                     for r in records]
            name = path.stem
            cm = confusion_matrix(pairs)
            header, rows = cm.table()
            rows.append(["#unalignable", cm.unalignable_count])
            rows.append(["#alignable", cm.alignable_count])
            write_csv(adir / f"confusion__{name}.csv", header, rows, digest)
            write_csv(adir / f"position__{name}.csv",
                      ["group", "key", "gold", "correct", "recall"],
                      position_recall(pairs).rows(), digest)
            split = text_type_split(pairs)
            write_csv(adir / f"texttype__{name}.csv",
                      ["metric", "single_count", "multi_count", "single_error",
                       "multi_error", "relative_delta"],
                      [["1-RA_CS_CL", split.single_count, split.multi_count,
                        split.single_error, split.multi_error, split.relative_delta]],
                      digest)
            g = generation_stats(pairs)
            first = records[0] if records else None
            generation.append([
                _model_name(first.restorer_id) if first else name,
                (first.template_id or NO_TEMPLATE) if first else "",
                g.samples, g.avg_diacritics_per_sample, g.total_added,
                " ".join(f"{k}:{n}" for k, n in g.top3),
                g.expected_per_sample, g.ratio_to_expected,
            ])
        write_csv(adir / "generation.csv",
                  ["model", "template", "samples", "avg_diacritics", "total_added", "top3",
                   "expected_per_sample", "ratio_to_expected"], generation, digest)
    return 0


def cmd_report(args) -> int:
    manifest = _load_manifest(args)
    report = _collect_scores(manifest)
    sys.stdout.write(render_text(report))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rodiac", description="Romanian diacritic restoration evaluation pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus-stats", help="descriptive statistics of a corpus file")
    p.add_argument("path")
    p.add_argument("--dataset", default="custom")
    p.add_argument("--out", help="also write the stats as a CSV row")
    p.set_defaults(func=cmd_corpus_stats)

    p = sub.add_parser("sample", help="seeded uniform sample of a corpus file")
    p.add_argument("path")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", default="custom")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("strip", help="remove diacritics from a corpus file")
    p.add_argument("path")
    p.add_argument("--dataset", default="custom")
    p.add_argument("--out")
    p.set_defaults(func=cmd_strip)

    def manifest_cmd(name, func, help, optional=False):
        p = sub.add_parser(name, help=help)
        p.add_argument("manifest", nargs="?" if optional else None)
        p.add_argument("--output-dir")
        p.set_defaults(func=func)
        return p

    p = manifest_cmd("run", cmd_run, "restore every sampled statement with every restorer")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--replay", metavar="DIR", help="serve replies from recorded fixtures")
    p.add_argument("--sanitize", action="store_true",
                   help="strip chat boilerplate from model replies")
    manifest_cmd("eval", cmd_eval, "score restoration records against the gold corpus")
    p = manifest_cmd("aggregate", cmd_aggregate, "APS/TAS/MTAS/RPR sheets and pivot",
                     optional=True)
    p.add_argument("--from-mtas", metavar="CSV",
                   help="compute RPR from a model,MTAS table instead of a run")
    p.add_argument("--echo-mtas", type=float)
    p.add_argument("--out")
    p = manifest_cmd("analyze", cmd_analyze, "confusion, position, generation statistics")
    p.add_argument("--dataset")
    manifest_cmd("report", cmd_report, "print the aggregate tables")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "aggregate" and not args.from_mtas and not args.manifest:
        parser.error("aggregate needs a manifest (or --from-mtas)")
    try:
        return args.func(args)
    except (CommandError, ManifestError, CorpusError, AggregationError, IndexError,
            OSError) as exc:
        print(f"rodiac {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
