"""Command-line interface.

Subcommands: build-idf, build-index-check, synthesize, label,
emit-dataset, evaluate, rescale. Exit codes: 0 success, 2 input
validation failure, 3 runtime pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .corpus import build_idf, load_corpus
from .embed_index import load_embeddings
from .evalkit import (
    ScoredSegments,
    bounds_from_samples,
    kendall_tau_b,
    rescale,
    spearman_rho,
    williams_test,
    RescaleBounds,
)
from .pipeline import (
    PipelineConfig,
    PipelineError,
    ValidationError,
    run_emit_dataset,
    run_label,
    run_synthesize,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON pipeline config; flags below override its fields")
    parser.add_argument("--anchors", dest="anchor_corpus", help="anchor-language corpus, one sentence per line")
    parser.add_argument("--sources", dest="source_corpus", help="parallel source corpus, line-aligned with anchors")
    parser.add_argument("--embeddings", help="EMB1 embedding file for the anchor corpus")
    parser.add_argument("--idf-cache", dest="idf_cache", help="IDF table JSON; built from the anchors when missing")
    parser.add_argument("--oracle", dest="oracle_file", help="mask-probability oracle JSONL keyed by fingerprint")
    parser.add_argument("--stub-probability", dest="stub_probability", type=float,
                        help="constant mask probability instead of an oracle file")
    parser.add_argument("--k-neighbors", dest="k_neighbors", type=int)
    parser.add_argument("--margin-threshold", dest="margin_threshold", type=float)
    parser.add_argument("--drop-count-max", dest="drop_count_max", type=int)
    parser.add_argument("--negatives-per-anchor", dest="negatives_per_anchor", type=int)
    parser.add_argument("--in-batch-ratio", dest="in_batch_ratio", type=float)
    parser.add_argument("--master-seed", dest="master_seed", type=int)


_CONFIG_FIELDS = (
    "anchor_corpus", "source_corpus", "embeddings", "idf_cache", "oracle_file",
    "stub_probability", "k_neighbors", "margin_threshold", "drop_count_max",
    "negatives_per_anchor", "in_batch_ratio", "master_seed",
)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    payload: dict = {}
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            payload[name] = value
    for required in ("anchor_corpus", "source_corpus", "embeddings"):
        if not payload.get(required):
            raise ValidationError(f"missing required config field {required}")
    return PipelineConfig.from_json_dict(payload)


def _figures_dir(args: argparse.Namespace, out_path: str) -> Path | None:
    if args.no_figures:
        return None
    if args.figures:
        return Path(args.figures)
    out = Path(out_path)
    return out.parent / f"{out.stem}_figures"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_build_idf(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    if not corpus:
        raise ValidationError(f"corpus {args.corpus} is empty")
    table = build_idf(corpus)
    table.save(args.out)
    print(f"wrote IDF table for {table.doc_count} sentences, {len(table.df)} tokens to {args.out}")
    return EXIT_OK


def cmd_build_index_check(args: argparse.Namespace) -> int:
    try:
        index = load_embeddings(args.embeddings)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    corpus = load_corpus(args.corpus)
    if index.count != len(corpus):
        raise ValidationError(
            f"embedding count {index.count} does not match corpus line count {len(corpus)}"
        )
    print(json.dumps({"count": index.count, "dim": index.dim, "corpus_lines": len(corpus), "ok": True}))
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    config = _build_config(args)
    written = run_synthesize(config, args.out)
    print(f"wrote {written} proposal ops to {args.out}")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    config = _build_config(args)
    written = run_label(config, args.manifest, args.out)
    print(f"labeled {written} ops into {args.out}")
    return EXIT_OK


def cmd_emit_dataset(args: argparse.Namespace) -> int:
    config = _build_config(args)
    stats = run_emit_dataset(config, args.dataset, args.stats, workers=args.workers)
    figures = _figures_dir(args, args.stats)
    if figures is not None:
        from .report import render_stats_figures

        for path in render_stats_figures(stats, figures):
            print(f"figure: {path}")
    counts = stats["counts_by_kind"]
    print(
        f"wrote {sum(counts.values())} records to {args.dataset} "
        f"(hard={counts['hard_negative']}, positive={counts['positive']}, "
        f"in_batch={counts['in_batch_negative']}); stats in {args.stats}"
    )
    return EXIT_OK


def _read_ratings(path: str) -> tuple[list[str], list[float], dict[str, list[float]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"ratings file {path} is empty") from None
        expected_prefix = ["segment_id", "system", "human_score"]
        if header[:3] != expected_prefix:
            raise ValidationError(
                f"ratings header must start with {expected_prefix}, got {header[:3]}"
            )
        metric_names = header[3:]
        if not metric_names:
            raise ValidationError("ratings file has no metric columns")
        systems: list[str] = []
        human: list[float] = []
        metrics: dict[str, list[float]] = {name: [] for name in metric_names}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"ratings row {row_no} has {len(row)} fields, expected {len(header)}")
            systems.append(row[1])
            try:
                human.append(float(row[2]))
                for name, value in zip(metric_names, row[3:]):
                    metrics[name].append(float(value))
            except ValueError as exc:
                raise ValidationError(f"non-numeric score at ratings row {row_no}: {exc}") from exc
    if len(human) < 2:
        raise ValidationError("ratings file needs at least two segments")
    return systems, human, metrics


def _pooled_correlations(human: list[float], metrics: dict[str, list[float]]) -> dict:
    out = {}
    for name, scores in metrics.items():
        pairs = ScoredSegments.of(scores, human)
        out[name] = {"tau": kendall_tau_b(pairs), "rho": spearman_rho(pairs)}
    return out


def _per_system_correlations(
    systems: list[str], human: list[float], metrics: dict[str, list[float]]
) -> tuple[dict, int]:
    by_system: dict[str, list[int]] = {}
    for i, system in enumerate(systems):
        by_system.setdefault(system, []).append(i)
    out = {name: {"tau": [], "rho": []} for name in metrics}
    used = 0
    for rows in by_system.values():
        if len(rows) < 2:
            continue
        h = [human[i] for i in rows]
        try:
            per_metric = {
                name: (
                    kendall_tau_b(ScoredSegments.of([scores[i] for i in rows], h)),
                    spearman_rho(ScoredSegments.of([scores[i] for i in rows], h)),
                )
                for name, scores in metrics.items()
            }
        except ValueError:
            continue  # degenerate system group
        used += 1
        for name, (tau, rho) in per_metric.items():
            out[name]["tau"].append(tau)
            out[name]["rho"].append(rho)
    if used == 0:
        raise ValidationError("no system group supports a correlation (all degenerate or too small)")
    return (
        {
            name: {
                "tau": sum(vals["tau"]) / used,
                "rho": sum(vals["rho"]) / used,
            }
            for name, vals in out.items()
        },
        used,
    )


def cmd_evaluate(args: argparse.Namespace) -> int:
    systems, human, metrics = _read_ratings(args.ratings)
    report: dict = {"n_segments": len(human)}
    if args.per_system:
        correlations, used = _per_system_correlations(systems, human, metrics)
        report["grouping"] = "per_system_average"
        report["systems_used"] = used
        report["metrics"] = correlations
        report["pairwise"] = []  # a single n is only well-defined when pooled
    else:
        report["grouping"] = "pooled"
        report["metrics"] = _pooled_correlations(human, metrics)
        names = list(metrics.keys())
        pairwise = []
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                a, b = names[i], names[j]
                entry: dict = {"a": a, "b": b}
                try:
                    r12 = report["metrics"][a]["tau"]
                    r13 = report["metrics"][b]["tau"]
                    r23 = kendall_tau_b(ScoredSegments.of(metrics[a], metrics[b]))
                    t, p = williams_test(r12, r13, r23, len(human))
                    entry["t"] = t
                    entry["p"] = p
                except ValueError as exc:
                    entry["error"] = str(exc)
                pairwise.append(entry)
        report["pairwise"] = pairwise

    Path(args.out).write_text(json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    figures = _figures_dir(args, args.out)
    if figures is not None:
        from .report import render_correlation_figure

        for path in render_correlation_figure(report, figures):
            print(f"figure: {path}")
    print(f"wrote evaluation report to {args.out}")
    return EXIT_OK


def _read_score_lines(path: str) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise ValidationError(f"non-numeric score at {path}:{line_no}") from exc
    if not values:
        raise ValidationError(f"no scores in {path}")
    return values


def cmd_rescale(args: argparse.Namespace) -> int:
    explicit = args.lower is not None or args.upper is not None
    from_files = args.low_scores or args.high_scores
    if explicit and from_files:
        raise ValidationError("pass either --lower/--upper or --low-scores/--high-scores, not both")
    if explicit:
        if args.lower is None or args.upper is None:
            raise ValidationError("--lower and --upper must be given together")
        try:
            bounds = RescaleBounds(lower=args.lower, upper=args.upper)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    elif from_files:
        if not (args.low_scores and args.high_scores):
            raise ValidationError("--low-scores and --high-scores must be given together")
        try:
            bounds = bounds_from_samples(_read_score_lines(args.low_scores), _read_score_lines(args.high_scores))
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    else:
        raise ValidationError("rescale needs bounds: --lower/--upper or --low-scores/--high-scores")

    scores = _read_score_lines(args.scores)
    rescaled = [rescale(s, bounds) for s in scores]
    lines = "\n".join(repr(v) for v in rescaled) + "\n"
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
        print(f"rescaled {len(scores)} scores into {args.out} (lower={bounds.lower}, upper={bounds.upper})")
    else:
        sys.stdout.write(lines)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sevsynth",
        description="Synthesize severity-labeled training triples from retrieval-augmented perturbations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-idf", help="build and save the IDF table for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_idf)

    p = sub.add_parser("build-index-check", help="validate an EMB1 file against its corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_build_index_check)

    p = sub.add_parser("synthesize", help="emit the fingerprint manifest of all proposal ops")
    _add_config_arguments(p)
    p.add_argument("--out", required=True, help="manifest JSONL path")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("label", help="severity-label every op in a manifest")
    _add_config_arguments(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("emit-dataset", help="run the full pipeline and emit the dataset")
    _add_config_arguments(p)
    p.add_argument("--dataset", required=True, help="output JSONL path")
    p.add_argument("--stats", required=True, help="output stats JSON path")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--figures", help="directory for stats figures (default: <stats>_figures)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_emit_dataset)

    p = sub.add_parser("evaluate", help="rank correlations and pairwise significance from a ratings TSV")
    p.add_argument("--ratings", required=True, help="TSV: segment_id, system, human_score, <metric columns>")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--per-system", action="store_true", help="average correlations per system instead of pooling")
    p.add_argument("--figures", help="directory for figures (default: <out>_figures)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rescale", help="map raw scores onto the reporting range")
    p.add_argument("--scores", required=True, help="input scores, one per line")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--lower", type=float, help="explicit lower anchor")
    p.add_argument("--upper", type=float, help="explicit upper anchor")
    p.add_argument("--low-scores", help="file of scores for random unrelated pairs")
    p.add_argument("--high-scores", help="file of scores for near-identical pairs")
    p.set_defaults(func=cmd_rescale)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ValidationError, ValueError, OSError) as exc:
        # bad inputs anywhere (config, files, degenerate rankings) are validation failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
