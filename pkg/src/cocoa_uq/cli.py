"""Command-line surface: score, evaluate, ablate, synth, sim.

Every command reads an optional TOML config plus flags that mirror config
keys one to one; flags win. Exit codes: 0 success, 2 config error, 3 data
error, 4 provider error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence as Seq

from .config import RunConfig, load_config
from .errors import CocoaError, ConfigError, DataError, ProviderError
from .estimators import ESTIMATOR_IDS, score_record
from .evaluation import (
    PRRReport,
    ScoredInstance,
    aggregate_mean_prr,
    prr,
    report_to_dict,
    write_curves_csv,
)
from .provider import ProviderClient
from .records import GenerationRecord, dump_records, load_records
from .similarity import SimilaritySource, build_matrix, parse_backend
from .synth import generate_records

log = logging.getLogger("cocoa_uq")

# Estimators that need directional NLI probabilities, hence a live endpoint.
_NLI_ESTIMATORS = frozenset({"semantic_entropy", "num_sem_sets"})


def main(argv: Seq[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except ProviderError as exc:
        log.error("provider error: %s", exc)
        return 4
    except (DataError, OSError) as exc:
        log.error("data error: %s", exc)
        return 3
    return 0


# --- score -------------------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> None:
    config = load_config(args.config, _overrides(args))
    if not config.records or not config.output:
        raise ConfigError("score needs run.records and run.output")
    source = _make_source(config, config.estimators)
    records = list(load_records(config.records))
    estimators = config.estimators
    strategy = config.strategy
    temperature = config.sentence_sar_temperature

    def score_one(record: GenerationRecord) -> list[str]:
        shared: dict = {}
        lines = []
        for estimator in estimators:
            try:
                result = score_record(
                    record,
                    estimator,
                    strategy,
                    source,
                    sentence_sar_temperature=temperature,
                    shared=shared,
                )
            except CocoaError as exc:
                raise type(exc)(
                    f"estimator {estimator!r} on record {record.record_id!r}: {exc}"
                ) from None
            lines.append(
                json.dumps(
                    {
                        "record_id": result.record_id,
                        "estimator": result.estimator,
                        "strategy": result.strategy,
                        "value": result.value,
                        "flags": list(result.flags),
                    },
                    ensure_ascii=False,
                )
            )
        return lines

    per_record = _map_ordered(score_one, records, _worker_count(config))
    with open(config.output, "w", encoding="utf-8") as fh:
        for lines in per_record:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    log.info("scored %d records x %d estimators -> %s",
             len(records), len(estimators), config.output)


# --- evaluate ----------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> None:
    config = load_config(args.config, _overrides(args))
    datasets = _dataset_paths(config, need_scores=True)
    per_dataset: dict[str, dict[str, PRRReport]] = {}
    for name, (records_path, scores_path) in datasets.items():
        quality = _quality_by_record(records_path, config.strategy)
        grouped = _read_scores(scores_path, config.strategy)
        reports: dict[str, PRRReport] = {}
        for estimator, values in grouped.items():
            instances = []
            for record_id, value in values:
                if record_id not in quality:
                    raise DataError(
                        f"dataset {name!r}: scored record {record_id!r} "
                        f"is missing from {records_path}"
                    )
                instances.append(ScoredInstance(record_id, value, quality[record_id]))
            reports[estimator] = prr(instances, config.max_rejection)
        per_dataset[name] = reports

    groups = _group_means(per_dataset, config.task_groups)
    payload = {
        "strategy": config.strategy,
        "max_rejection": config.max_rejection,
        "datasets": {
            name: {est: report_to_dict(rep) for est, rep in reports.items()}
            for name, reports in per_dataset.items()
        },
        "task_groups": groups,
    }
    if config.report:
        with open(config.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("wrote %s", config.report)
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    if config.curves_dir:
        os.makedirs(config.curves_dir, exist_ok=True)
        for name, reports in per_dataset.items():
            for estimator, report in reports.items():
                path = os.path.join(config.curves_dir, f"{name}.{estimator}.csv")
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    write_curves_csv(report, fh)
        log.info("wrote curves to %s", config.curves_dir)


def _group_means(
    per_dataset: dict[str, dict[str, PRRReport]],
    task_groups: dict[str, list[str]],
) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for group, members in task_groups.items():
        present = [name for name in members if name in per_dataset]
        if not present:
            continue
        estimator_sets = [set(per_dataset[name]) for name in present]
        common = set.intersection(*estimator_sets)
        union = set.union(*estimator_sets)
        if union - common:
            raise DataError(
                f"task group {group!r}: estimators {sorted(union - common)} "
                "are missing from some member datasets"
            )
        out[group] = {
            est: aggregate_mean_prr(
                {name: per_dataset[name][est] for name in present},
                {group: present},
            )[group]
            for est in sorted(common)
        }
    return out


def _quality_by_record(records_path: str, strategy: str) -> dict[str, float]:
    quality = {}
    for record in load_records(records_path):
        if strategy not in record.quality:
            raise DataError(
                f"record {record.record_id!r} has no quality for strategy "
                f"{strategy!r}"
            )
        quality[record.record_id] = record.quality[strategy]
    return quality


def _read_scores(path: str, strategy: str) -> dict[str, list[tuple[str, float]]]:
    """Scores JSONL grouped by estimator, filtered to the run strategy
    (strategy-null lines are sample-set estimators and always join)."""
    grouped: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{line_no}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON: {exc}") from None
            try:
                record_id = obj["record_id"]
                estimator = obj["estimator"]
                line_strategy = obj.get("strategy")
                value = obj["value"]
            except (KeyError, TypeError):
                raise DataError(f"{where}: not a score line") from None
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DataError(f"{where}: value must be a finite number")
            if line_strategy is not None and line_strategy != strategy:
                continue
            grouped.setdefault(estimator, []).append((record_id, float(value)))
    if not grouped:
        raise DataError(f"{path}: no score lines for strategy {strategy!r}")
    return grouped


# --- ablate ------------------------------------------------------------------


def cmd_ablate(args: argparse.Namespace) -> None:
    config = load_config(args.config, _overrides(args))
    grid_estimators = config.ablation.estimators or config.estimators
    grid_backends = config.ablation.backends or [config.similarity.backend]
    grid_strategies = config.ablation.strategies or [config.strategy]
    output = config.ablation.output
    if not output:
        raise ConfigError("ablate needs ablation.output")
    datasets = _dataset_paths(config, need_scores=False)

    cells: dict[tuple[str, str, str, str], float] = {}
    for dataset, (records_path, _) in datasets.items():
        records = list(load_records(records_path))
        qualities: dict[str, dict[str, float]] = {}
        for strategy in grid_strategies:
            qualities[strategy] = {}
            for record in records:
                if strategy not in record.quality:
                    raise DataError(
                        f"record {record.record_id!r} has no quality for "
                        f"strategy {strategy!r}"
                    )
                qualities[strategy][record.record_id] = record.quality[strategy]
        for backend_spec in grid_backends:
            source = _make_source(config, grid_estimators, backend_spec)
            shared_by_record: list[dict] = [{} for _ in records]
            for estimator in grid_estimators:
                for strategy in grid_strategies:
                    instances = []
                    for record, shared in zip(records, shared_by_record):
                        result = score_record(
                            record,
                            estimator,
                            strategy,
                            source,
                            sentence_sar_temperature=config.sentence_sar_temperature,
                            shared=shared,
                        )
                        instances.append(
                            ScoredInstance(
                                record.record_id,
                                result.value,
                                qualities[strategy][record.record_id],
                            )
                        )
                    report = prr(instances, config.max_rejection)
                    cells[(estimator, backend_spec, strategy, dataset)] = report.prr

    dataset_names = list(datasets)
    with open(output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["estimator", "backend", "strategy", *dataset_names])
        for estimator in grid_estimators:
            for backend_spec in grid_backends:
                for strategy in grid_strategies:
                    row = [estimator, backend_spec, strategy]
                    row += [
                        repr(cells[(estimator, backend_spec, strategy, name)])
                        for name in dataset_names
                    ]
                    writer.writerow(row)
    log.info(
        "wrote %d-cell ablation grid -> %s",
        len(grid_estimators) * len(grid_backends) * len(grid_strategies) * len(dataset_names),
        output,
    )


# --- synth -------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> None:
    config = load_config(args.config, _overrides(args))
    output = config.synth.output
    if not output:
        raise ConfigError("synth needs synth.output")
    records = generate_records(config.synth)
    with open(output, "w", encoding="utf-8") as fh:
        dump_records(records, fh)
    log.info("wrote %d synthetic records -> %s", len(records), output)


# --- sim ---------------------------------------------------------------------


def cmd_sim(args: argparse.Namespace) -> None:
    config = load_config(args.config, _overrides(args))
    if not config.records or not config.output:
        raise ConfigError("sim needs run.records and run.output")
    backend = parse_backend(config.similarity.backend)
    if backend.kind == "precomputed":
        raise ConfigError("sim needs a computable backend, not precomputed:<name>")
    client = None
    if backend.kind == "provider":
        if not config.similarity.endpoint:
            raise ConfigError(
                f"backend {backend.name!r} needs a provider endpoint "
                "(set similarity.endpoint or COCOA_SIM_ENDPOINT)"
            )
        client = _make_client(config)
    records = list(load_records(config.records))

    def augment(record: GenerationRecord) -> GenerationRecord:
        seqs = ([record.greedy] if record.greedy else []) + list(record.samples)
        matrix = build_matrix(seqs, backend, client=client)
        blocks = dict(record.precomputed_sim or {})
        blocks[backend.name] = matrix.entries.tolist()
        return dataclasses.replace(record, precomputed_sim=blocks)

    augmented = _map_ordered(augment, records, _worker_count(config))
    with open(config.output, "w", encoding="utf-8") as fh:
        dump_records(augmented, fh)
    log.info(
        "augmented %d records with %r similarity -> %s",
        len(records), backend.name, config.output,
    )


# --- shared plumbing ----------------------------------------------------------


def _make_client(config: RunConfig) -> ProviderClient:
    sim = config.similarity
    return ProviderClient(
        sim.endpoint,
        batch_size=sim.batch_size,
        retries=sim.retries,
        backoff=sim.backoff,
        concurrency=sim.concurrency,
        cache_dir=sim.cache_dir,
        timeout=sim.timeout,
    )


def _make_source(
    config: RunConfig, estimators: Iterable[str], backend_spec: str | None = None
) -> SimilaritySource:
    backend = parse_backend(backend_spec or config.similarity.backend)
    needs_nli = any(e in _NLI_ESTIMATORS for e in estimators)
    needs_provider = backend.kind == "provider"
    client = None
    if needs_provider or needs_nli:
        if not config.similarity.endpoint:
            what = (
                f"backend {backend.name!r}"
                if needs_provider
                else "semantic clustering (semantic_entropy/num_sem_sets)"
            )
            raise ConfigError(
                f"{what} needs a provider endpoint "
                "(set similarity.endpoint or COCOA_SIM_ENDPOINT)"
            )
        client = _make_client(config)
    return SimilaritySource(backend, client)


def _worker_count(config: RunConfig) -> int:
    return config.workers or os.cpu_count() or 1


def _map_ordered(fn: Callable, items: list, workers: int) -> list:
    """Apply fn across items with a bounded pool; results in input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _dataset_paths(
    config: RunConfig, need_scores: bool
) -> dict[str, tuple[str, str | None]]:
    """Dataset name -> (records path, scores path), from the [datasets]
    table or the single-dataset keys."""
    out: dict[str, tuple[str, str | None]] = {}
    if config.datasets:
        for name, entry in config.datasets.items():
            if "records" not in entry:
                raise ConfigError(f"[datasets.{name}] needs a records path")
            if need_scores and "scores" not in entry:
                raise ConfigError(f"[datasets.{name}] needs a scores path")
            out[name] = (entry["records"], entry.get("scores"))
        return out
    if not config.records:
        raise ConfigError("no datasets configured: set run.records or [datasets]")
    if need_scores and not config.scores:
        raise ConfigError("no scores configured: set evaluation.scores or [datasets]")
    out[config.dataset_name] = (config.records, config.scores)
    return out


def _csv_list(raw: str) -> list[str]:
    return [piece.strip() for piece in raw.split(",") if piece.strip()]


def _overrides(args: argparse.Namespace) -> dict:
    return {
        dotted: getattr(args, attr)
        for attr, dotted in getattr(args, "override_map", {}).items()
        if getattr(args, attr, None) is not None
    }


# --- argument parsing ---------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocoa-uq",
        description="Uncertainty scoring and rejection-curve evaluation "
        "for LLM generation records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="score records with estimators")
    overrides = _add_common(score, cmd_score)
    _add_run_flags(score, overrides)
    _add_similarity_flags(score, overrides)

    evaluate = sub.add_parser("evaluate", help="compute PRR reports from scores")
    overrides = _add_common(evaluate, cmd_evaluate)
    _opt(evaluate, overrides, "--records", "run.records",
         help="records JSONL (single dataset)")
    _opt(evaluate, overrides, "--scores", "evaluation.scores",
         help="scores JSONL (single dataset)")
    _opt(evaluate, overrides, "--dataset-name", "evaluation.dataset_name")
    _opt(evaluate, overrides, "--strategy", "run.strategy", help="quality join strategy")
    _opt(evaluate, overrides, "--max-rejection", "evaluation.max_rejection", type=float)
    _opt(evaluate, overrides, "--report", "evaluation.report", help="report JSON path")
    _opt(evaluate, overrides, "--curves-dir", "evaluation.curves_dir")

    ablate = sub.add_parser(
        "ablate", help="PRR grid over estimators x backends x strategies"
    )
    overrides = _add_common(ablate, cmd_ablate)
    _opt(ablate, overrides, "--records", "run.records")
    _opt(ablate, overrides, "--dataset-name", "evaluation.dataset_name")
    _opt(ablate, overrides, "--estimators", "ablation.estimators", type=_csv_list)
    _opt(ablate, overrides, "--backends", "ablation.backends", type=_csv_list)
    _opt(ablate, overrides, "--strategies", "ablation.strategies", type=_csv_list)
    _opt(ablate, overrides, "--max-rejection", "evaluation.max_rejection", type=float)
    _opt(ablate, overrides, "--output", "ablation.output", help="grid CSV path")
    _add_similarity_flags(ablate, overrides)

    synth = sub.add_parser("synth", help="generate seeded synthetic records")
    overrides = _add_common(synth, cmd_synth)
    _opt(synth, overrides, "--seed", "synth.seed", type=int)
    _opt(synth, overrides, "--n-records", "synth.n_records", type=int)
    _opt(synth, overrides, "--m", "synth.m", type=int, help="samples per record")
    _opt(synth, overrides, "--vocab-size", "synth.vocab_size", type=int)
    _opt(synth, overrides, "--rho", "synth.rho", type=float,
         help="correlation between quality and planted consistency")
    _opt(synth, overrides, "--overlap", "synth.overlap", type=float,
         help="fixed overlap rate (overrides rho)")
    _opt(synth, overrides, "--regime", "synth.regime", help="confident or diffuse")
    _opt(synth, overrides, "--output", "synth.output")

    sim = sub.add_parser("sim", help="store similarity matrices in records")
    overrides = _add_common(sim, cmd_sim)
    _opt(sim, overrides, "--records", "run.records")
    _opt(sim, overrides, "--output", "run.output")
    _opt(sim, overrides, "--workers", "run.workers", type=int)
    _add_similarity_flags(sim, overrides)

    return parser


def _add_common(parser: argparse.ArgumentParser, func: Callable) -> dict[str, str]:
    parser.add_argument("--config", help="TOML config path")
    overrides: dict[str, str] = {}
    parser.set_defaults(func=func, override_map=overrides)
    return overrides


def _add_run_flags(parser: argparse.ArgumentParser, overrides: dict[str, str]) -> None:
    _opt(parser, overrides, "--records", "run.records", help="records JSONL path")
    _opt(parser, overrides, "--output", "run.output", help="scores JSONL path")
    _opt(parser, overrides, "--estimators", "run.estimators", type=_csv_list,
         help=f"comma list from: {', '.join(ESTIMATOR_IDS)}")
    _opt(parser, overrides, "--strategy", "run.strategy",
         help="greedy, random, best, or best_normalized")
    _opt(parser, overrides, "--workers", "run.workers", type=int)
    _opt(parser, overrides, "--sentence-sar-temperature",
         "run.sentence_sar_temperature", type=float)


def _add_similarity_flags(
    parser: argparse.ArgumentParser, overrides: dict[str, str]
) -> None:
    _opt(parser, overrides, "--backend", "similarity.backend")
    _opt(parser, overrides, "--endpoint", "similarity.endpoint")
    _opt(parser, overrides, "--batch-size", "similarity.batch_size", type=int)
    _opt(parser, overrides, "--retries", "similarity.retries", type=int)
    _opt(parser, overrides, "--backoff", "similarity.backoff", type=float)
    _opt(parser, overrides, "--concurrency", "similarity.concurrency", type=int)
    _opt(parser, overrides, "--cache-dir", "similarity.cache_dir")
    _opt(parser, overrides, "--timeout", "similarity.timeout", type=float)


def _opt(
    parser: argparse.ArgumentParser,
    overrides: dict[str, str],
    flag: str,
    dotted: str,
    **kwargs,
) -> None:
    attr = flag.lstrip("-").replace("-", "_")
    parser.add_argument(flag, dest=attr, **kwargs)
    overrides[attr] = dotted


if __name__ == "__main__":
    sys.exit(main())
