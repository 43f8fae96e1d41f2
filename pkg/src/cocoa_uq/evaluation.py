"""Prediction Rejection Ratio: rejection curves and area ratios.

Instances are (uncertainty, quality) pairs. The estimator curve rejects
instances from the high-uncertainty end, one at a time, on the discrete grid
k = 0..K with K = floor(n * max_rejection); each point records the mean
quality of what is retained. The oracle rejects lowest quality first, the
random baseline is the constant mean. Areas are arithmetic means of the K+1
curve values (frozen so outputs are reproducible bit for bit), and

    PRR = (AUC_unc - AUC_rnd) / (AUC_oracle - AUC_rnd).

An estimator whose ordering matches the oracle's scores 1; one independent
of quality scores about 0. All qualities equal (or a grid too coarse to
reject anything) leaves PRR undefined, which raises rather than yielding
NaN. Ties in uncertainty break by record_id ascending, so runs are
deterministic everywhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence as Seq

from .errors import CocoaError, ConfigError, DataError, UndefinedPRRError

__all__ = [
    "ScoredInstance",
    "PRRReport",
    "rejection_curve",
    "prr",
    "aggregate_mean_prr",
    "report_to_dict",
    "write_curves_csv",
]

Curve = tuple[tuple[float, float], ...]

RANKINGS = ("estimator", "oracle", "random")


@dataclass(frozen=True)
class ScoredInstance:
    record_id: str
    uncertainty: float
    quality: float


@dataclass(frozen=True)
class PRRReport:
    estimator_curve: Curve
    oracle_curve: Curve
    random_curve: Curve
    auc_unc: float
    auc_oracle: float
    auc_rnd: float
    prr: float
    n: int
    max_rejection: float


def rejection_curve(
    instances: Seq[ScoredInstance],
    ranking: str,
    max_rejection: float = 0.5,
) -> Curve:
    """Curve points (k/n, mean quality retained) for k = 0..K rejected."""
    _check_instances(instances)
    if ranking not in RANKINGS:
        raise ConfigError(f"unknown ranking {ranking!r} (expected one of {RANKINGS})")
    if not 0.0 < max_rejection <= 1.0:
        raise ConfigError(f"max_rejection must be in (0, 1], got {max_rejection}")
    n = len(instances)
    # Capped at n - 1: the retained-quality mean is undefined once every
    # instance is rejected.
    k_max = min(int(n * max_rejection), n - 1)

    if ranking == "random":
        mean = sum(it.quality for it in instances) / n
        return tuple((k / n, mean) for k in range(k_max + 1))
    if ranking == "estimator":
        # Ascending uncertainty: rejection strips items from the tail.
        ordered = sorted(instances, key=lambda it: (it.uncertainty, it.record_id))
        qualities = [it.quality for it in ordered]
    else:
        qualities = sorted((it.quality for it in instances), reverse=True)

    prefix = [0.0]
    for q in qualities:
        prefix.append(prefix[-1] + q)
    return tuple((k / n, prefix[n - k] / (n - k)) for k in range(k_max + 1))


def prr(instances: Seq[ScoredInstance], max_rejection: float = 0.5) -> PRRReport:
    """Full PRR report with the three curves and their areas."""
    _check_instances(instances)
    first_q = instances[0].quality
    if all(it.quality == first_q for it in instances):
        raise UndefinedPRRError(
            "PRR is undefined: all instance qualities are equal"
        )
    estimator_curve = rejection_curve(instances, "estimator", max_rejection)
    oracle_curve = rejection_curve(instances, "oracle", max_rejection)
    random_curve = rejection_curve(instances, "random", max_rejection)
    auc_unc = _mean_of_curve(estimator_curve)
    auc_oracle = _mean_of_curve(oracle_curve)
    auc_rnd = _mean_of_curve(random_curve)
    denominator = auc_oracle - auc_rnd
    if denominator <= 0.0:
        raise UndefinedPRRError(
            "PRR is undefined: oracle and random areas coincide "
            f"(rejection grid has {len(estimator_curve)} point(s))"
        )
    value = (auc_unc - auc_rnd) / denominator
    if auc_unc > auc_oracle + 1e-12 or value > 1.0 + 1e-12:
        raise CocoaError("internal invariant violated: estimator area beats oracle")
    return PRRReport(
        estimator_curve=estimator_curve,
        oracle_curve=oracle_curve,
        random_curve=random_curve,
        auc_unc=auc_unc,
        auc_oracle=auc_oracle,
        auc_rnd=auc_rnd,
        prr=value,
        n=len(instances),
        max_rejection=max_rejection,
    )


def aggregate_mean_prr(
    reports: Mapping[str, PRRReport | None],
    task_groups: Mapping[str, Iterable[str]],
) -> dict[str, float]:
    """Unweighted mean PRR per declared task group.

    Group members absent from `reports` are ignored; a group with no
    evaluated member is an error, as is a member whose report is None
    (undefined PRR poisons its group).
    """
    out: dict[str, float] = {}
    for group, members in task_groups.items():
        members = list(members)
        if not members:
            raise ConfigError(f"task group {group!r} is empty")
        present = [name for name in members if name in reports]
        if not present:
            raise DataError(
                f"task group {group!r} has no evaluated datasets "
                f"(declared: {', '.join(members)})"
            )
        values = []
        for name in present:
            report = reports[name]
            if report is None:
                raise DataError(
                    f"task group {group!r}: dataset {name!r} has undefined PRR"
                )
            values.append(report.prr)
        out[group] = sum(values) / len(values)
    return out


def report_to_dict(report: PRRReport) -> dict:
    """JSON-ready view of a report."""
    return {
        "prr": report.prr,
        "auc_unc": report.auc_unc,
        "auc_oracle": report.auc_oracle,
        "auc_rnd": report.auc_rnd,
        "n": report.n,
        "max_rejection": report.max_rejection,
        "curve": {
            "rejection": [p[0] for p in report.estimator_curve],
            "estimator": [p[1] for p in report.estimator_curve],
            "oracle": [p[1] for p in report.oracle_curve],
            "random": [p[1] for p in report.random_curve],
        },
    }


def write_curves_csv(report: PRRReport, fh: IO[str]) -> None:
    """The plottable curve table: rejection,estimator,oracle,random."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["rejection", "estimator", "oracle", "random"])
    for (rejection, est), (_, oracle), (_, rnd) in zip(
        report.estimator_curve, report.oracle_curve, report.random_curve
    ):
        writer.writerow([repr(rejection), repr(est), repr(oracle), repr(rnd)])


def _mean_of_curve(curve: Curve) -> float:
    return sum(point[1] for point in curve) / len(curve)


def _check_instances(instances: Seq[ScoredInstance]) -> None:
    if len(instances) < 2:
        raise DataError(f"need at least 2 instances, got {len(instances)}")
    for it in instances:
        if not 0.0 <= it.quality <= 1.0:
            raise DataError(
                f"record {it.record_id!r}: quality {it.quality} outside [0,1]"
            )
        if not math.isfinite(it.uncertainty):
            raise DataError(
                f"record {it.record_id!r}: uncertainty {it.uncertainty} is not finite"
            )
