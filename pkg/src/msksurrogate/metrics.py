"""Evaluation measures and their pooled aggregation.

NRMSE divides the root-mean-squared error by the population SD of the
ground-truth series of that trial and feature, so a mean-predictor scores
exactly 1. Aggregates pool every (feature, trial) row of a category flat and
report Mean/SD/Max/Min/IQR blocks.

Constant ground-truth series have no defined r or NRMSE; such rows are kept
with a ``zero_variance`` status, excluded from aggregation, and reported via
a warning rather than as infinities.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyCategory, LengthMismatch, ZeroVariance
from .numerics import SummaryStats, summary

METRIC_NAMES = ("r", "nrmse", "rmse")

# byte-exact header of the aggregate CSV export
CSV_HEADER = "category,model,metric,mean,sd,max,min,iqr"

# byte-exact header of per-feature prediction-vs-truth curve files
CURVE_HEADER = "frame,truth,pred"


def _paired(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"pred has {pred.size} values, truth has {truth.size}")
    if pred.size < 2:
        raise LengthMismatch("series must have length >= 2")
    return pred, truth


def pearson_r(pred, truth) -> float:
    """Sample correlation between two non-constant series."""
    pred, truth = _paired(pred, truth)
    dp = pred - pred.mean()
    dt = truth - truth.mean()
    sp = np.sqrt(np.sum(dp * dp))
    st = np.sqrt(np.sum(dt * dt))
    if sp == 0.0 or st == 0.0:
        raise ZeroVariance("correlation of a constant series is undefined")
    return float(np.sum(dp * dt) / (sp * st))


def rmse(pred, truth) -> float:
    pred, truth = _paired(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def nrmse(pred, truth) -> float:
    """RMSE scaled by the population SD of the ground-truth series."""
    pred, truth = _paired(pred, truth)
    sd = float(np.std(truth))
    if sd == 0.0:
        raise ZeroVariance("NRMSE against a constant series is undefined")
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / sd)


@dataclass(frozen=True)
class MetricsRow:
    """Metrics of one output feature on one test trial (raw units)."""

    category: str
    trial_id: str
    feature: str
    r: float
    rmse: float
    nrmse: float
    status: str = "ok"  # ok | zero_variance


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[MetricsRow, ...]
    aggregates: dict[str, dict[str, SummaryStats]]


def rows_for_trial(pred, truth, feature_names, trial_id: str, category: str):
    """Per-feature metric rows for one trial's predictions against its truth."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    rows = []
    for j, name in enumerate(feature_names):
        p, t = pred[:, j], truth[:, j]
        e = rmse(p, t)
        if float(np.std(t)) == 0.0:
            warnings.warn(
                f"feature {name!r} of trial {trial_id!r} is constant; "
                "r/NRMSE undefined, row excluded from aggregation",
                stacklevel=2,
            )
            rows.append(
                MetricsRow(
                    category=category, trial_id=trial_id, feature=name,
                    r=float("nan"), rmse=e, nrmse=float("nan"),
                    status="zero_variance",
                )
            )
            continue
        rows.append(
            MetricsRow(
                category=category, trial_id=trial_id, feature=name,
                r=pearson_r(p, t), rmse=e, nrmse=nrmse(p, t),
            )
        )
    return rows


def aggregate(rows, category: str) -> dict[str, SummaryStats]:
    """Pool all (feature, trial) rows of one category and summarize each metric."""
    pooled = [row for row in rows if row.category == category and row.status == "ok"]
    if not pooled:
        raise EmptyCategory(f"no usable rows for category {category!r}")
    return {
        name: summary([getattr(row, name) for row in pooled]) for name in METRIC_NAMES
    }


def build_report(rows) -> MetricsReport:
    rows = tuple(rows)
    categories = sorted({row.category for row in rows})
    return MetricsReport(
        rows=rows,
        aggregates={cat: aggregate(rows, cat) for cat in categories},
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def report_to_json(report: MetricsReport) -> dict:
    return {
        "rows": [asdict(row) for row in report.rows],
        "aggregates": {
            cat: {metric: asdict(stats) for metric, stats in block.items()}
            for cat, block in report.aggregates.items()
        },
    }


def report_from_json(payload: dict) -> MetricsReport:
    rows = tuple(MetricsRow(**row) for row in payload["rows"])
    aggregates = {
        cat: {metric: SummaryStats(**stats) for metric, stats in block.items()}
        for cat, block in payload["aggregates"].items()
    }
    return MetricsReport(rows=rows, aggregates=aggregates)


def save_report(report: MetricsReport, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(report_to_json(report), fh, indent=2)
        fh.write("\n")


def load_report(path) -> MetricsReport:
    with open(Path(path)) as fh:
        return report_from_json(json.load(fh))


def report_to_csv(report: MetricsReport, path, model_label: str) -> None:
    """Aggregate table in the Mean/SD/Max/Min/IQR column layout."""
    with open(Path(path), "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        writer = csv.writer(fh)
        for cat in sorted(report.aggregates):
            for metric in METRIC_NAMES:
                s = report.aggregates[cat][metric]
                writer.writerow(
                    [cat, model_label, metric,
                     repr(s.mean), repr(s.sd), repr(s.max), repr(s.min), repr(s.iqr)]
                )


def write_curves_csv(pred, truth, frame_offset: int, path) -> None:
    """Prediction-vs-truth curve of one feature: columns frame, truth, pred."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"pred has {pred.size} values, truth has {truth.size}")
    with open(Path(path), "w", newline="") as fh:
        fh.write(CURVE_HEADER + "\n")
        writer = csv.writer(fh)
        for i in range(pred.size):
            writer.writerow([frame_offset + i, repr(float(truth[i])), repr(float(pred[i]))])
