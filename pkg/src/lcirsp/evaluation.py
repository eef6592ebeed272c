"""Metrics, Pearson task grouping, improvement ratios and report emission.

Row/column order of confusion matrices and report tables is the fixed class
order (LK, RLC, LLC). Reports are written with deterministic formatting so
reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantSeries,
    EmptyMatrix,
    LcirspError,
    LengthMismatch,
    ZeroBaseline,
)
from .kinematics import INDICATOR_NAMES
from .labeling import CLASS_ORDER
from .models import TaskSet
from . import svgplot


class IoError(LcirspError):
    pass


@dataclass
class ConfusionMatrix:
    counts: np.ndarray                     # (3, 3) int64, rows = true class
    classes: tuple = CLASS_ORDER

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if self.counts.shape != (n, n):
            raise LengthMismatch(f"confusion matrix must be {n}x{n}")

    @classmethod
    def from_predictions(cls, true_idx, pred_idx, classes=CLASS_ORDER):
        n = len(classes)
        counts = np.zeros((n, n), dtype=np.int64)
        for t, p in zip(np.asarray(true_idx), np.asarray(pred_idx)):
            counts[t, p] += 1
        return cls(counts, classes)

    @property
    def total(self):
        return int(self.counts.sum())


def classification_metrics(cm: ConfusionMatrix):
    """(accuracy, {class: precision}, {class: recall}, {class: degenerate?}).

    Zero-denominator classes report 0 with their flag set.
    """
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    accuracy = float(np.trace(counts) / total)
    precision, recall, degenerate = {}, {}, {}
    for i, name in enumerate(cm.classes):
        tp = counts[i, i]
        col = counts[:, i].sum()
        row = counts[i, :].sum()
        degenerate[name] = bool(col == 0 or row == 0)
        precision[name] = float(tp / col) if col > 0 else 0.0
        recall[name] = float(tp / row) if row > 0 else 0.0
    return accuracy, precision, recall, degenerate


def regression_metrics(predictions, targets):
    """(MAE, RMSE) over flattened prediction/target pairs."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise LengthMismatch(f"predictions {p.shape} vs targets {t.shape}")
    err = p - t
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err * err)))


def pearson(x, y):
    """Centered product-moment correlation of two equal-length series."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"{x.shape} vs {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeries("pearson undefined for a constant series")
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


def correlation_matrix(series_by_name):
    """(names, matrix) of pairwise Pearson coefficients; diagonal is 1."""
    names = tuple(series_by_name)
    n = len(names)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            r = pearson(series_by_name[names[i]], series_by_name[names[j]])
            mat[i, j] = mat[j, i] = r
    return names, mat


def correlation_grouping(series_or_matrix, threshold=0.2, names=None):
    """TaskSet from the |r| > threshold adjacency over the indicators.

    Related = union of non-singleton connected components; independent =
    singletons. Accepts either {name: series} or a precomputed square matrix
    plus `names`.
    """
    if isinstance(series_or_matrix, dict):
        names, mat = correlation_matrix(series_or_matrix)
    else:
        mat = np.asarray(series_or_matrix, dtype=np.float64)
        if names is None:
            names = INDICATOR_NAMES[: len(mat)]
    n = len(names)
    adjacency = (np.abs(mat) > threshold) & ~np.eye(n, dtype=bool)
    seen, components = set(), []
    for start in range(n):
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in range(n):
                if adjacency[u, v] and v not in seen:
                    seen.add(v)
                    stack.append(v)
        components.append(sorted(comp))
    related, independent = [], []
    for comp in components:
        (related if len(comp) > 1 else independent).extend(comp)
    return TaskSet(
        related=tuple(names[i] for i in sorted(related)),
        independent=tuple(names[i] for i in sorted(independent)),
    )


def improvement_ratio(m, s):
    """p = 1 - m/s: positive when the multi-task metric m beats baseline s."""
    if s == 0:
        raise ZeroBaseline("single-task metric is zero")
    return 1.0 - m / s


# ---------------------------------------------------------------------------
# report containers and emission


@dataclass
class ClassificationReport:
    model: str
    window_length: int
    confusion: ConfusionMatrix
    history_csv: str | None = None

    def metrics(self):
        accuracy, precision, recall, degenerate = classification_metrics(self.confusion)
        return {
            "model": self.model,
            "window_length": self.window_length,
            "accuracy": accuracy,
            "precision": precision,
            "recall": recall,
            "degenerate": degenerate,
            "confusion": self.confusion.counts.tolist(),
            "classes": list(self.confusion.classes),
        }


@dataclass
class RegressionReport:
    model: str
    task_mae: dict = field(default_factory=dict)   # task -> MAE (physical units)
    task_rmse: dict = field(default_factory=dict)

    def metrics(self):
        return {
            "model": self.model,
            "mae": dict(self.task_mae),
            "rmse": dict(self.task_rmse),
        }


def _fmt(v):
    return repr(float(v))


def write_classification_csv(reports, path):
    """Table-4-shaped CSV: one row per model x class plus overall accuracy."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "window_length", "class", "precision", "recall", "accuracy"])
        for rep in reports:
            m = rep.metrics()
            for cls in rep.confusion.classes:
                w.writerow([
                    m["model"], m["window_length"], cls,
                    _fmt(m["precision"][cls]), _fmt(m["recall"][cls]),
                    _fmt(m["accuracy"]),
                ])


def write_regression_csv(reports, path):
    """Table-5-shaped CSV: metric rows per model across task columns."""
    tasks = sorted({t for rep in reports for t in rep.task_mae})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "metric", *tasks])
        for rep in reports:
            w.writerow([rep.model, "MAE",
                        *[_fmt(rep.task_mae[t]) if t in rep.task_mae else "" for t in tasks]])
            w.writerow([rep.model, "RMSE",
                        *[_fmt(rep.task_rmse[t]) if t in rep.task_rmse else "" for t in tasks]])


def improvement_table(mtl_reports, single_reports):
    """Table-6-shaped rows: per (mtl model vs single model) and task, the
    improvement ratio of MAE and RMSE."""
    singles = {rep.model: rep for rep in single_reports}
    rows = []
    for rep in mtl_reports:
        base_name = rep.model.replace("mtl-", "", 1)
        base = singles.get(base_name)
        if base is None:
            continue
        for task in rep.task_mae:
            if task not in base.task_mae:
                continue
            rows.append({
                "comparison": f"{rep.model} vs {base_name}",
                "task": task,
                "mae_improvement": improvement_ratio(rep.task_mae[task], base.task_mae[task]),
                "rmse_improvement": improvement_ratio(rep.task_rmse[task], base.task_rmse[task]),
            })
    return rows


def write_improvement_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["comparison", "task", "mae_improvement", "rmse_improvement"])
        for r in rows:
            w.writerow([r["comparison"], r["task"],
                        _fmt(r["mae_improvement"]), _fmt(r["rmse_improvement"])])


def emit_report(reports, out_dir, accuracy_by_length=None, correlation=None,
                formats=("json", "csv")):
    """Write JSON and/or CSV tables and SVG plots for a set of report objects.

    `accuracy_by_length`: {model: [(length, accuracy), ...]} for the
    accuracy-vs-window-length figure; `correlation`: (names, matrix) heat map;
    `formats`: any subset of {"json", "csv"}. Raises IoError on an empty
    report list.
    """
    if not reports and not accuracy_by_length and correlation is None:
        raise IoError("nothing to report")
    os.makedirs(out_dir, exist_ok=True)
    plots_dir = os.path.join(out_dir, "plots")
    classification = [r for r in reports if isinstance(r, ClassificationReport)]
    regression = [r for r in reports if isinstance(r, RegressionReport)]
    written = []

    if "json" in formats:
        doc = {"classification": [r.metrics() for r in classification],
               "regression": [r.metrics() for r in regression]}
        json_path = os.path.join(out_dir, "report.json")
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(json_path)

    if classification and "csv" in formats:
        path = os.path.join(out_dir, "classification.csv")
        write_classification_csv(classification, path)
        written.append(path)
    if regression and "csv" in formats:
        path = os.path.join(out_dir, "regression.csv")
        write_regression_csv(regression, path)
        written.append(path)
        mtl = [r for r in regression if r.model.startswith("mtl-")]
        single = [r for r in regression if not r.model.startswith("mtl-")]
        rows = improvement_table(mtl, single)
        if rows:
            path = os.path.join(out_dir, "improvement.csv")
            write_improvement_csv(rows, path)
            written.append(path)
    if accuracy_by_length:
        os.makedirs(plots_dir, exist_ok=True)
        path = os.path.join(plots_dir, "accuracy_vs_length.svg")
        with open(path, "w") as fh:
            fh.write(svgplot.line_plot(
                accuracy_by_length, title="Test accuracy vs input window length",
                x_label="window length (frames)", y_label="accuracy",
            ))
        written.append(path)
    if correlation is not None:
        os.makedirs(plots_dir, exist_ok=True)
        names, mat = correlation
        path = os.path.join(plots_dir, "correlation_heatmap.svg")
        with open(path, "w") as fh:
            fh.write(svgplot.heatmap(
                np.asarray(mat), list(names), list(names),
                title="Pearson correlation of status indicators",
            ))
        written.append(path)
    return written
