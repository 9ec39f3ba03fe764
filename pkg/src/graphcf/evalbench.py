"""Error metrics, the kNN sweep, the learned-graph experiment and report I/O."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch
from .graph import WeightedGraph, edge_count
from .ingest import RatingsDataset, to_matrix
from .learn import LearnConfig, canonical_metric, knn_graph, learn_graph, similarity_weights
from .predict import SOURCES, predict_many

COLUMNS = ("label", "mae", "rmse", "complexity", "fallbacks", "time")

# MAE and edge counts reported for the MovieLens benchmark (trend reference only)
PUBLISHED_MAE = {
    "2NN": 1.1641, "3NN": 1.1117, "4NN": 1.1184, "5NN": 1.1124, "6NN": 1.0937,
    "7NN": 1.0842, "8NN": 1.0787, "9NN": 1.0753, "10NN": 1.0685, "learned": 1.0508,
}
PUBLISHED_COMPLEXITY = {
    "2NN": 1886, "3NN": 2502, "4NN": 3336, "5NN": 4170, "6NN": 5004,
    "7NN": 5838, "8NN": 6672, "9NN": 7506, "10NN": 8340, "learned": 2027,
}


def _pair(pred, truth):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if len(p) != len(t):
        raise LengthMismatch(f"{len(p)} predictions vs {len(t)} targets")
    if len(p) == 0:
        raise EmptyInput("no predictions to score")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


@dataclass
class EvalRow:
    label: str
    mae: float
    rmse: float
    graph_complexity: int
    fallback_counts: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def key(self):
        """Row identity without the timing column."""
        return (self.label, self.mae, self.rmse, self.graph_complexity,
                tuple(sorted(self.fallback_counts.items())))


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def row(self, label) -> EvalRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def extend(self, other: "EvalReport") -> "EvalReport":
        self.rows.extend(other.rows)
        return self


def evaluate_graph(g: WeightedGraph, train_matrix, test: RatingsDataset, label: str,
                   started: float | None = None) -> EvalRow:
    """Predict every test pair user-based on ``g`` and score it."""
    if len(test) == 0:
        raise EmptyInput("test split is empty")
    started = time.perf_counter() if started is None else started
    preds = predict_many(g, train_matrix, test.user_indices(), test.item_indices())
    values = np.array([p.value for p in preds])
    counts = {s: 0 for s in SOURCES}
    for p in preds:
        counts[p.source] += 1
    row = EvalRow(label, mae(values, test.ratings), rmse(values, test.ratings),
                  edge_count(g), counts, time.perf_counter() - started)
    assert row.rmse >= row.mae - 1e-12
    return row


def knn_baseline_graph(features, k, metric="cosine") -> WeightedGraph:
    """kNN topology weighted by floored cosine similarity."""
    return similarity_weights(knn_graph(features, k, metric), features)


def run_knn_sweep(train: RatingsDataset, test: RatingsDataset, k_values=range(2, 11),
                  metric="cosine") -> EvalReport:
    metric = canonical_metric(metric)
    if len(test) == 0:
        raise EmptyInput("test split is empty")
    m = to_matrix(train)
    feats = m.dense()
    report = EvalReport()
    for k in k_values:
        t0 = time.perf_counter()
        g = knn_baseline_graph(feats, int(k), metric)
        report.rows.append(evaluate_graph(g, m, test, f"{int(k)}NN", started=t0))
    return report


def learn_and_evaluate(train: RatingsDataset, test: RatingsDataset, cfg: LearnConfig,
                       label="learned"):
    """Returns ``(row, refine_result)`` so callers can keep the graph."""
    if len(test) == 0:
        raise EmptyInput("test split is empty")
    t0 = time.perf_counter()
    m = to_matrix(train)
    result = learn_graph(m.dense(), cfg)
    return evaluate_graph(result.graph, m, test, label, started=t0), result


def run_learned(train: RatingsDataset, test: RatingsDataset, cfg: LearnConfig) -> EvalReport:
    row, _ = learn_and_evaluate(train, test, cfg)
    return EvalReport([row])


def _format_fallbacks(counts):
    return ";".join(f"{k}={counts[k]}" for k in sorted(counts))


def _parse_fallbacks(text):
    if not text:
        return {}
    out = {}
    for part in text.split(";"):
        k, v = part.split("=")
        out[k] = int(v)
    return out


def emit_report(report: EvalReport, fmt="csv") -> str:
    """Render as ``csv`` (lossless) or ``table`` (for terminals)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in report.rows:
            if any(c in r.label for c in "\0\r\n"):
                raise ValueError(f"label {r.label!r} cannot be stored in a CSV report")
            w.writerow([r.label, repr(float(r.mae)), repr(float(r.rmse)), r.graph_complexity,
                        _format_fallbacks(r.fallback_counts), repr(float(r.wall_time))])
        return buf.getvalue()
    if fmt == "table":
        head = f"{'label':<10} {'mae':>8} {'rmse':>8} {'complexity':>10}  {'fallbacks':<48} {'time':>8}"
        lines = [head]
        for r in report.rows:
            lines.append(
                f"{r.label:<10} {r.mae:>8.4f} {r.rmse:>8.4f} {r.graph_complexity:>10d}  "
                f"{_format_fallbacks(r.fallback_counts):<48} {r.wall_time:>8.2f}"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> EvalReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return EvalReport()
    if tuple(header) != COLUMNS:
        raise ValueError(f"unexpected report header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        label, m, r, c, fb, t = rec
        rows.append(EvalRow(label, float(m), float(r), int(c), _parse_fallbacks(fb), float(t)))
    return EvalReport(rows)


def strip_timing(csv_text: str) -> str:
    """CSV report with the time column dropped, for determinism checks."""
    out = []
    for line in csv_text.splitlines():
        out.append(line.rsplit(",", 1)[0])
    return "\n".join(out) + "\n"
