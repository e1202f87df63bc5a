"""CSV, JSON and markdown writers for evaluation results.

Numbers are written with ``repr`` so reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .abe import analogy_size_histogram
from .evaluation import ComparisonOutcome, EvaluationSummary, boxplot_summary


def _num(v) -> str:
    return repr(float(v))


def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_summary_csv(summaries: Sequence[EvaluationSummary], path, masks: dict | None = None) -> None:
    header = ["dataset", "method", "n", "mmre", "mdmre", "pred25"]
    if masks is not None:
        header.append("mask")
    rows = []
    for s in summaries:
        row = [s.dataset, s.method, len(s.folds), _num(s.mmre), _num(s.mdmre), _num(s.pred25)]
        if masks is not None:
            row.append(" ".join(str(j) for j in masks[(s.dataset, s.method)]))
        rows.append(row)
    _write(Path(path), header, rows)


def write_folds_csv(summaries: Sequence[EvaluationSummary], path) -> None:
    rows = [
        [
            s.dataset,
            s.method,
            f.project_id,
            _num(f.actual),
            _num(f.predicted),
            _num(f.residual),
            _num(f.mre),
            "" if f.analogy_size is None else f.analogy_size,
            ";".join(f.flags),
        ]
        for s in summaries
        for f in s.folds
    ]
    header = ["dataset", "method", "project_id", "actual", "predicted", "abs_residual", "mre", "analogy_size", "flags"]
    _write(Path(path), header, rows)


def write_histogram_csv(summaries: Sequence[EvaluationSummary], path) -> None:
    rows = []
    for s in summaries:
        if s.analogy_sizes:
            for size, count in analogy_size_histogram(s.analogy_sizes).items():
                rows.append([s.dataset, s.method, size, count])
    _write(Path(path), ["dataset", "method", "size", "count"], rows)


def write_boxplot_csv(summaries: Sequence[EvaluationSummary], path) -> None:
    rows = []
    for s in summaries:
        b = boxplot_summary(s.residuals)
        rows.append(
            [s.dataset, s.method, _num(b.minimum), _num(b.q1), _num(b.median), _num(b.q3), _num(b.maximum),
             " ".join(_num(v) for v in b.outliers)]
        )
    _write(Path(path), ["dataset", "method", "min", "q1", "median", "q3", "max", "outliers"], rows)


def write_summary_json(summaries: Sequence[EvaluationSummary], path, masks: dict | None = None) -> None:
    out = []
    for s in summaries:
        d = s.to_dict()
        if masks is not None:
            d["mask"] = list(masks[(s.dataset, s.method)])
        out.append(d)
    Path(path).write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")


def read_summary_json(path) -> list[EvaluationSummary]:
    return [EvaluationSummary.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def wtl_csv(outcome: ComparisonOutcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "win", "tie", "loss", "win_minus_loss"])
    for r in outcome.table():
        w.writerow([r["method"], r["win"], r["tie"], r["loss"], r["win_minus_loss"]])
    return buf.getvalue()


def _pivot(summaries, measure, datasets, methods) -> list[str]:
    cell = {(s.dataset, s.method): s.measure(measure) for s in summaries}
    scale = 1.0 if measure == "pred25" else 100.0
    lines = ["| Dataset | " + " | ".join(methods) + " |", "|---" * (len(methods) + 1) + "|"]
    for ds in datasets:
        vals = [f"{scale * cell[(ds, m)]:.1f}" for m in methods]
        lines.append(f"| {ds} | " + " | ".join(vals) + " |")
    return lines


def markdown_report(summaries: Sequence[EvaluationSummary], outcome: ComparisonOutcome | None, seed: int) -> str:
    datasets = list(dict.fromkeys(s.dataset for s in summaries))
    methods = list(dict.fromkeys(s.method for s in summaries))
    lines = [f"# Leave-one-out results (seed {seed})", "", "## MMRE (%)", ""]
    lines += _pivot(summaries, "mmre", datasets, methods)
    lines += ["", "## MdMRE (%)", ""]
    lines += _pivot(summaries, "mdmre", datasets, methods)
    lines += ["", "## pred(0.25) (%)", ""]
    lines += _pivot(summaries, "pred25", datasets, methods)
    if outcome is not None:
        lines += ["", "## Win-tie-loss", "", "| Method | win | tie | loss | win-loss |", "|---|---|---|---|---|"]
        for r in outcome.table():
            lines.append(f"| {r['method']} | {r['win']} | {r['tie']} | {r['loss']} | {r['win_minus_loss']} |")
    return "\n".join(lines) + "\n"
