"""Report bundle: metrics.json plus CSV data and SVG renders derived from it."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evaluation import EvaluationReport, write_confusion_csv, write_metrics_json, write_roc_csv
from .selection import CorrelationMatrix, write_correlation_csv

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
CELL = 48
MARGIN = 170


@dataclass
class ReportBundle:
    out_dir: Path
    files: list[Path] = field(default_factory=list)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def _blue(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r = round(255 - t * (255 - 8))
    g = round(255 - t * (255 - 48))
    b = round(255 - t * (255 - 107))
    return f"#{r:02x}{g:02x}{b:02x}"


def _diverging(v: float) -> str:
    v = min(max(v, -1.0), 1.0)
    if v >= 0:
        return f"#ff{round(255 - 200 * v):02x}{round(255 - 200 * v):02x}"
    return f"#{round(255 + 200 * v):02x}{round(255 + 200 * v):02x}ff"


def _heatmap(row_labels, col_labels, fills, texts, title: str, x_title: str, y_title: str) -> str:
    n_r, n_c = len(row_labels), len(col_labels)
    width = MARGIN + n_c * CELL + 20
    height = MARGIN + n_r * CELL + 20
    body = [f'<text x="{width // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{MARGIN + n_c * CELL // 2}" y="{height - 4}" text-anchor="middle">{escape(x_title)}</text>',
            f'<text x="12" y="{MARGIN + n_r * CELL // 2}" text-anchor="middle" '
            f'transform="rotate(-90 12 {MARGIN + n_r * CELL // 2})">{escape(y_title)}</text>']
    for j, lab in enumerate(col_labels):
        x = MARGIN + j * CELL + CELL // 2
        body.append(f'<text x="{x}" y="{MARGIN - 6}" text-anchor="start" '
                    f'transform="rotate(-60 {x} {MARGIN - 6})">{escape(lab)}</text>')
    for i, lab in enumerate(row_labels):
        y = MARGIN + i * CELL + CELL // 2 + 4
        body.append(f'<text x="{MARGIN - 6}" y="{y}" text-anchor="end">{escape(lab)}</text>')
        for j in range(n_c):
            x0, y0 = MARGIN + j * CELL, MARGIN + i * CELL
            body.append(f'<rect x="{x0}" y="{y0}" width="{CELL}" height="{CELL}" '
                        f'fill="{fills[i][j]}" stroke="#999"/>')
            body.append(f'<text x="{x0 + CELL // 2}" y="{y0 + CELL // 2 + 4}" '
                        f'text-anchor="middle">{escape(texts[i][j])}</text>')
    return _svg(width, height, body)


def confusion_svg(report: EvaluationReport) -> str:
    counts = report.confusion.counts
    rows = counts.sum(axis=1, keepdims=True)
    share = np.divide(counts, rows, out=np.zeros(counts.shape, dtype=float), where=rows > 0)
    fills = [[_blue(float(v)) for v in r] for r in share]
    texts = [[str(int(v)) for v in r] for r in counts]
    return _heatmap(report.labels, report.labels, fills, texts,
                    f"Confusion matrix (accuracy {_fmt(report.accuracy)})", "predicted", "true")


def correlation_svg(corr: CorrelationMatrix) -> str:
    fills = [[_diverging(float(v)) for v in r] for r in corr.values]
    texts = [[_fmt(float(v)) for v in r] for r in corr.values]
    return _heatmap(corr.names, corr.names, fills, texts, "Feature correlation", "", "")


def roc_svg(report: EvaluationReport) -> str:
    size, pad = 360, 50
    width, height = size + 2 * pad + 180, size + 2 * pad

    def pt(f, t):
        return f"{pad + f * size:.2f},{pad + (1 - t) * size:.2f}"

    body = [f'<text x="{pad + size // 2}" y="20" text-anchor="middle" font-size="14">ROC (one-vs-rest)</text>',
            f'<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="black"/>',
            f'<polyline points="{pt(0, 0)} {pt(1, 1)}" fill="none" stroke="#aaa" stroke-dasharray="4 3"/>',
            f'<text x="{pad + size // 2}" y="{height - 12}" text-anchor="middle">false positive rate</text>',
            f'<text x="14" y="{pad + size // 2}" text-anchor="middle" '
            f'transform="rotate(-90 14 {pad + size // 2})">true positive rate</text>']
    for i, lab in enumerate(report.labels):
        if lab not in report.roc:
            continue
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(pt(f, t) for f, t in report.roc[lab])
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
        ly = pad + 14 + 16 * i
        body.append(f'<line x1="{pad + size + 14}" y1="{ly - 4}" x2="{pad + size + 30}" y2="{ly - 4}" '
                    f'stroke="{colour}" stroke-width="2"/>')
        body.append(f'<text x="{pad + size + 34}" y="{ly}">{escape(lab)} (AUC {_fmt(report.auc[lab])})</text>')
    return _svg(width, height, body)


def render_report(report: EvaluationReport, corr: CorrelationMatrix | None, out_dir,
                  extra_metrics: dict | None = None) -> ReportBundle:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)

    def put(name: str, text: str | None = None):
        path = out / name
        if text is not None:
            path.write_text(text)
        bundle.files.append(path)
        return path

    write_metrics_json(report, put("metrics.json"), extra_metrics)
    write_confusion_csv(report.confusion, put("confusion.csv"))
    put("confusion.svg", confusion_svg(report))
    for lab in report.labels:
        if lab in report.roc:
            write_roc_csv(report.roc[lab], put(f"roc_{_slug(lab)}.csv"))
    put("roc.svg", roc_svg(report))
    if corr is not None:
        write_correlation_csv(corr, put("correlation.csv"))
        put("correlation.svg", correlation_svg(corr))
    return bundle
