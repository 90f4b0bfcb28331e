"""Per-iteration reports: CSV table and an SVG chart per joint."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..core import JointId

CSV_FIELDS = ("iteration", "joint", "coverage", "accuracy", "added", "discarded",
              "occluded", "corrected")


@dataclass
class JointCounts:
    added: int = 0
    discarded: int = 0
    occluded: int = 0
    corrected: int = 0


@dataclass
class IterationReport:
    iteration: int
    coverage: dict  # JointId -> fraction
    accuracy: dict | None = None  # JointId -> percent (None when unscorable)
    joint_counts: dict = field(default_factory=dict)  # JointId -> JointCounts
    stage_counts: dict = field(default_factory=dict)  # free-form per-stage tallies
    seconds: dict = field(default_factory=dict)  # stage -> wall-clock seconds
    active_before: int = 0
    active_after: int = 0

    @property
    def added(self) -> int:
        return sum(c.added for c in self.joint_counts.values())

    @property
    def discarded(self) -> int:
        return sum(c.discarded for c in self.joint_counts.values())

    @property
    def occluded(self) -> int:
        return sum(c.occluded for c in self.joint_counts.values())

    def reconciles(self) -> bool:
        return self.active_after == self.active_before + self.added - self.discarded - self.occluded

    def to_dict(self) -> dict:
        """JSON-ready form; timings are kept out of data files."""
        return {
            "iteration": self.iteration,
            "coverage": {j.name: v for j, v in self.coverage.items()},
            "accuracy": None if self.accuracy is None else
            {j.name: v for j, v in self.accuracy.items()},
            "counts": {j.name: vars(c) for j, c in self.joint_counts.items()},
            "stages": self.stage_counts,
            "active_before": self.active_before,
            "active_after": self.active_after,
        }


def _fmt(v):
    return "" if v is None else f"{v:.4f}"


def write_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in reports:
            for j in JointId:
                c = r.joint_counts.get(j, JointCounts())
                acc = None if r.accuracy is None else r.accuracy.get(j)
                w.writerow([r.iteration, j.name, _fmt(r.coverage.get(j, 0.0)), _fmt(acc),
                            c.added, c.discarded, c.occluded, c.corrected])


def _polyline(points, color, dash=False):
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
    extra = ' stroke-dasharray="6,4"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="2"{extra} points="{pts}"/>'


def svg_chart(reports, joint: JointId, baseline=None, width=360, height=240) -> str:
    """Iteration on x, percent on y; solid line coverage, dashed line accuracy."""
    rows = ([baseline] if baseline is not None else []) + list(reports)
    left, right, top, bottom = 44, 12, 24, 32
    pw, ph = width - left - right, height - top - bottom
    its = [r.iteration for r in rows] or [0]
    lo, hi = min(its), max(its)
    span = max(hi - lo, 1)

    def X(i):
        return left + pw * (i - lo) / span

    def Y(p):
        return top + ph * (1 - p / 100.0)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{left}" y="16" font-family="sans-serif" font-size="13">{joint.name}</text>',
             f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
             f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for p in (0, 50, 100):
        parts.append(f'<text x="{left - 6}" y="{Y(p) + 4:.1f}" font-family="sans-serif" '
                     f'font-size="10" text-anchor="end">{p}</text>')
    for i in sorted(set(its)):
        parts.append(f'<text x="{X(i):.1f}" y="{top + ph + 14}" font-family="sans-serif" '
                     f'font-size="10" text-anchor="middle">{i}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 4}" font-family="sans-serif" '
                 f'font-size="10" text-anchor="middle">iteration</text>')
    cov = [(X(r.iteration), Y(100.0 * r.coverage.get(joint, 0.0))) for r in rows]
    parts.append(_polyline(cov, "#1f77b4"))
    acc = [(X(r.iteration), Y(r.accuracy[joint])) for r in rows
           if r.accuracy is not None and r.accuracy.get(joint) is not None]
    if acc:
        parts.append(_polyline(acc, "#d62728", dash=True))
    parts.append(f'<text x="{left + pw - 4}" y="{top + 12}" font-family="sans-serif" font-size="10" '
                 f'text-anchor="end" fill="#1f77b4">coverage %</text>')
    if acc:
        parts.append(f'<text x="{left + pw - 4}" y="{top + 24}" font-family="sans-serif" '
                     f'font-size="10" text-anchor="end" fill="#d62728">accuracy %</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svgs(out_dir, reports, baseline=None, prefix="report_") -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for j in JointId:
        p = out_dir / f"{prefix}{j.name}.svg"
        p.write_text(svg_chart(reports, j, baseline), encoding="utf-8")
        paths.append(p)
    return paths
