"""Rendering of evaluation artifacts to text tables and structured JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = [
    "DOMAIN_NAMES",
    "ComparisonRow",
    "ComparisonReport",
    "render_table",
    "parse_report",
    "render_distribution",
]

DOMAIN_NAMES = {
    1: "External Relations",
    2: "Freedom and Democracy",
    3: "Political System",
    4: "Economy",
    5: "Welfare and Economy of Life",
    6: "Fabric of Society",
    7: "Social groups",
}


@dataclass(frozen=True)
class ComparisonRow:
    experiment: str
    source_accuracy: float
    source_f1: float
    target_accuracy: float
    target_f1: float

    def __post_init__(self):
        for name in ("source_accuracy", "source_f1", "target_accuracy", "target_f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        names = [r.experiment for r in self.rows]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate experiment names in {names}")


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def _f1_text(x: float) -> str:
    # F1 prints on the 0-100 scale without a percent sign, as in the result
    # tables this mirrors; structured output keeps the raw 0-1 value.
    return f"{100.0 * x:.2f}"


def render_table(report: ComparisonReport, format: str = "text") -> str:
    """Render the suite comparison, either as an aligned text table
    (accuracy as NN.NN%, F1 on the 0-100 scale) or as round-trippable JSON."""
    if not report.rows:
        raise ValueError("cannot render an empty report")
    if format == "structured":
        payload = {
            "metadata": report.metadata,
            "rows": [
                {
                    "experiment": r.experiment,
                    "source_accuracy": r.source_accuracy,
                    "source_f1": r.source_f1,
                    "target_accuracy": r.target_accuracy,
                    "target_f1": r.target_f1,
                }
                for r in report.rows
            ],
        }
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if format != "text":
        raise ValueError(f"unknown format {format!r} (want text or structured)")

    header = ("Experiment", "Source Accuracy", "Source F1", "Target Accuracy", "Target F1")
    cells = [header]
    for r in report.rows:
        cells.append(
            (
                r.experiment,
                _pct(r.source_accuracy),
                _f1_text(r.source_f1),
                _pct(r.target_accuracy),
                _f1_text(r.target_f1),
            )
        )
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append(
            "  ".join(
                cell.ljust(widths[j]) if j == 0 else cell.rjust(widths[j])
                for j, cell in enumerate(row)
            ).rstrip()
        )
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> ComparisonReport:
    """Inverse of render_table(format="structured")."""
    payload = json.loads(text)
    rows = tuple(
        ComparisonRow(
            experiment=r["experiment"],
            source_accuracy=r["source_accuracy"],
            source_f1=r["source_f1"],
            target_accuracy=r["target_accuracy"],
            target_f1=r["target_f1"],
        )
        for r in payload["rows"]
    )
    return ComparisonReport(rows=rows, metadata=payload.get("metadata", {}))


def render_distribution(dist: dict[int, float]) -> str:
    """One row per domain 1-7 with its canonical name and percentage."""
    unknown = sorted(set(dist) - set(DOMAIN_NAMES))
    if unknown:
        raise ValueError(f"unknown domains {unknown} in distribution")
    label_col = max(len(f"Domain {c} ({name})") for c, name in DOMAIN_NAMES.items())
    lines = []
    for c, name in DOMAIN_NAMES.items():
        label = f"Domain {c} ({name})"
        lines.append(f"{label.ljust(label_col)}  {_pct(dist.get(c, 0.0)).rjust(7)}")
    return "\n".join(lines) + "\n"
