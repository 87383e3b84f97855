"""Report assembly and emission.

A scoring run produces per-transcript rows plus aggregate statistics
rendered in the "12.15% ± 11.01" house style. Reports serialize to JSON
(full) and CSV (rows); several runs merge into a comparison table sorted
by the chosen metric. Timestamps and other run facts are quarantined in a
metadata block so report bodies stay byte-comparable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .metrics import AggregateStat, aggregate

SCHEMA_VERSION = 1

METRIC_COLUMNS = ("wer", "mc_wer", "d_wer", "p_wer", "similarity")
COUNT_COLUMNS = ("concept_substitutions", "concept_deletions", "concept_insertions")


class ReportError(ValueError):
    """Inconsistent or incompatible report data."""


def format_percent(mean: float, std: float) -> str:
    """Render a mean/std pair the way the comparison tables print them."""
    return f"{mean * 100:.2f}% ± {std * 100:.2f}"


def format_stat(stat: AggregateStat) -> str:
    return format_percent(stat.mean, stat.std)


@dataclass
class TranscriptRow:
    transcript_id: str
    wer: float | None = None
    mc_wer: float | None = None
    d_wer: float | None = None
    p_wer: float | None = None
    similarity: float | None = None
    concept_substitutions: int | None = None
    concept_deletions: int | None = None
    concept_insertions: int | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "transcript_id": self.transcript_id,
            "wer": self.wer,
            "mc_wer": self.mc_wer,
            "d_wer": self.d_wer,
            "p_wer": self.p_wer,
            "similarity": self.similarity,
            "concept_substitutions": self.concept_substitutions,
            "concept_deletions": self.concept_deletions,
            "concept_insertions": self.concept_insertions,
            "errors": dict(sorted(self.errors.items())),
        }


@dataclass
class MetricReport:
    rows: list[TranscriptRow]
    aggregates: dict[str, AggregateStat]
    taxonomy: dict[str, dict[str, int]]
    metadata: dict
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> None:
        """Recompute aggregates from rows; any drift is a bug."""
        recomputed = compute_aggregates(self.rows)
        if set(recomputed) != set(self.aggregates):
            raise ReportError(
                f"aggregate metrics {sorted(self.aggregates)} do not match "
                f"rows ({sorted(recomputed)})"
            )
        for name, stat in recomputed.items():
            stored = self.aggregates[name]
            if (
                not math.isclose(stored.mean, stat.mean, rel_tol=1e-12, abs_tol=1e-15)
                or not math.isclose(stored.std, stat.std, rel_tol=1e-12, abs_tol=1e-15)
                or stored.n != stat.n
            ):
                raise ReportError(f"aggregate {name!r} is not derivable from rows")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "rows": [row.to_dict() for row in self.rows],
            "aggregates": {
                name: {"mean": stat.mean, "std": stat.std, "n": stat.n}
                for name, stat in sorted(self.aggregates.items())
            },
            "taxonomy": self.taxonomy,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = ["transcript_id", *METRIC_COLUMNS, *COUNT_COLUMNS, "errors"]
        writer.writerow(header)
        for row in self.rows:
            record = row.to_dict()
            writer.writerow(
                [
                    row.transcript_id,
                    *(
                        "" if record[name] is None else f"{record[name]:.6f}"
                        for name in METRIC_COLUMNS
                    ),
                    *(
                        "" if record[name] is None else record[name]
                        for name in COUNT_COLUMNS
                    ),
                    ";".join(f"{k}={v}" for k, v in sorted(row.errors.items())),
                ]
            )
        return buffer.getvalue()

    def write(self, directory) -> None:
        self.validate()
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(self.to_json(), encoding="utf-8")
        (directory / "report.csv").write_text(self.to_csv(), encoding="utf-8")

    @property
    def error_count(self) -> int:
        return sum(len(row.errors) for row in self.rows)


def compute_aggregates(rows: Sequence[TranscriptRow]) -> dict[str, AggregateStat]:
    out: dict[str, AggregateStat] = {}
    for name in METRIC_COLUMNS:
        values = [
            getattr(row, name) for row in rows if getattr(row, name) is not None
        ]
        if values:
            out[name] = aggregate(values)
    return out


def report_from_dict(raw: dict, source: str = "<memory>") -> MetricReport:
    if not isinstance(raw, dict):
        raise ReportError(f"{source}: report must be a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ReportError(
            f"{source}: schema version {version!r} is not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    rows = []
    for entry in raw.get("rows", []):
        rows.append(
            TranscriptRow(
                transcript_id=entry["transcript_id"],
                wer=entry.get("wer"),
                mc_wer=entry.get("mc_wer"),
                d_wer=entry.get("d_wer"),
                p_wer=entry.get("p_wer"),
                similarity=entry.get("similarity"),
                concept_substitutions=entry.get("concept_substitutions"),
                concept_deletions=entry.get("concept_deletions"),
                concept_insertions=entry.get("concept_insertions"),
                errors=dict(entry.get("errors", {})),
            )
        )
    aggregates = {
        name: AggregateStat(stat["mean"], stat["std"], stat["n"])
        for name, stat in raw.get("aggregates", {}).items()
    }
    return MetricReport(
        rows=rows,
        aggregates=aggregates,
        taxonomy=raw.get("taxonomy", {}),
        metadata=raw.get("metadata", {}),
    )


def load_report(path) -> MetricReport:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot load report {path}: {exc}") from exc
    return report_from_dict(raw, source=str(path))


def comparison_rows(
    reports: Sequence[MetricReport], metric: str
) -> list[dict]:
    """One comparison row per report, sorted ascending by the metric mean.

    Similarity sorts descending (higher is better); reports missing the
    metric sort last.
    """
    if metric not in METRIC_COLUMNS:
        raise ReportError(f"unknown metric {metric!r}")
    rows = []
    for report in reports:
        meta = report.metadata
        stat = report.aggregates.get(metric)
        rows.append(
            {
                "llm": str(meta.get("llm", "--")),
                "stt": str(meta.get("stt", "--")),
                "method": str(meta.get("method", "--")),
                "metric": metric,
                "mean": stat.mean if stat else None,
                "std": stat.std if stat else None,
                "n": stat.n if stat else None,
                "cell": format_stat(stat) if stat else "--",
            }
        )
    descending = metric == "similarity"

    def key(row):
        if row["mean"] is None:
            return (1, 0.0)
        return (0, -row["mean"] if descending else row["mean"])

    rows.sort(key=key)
    return rows


def render_comparison_table(rows: Sequence[dict], metric: str) -> str:
    """Markdown table in the LLM | STT | Method | metric layout."""
    heading = metric.replace("_", "-").upper() if metric != "similarity" else "Similarity"
    lines = [
        f"| LLM | STT | Method | {heading} |",
        "| --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append(
            f"| {row['llm']} | {row['stt']} | {row['method']} | {row['cell']} |"
        )
    return "\n".join(lines) + "\n"


def comparison_csv(rows: Sequence[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["llm", "stt", "method", "metric", "mean", "std", "n"])
    for row in rows:
        writer.writerow(
            [
                row["llm"], row["stt"], row["method"], row["metric"],
                "" if row["mean"] is None else f"{row['mean']:.6f}",
                "" if row["std"] is None else f"{row['std']:.6f}",
                "" if row["n"] is None else row["n"],
            ]
        )
    return buffer.getvalue()
