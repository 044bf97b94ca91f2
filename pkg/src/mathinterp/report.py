"""Question reports, reasoning-graph DOT export and exam-level tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Sequence

from mathinterp.errors import ConfigError
from mathinterp.flow import EdgeKind, FlowSummary, ReasoningFlow, summary_from_dict, summary_to_dict
from mathinterp.metrics import ElementImpact, ExamMetrics

TIMESTAMP_FORMAT = "%Y%m%d_%H%M%S"
SECTION_HEADERS = ("Ablation Analysis Results", "Reasoning Flow Analysis", "Detailed Reasoning Steps")
TABLE_COLUMNS = ("Course", "Exam", "Model", "Robustness", "Complexity", "Step Count", "Phrase Sensitivity")


def utc_timestamp(now: datetime | None = None) -> str:
    return (now or datetime.now(timezone.utc)).strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class RubricCriterion:
    name: str
    weight: int
    description: str


@dataclass(frozen=True)
class RubricSchema:
    """Per-question grading rubric attached for human graders; never auto-applied."""

    criteria: tuple[RubricCriterion, ...]

    def __post_init__(self) -> None:
        total = sum(c.weight for c in self.criteria)
        if total != 100:
            raise ConfigError(f"rubric weights must sum to 100, got {total}")

    def to_dict(self) -> dict[str, Any]:
        return {"criteria": [{"name": c.name, "weight": c.weight, "description": c.description} for c in self.criteria]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RubricSchema":
        return cls(tuple(RubricCriterion(c["name"], c["weight"], c["description"]) for c in data["criteria"]))


DEFAULT_RUBRIC = RubricSchema(
    (
        RubricCriterion("Correct Method / Setup", 30, "Appropriate approach; correct limits, bounds or parameterization."),
        RubricCriterion("Execution / Computation", 40, "Accurate algebra, arithmetic and calculus; logical progression."),
        RubricCriterion("Correct Final Answer", 10, "Correct, appropriately simplified numeric or symbolic answer."),
        RubricCriterion("Mathematical Notation & Units", 10, "Proper notation; units where appropriate."),
        RubricCriterion("Clarity / Explanation", 10, "Steps shown clearly; reasoning explained when needed."),
    )
)


@dataclass(frozen=True)
class DetailedStep:
    text: str
    operations: tuple[str, ...]
    concepts: tuple[str, ...]


@dataclass(frozen=True)
class AnalysisReport:
    timestamp: str
    model_name: str
    question_text: str
    impacts: tuple[ElementImpact, ...]
    flow_summary: FlowSummary
    detailed_steps: tuple[DetailedStep, ...]
    run_metadata: dict[str, Any] = field(default_factory=dict)
    question_id: str = ""
    rubric: RubricSchema | None = DEFAULT_RUBRIC

    def __post_init__(self) -> None:
        values = [i.impact for i in self.impacts]
        if values != sorted(values, reverse=True):
            raise ValueError("impacts must be ranked non-increasing")

    @classmethod
    def build(
        cls,
        *,
        timestamp: str,
        model_name: str,
        question_text: str,
        impacts: Sequence[ElementImpact],
        flow: ReasoningFlow,
        run_metadata: dict[str, Any] | None = None,
        question_id: str = "",
        rubric: RubricSchema | None = DEFAULT_RUBRIC,
    ) -> "AnalysisReport":
        steps = tuple(
            DetailedStep(
                s.raw.text,
                tuple(t.name.value for t in s.operations),
                tuple(t.name for t in s.concepts),
            )
            for s in flow.steps
        )
        return cls(
            timestamp, model_name, question_text, tuple(impacts), flow.summary, steps,
            dict(run_metadata or {}), question_id, rubric,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "timestamp": self.timestamp,
            "model_name": self.model_name,
            "question_id": self.question_id,
            "question_text": self.question_text,
            "impacts": [i.to_dict() for i in self.impacts],
            "flow_summary": summary_to_dict(self.flow_summary),
            "detailed_steps": [
                {"text": s.text, "operations": list(s.operations), "concepts": list(s.concepts)}
                for s in self.detailed_steps
            ],
            "run_metadata": self.run_metadata,
            "rubric": self.rubric.to_dict() if self.rubric else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AnalysisReport":
        return cls(
            timestamp=data["timestamp"],
            model_name=data["model_name"],
            question_text=data["question_text"],
            impacts=tuple(ElementImpact.from_dict(i) for i in data["impacts"]),
            flow_summary=summary_from_dict(data["flow_summary"]),
            detailed_steps=tuple(
                DetailedStep(s["text"], tuple(s["operations"]), tuple(s["concepts"])) for s in data["detailed_steps"]
            ),
            run_metadata=data.get("run_metadata", {}),
            question_id=data.get("question_id", ""),
            rubric=RubricSchema.from_dict(data["rubric"]) if data.get("rubric") else None,
        )


def _join(items: Sequence[str]) -> str:
    return ", ".join(items) if items else "none"


def _markdown(report: AnalysisReport) -> str:
    s = report.flow_summary
    lines = [
        "# LLM Attention Analysis Report",
        "",
        f"Timestamp: {report.timestamp}  ",
        f"Model: {report.model_name}",
    ]
    if report.question_id:
        lines.append(f"Question ID: {report.question_id}")
    lines += ["", "## Question Analyzed", "", report.question_text.strip(), ""]

    lines += [f"## {SECTION_HEADERS[0]}", ""]
    if report.impacts:
        lines += [f"- Important phrase: {i.element_surface}  Impact: {i.impact:.3f}" for i in report.impacts]
    else:
        lines.append("- none")
    lines.append("")

    lines += [
        f"## {SECTION_HEADERS[1]}",
        "",
        f"- Total steps: {s.total_steps}",
        f"- Complexity score: {s.reasoning_complexity_score}",
        f"- Total operations: {s.total_operation_count}",
        f"- Unique concepts: {s.unique_concepts}",
        f"- Average complexity per step: {s.avg_complexity_per_step:.2f}",
        f"- Reasoning patterns: {_join(s.pattern_trace)}",
        "",
        f"## {SECTION_HEADERS[2]}",
        "",
    ]
    if report.detailed_steps:
        for n, step in enumerate(report.detailed_steps, start=1):
            lines.append(f"{n}. {' '.join(step.text.split())}")
            lines.append(f"   - Operations: {_join(step.operations)}")
            lines.append(f"   - Concepts: {_join(step.concepts)}")
    else:
        lines.append("none")
    lines.append("")

    lines += ["## Run Metadata", ""]
    if report.run_metadata:
        lines += [f"- {key}: {json.dumps(report.run_metadata[key], ensure_ascii=False, sort_keys=True)}"
                  for key in sorted(report.run_metadata)]
    else:
        lines.append("- none")
    lines.append("")

    if report.rubric is not None:
        lines += ["## Grading Rubric (for human graders)", ""]
        lines += [f"- {c.name} ({c.weight}%): {c.description}" for c in report.rubric.criteria]
        lines.append("")
    return "\n".join(lines)


def render_question_report(report: AnalysisReport, format: str = "markdown") -> str:
    if format == "markdown":
        return _markdown(report)
    if format == "json":
        return json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_graph_dot(flow: ReasoningFlow, name: str = "reasoning_flow") -> str:
    """DOT digraph; solid edges are sequential, dashed edges are back-references."""
    if not flow.steps:
        raise ValueError("flow has no steps")
    lines = [f'digraph "{_dot_escape(name)}" {{', "  rankdir=TB;", "  node [shape=box];"]
    for step in flow.steps:
        i = step.raw.index
        label = f"S{i}: {step.dominant_operation.value}"
        tooltip = " ".join(step.raw.text.split())[:120]
        lines.append(f'  S{i} [label="{_dot_escape(label)}", tooltip="{_dot_escape(tooltip)}"];')
    for e in flow.edges:
        style = "solid" if e.kind is EdgeKind.SEQUENTIAL else "dashed"
        lines.append(f"  S{e.from_index} -> S{e.to_index} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _table_rows(metrics: Sequence[ExamMetrics]) -> list[list[str]]:
    ordered = sorted(metrics, key=lambda m: (m.course, m.exam_id, m.configuration.rank))
    return [
        [
            m.course,
            m.exam_id,
            m.configuration.code,
            f"{m.robustness.mean:.3f}",
            f"{m.complexity.mean:.1f}",
            f"{m.step_count.mean:.1f}",
            f"{m.phrase_sensitivity.mean:.3f}",
        ]
        for m in ordered
    ]


def export_exam_table(metrics: Sequence[ExamMetrics], format: str = "csv") -> str:
    """One row per (exam, configuration), ordered by course, exam, then B < R < C."""
    if not metrics:
        raise ValueError("no exam metrics to export")
    rows = _table_rows(metrics)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        out = ["| " + " | ".join(TABLE_COLUMNS) + " |", "|" + "---|" * len(TABLE_COLUMNS)]
        out += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown table format {format!r}")
