from __future__ import annotations

import csv
import io
import json

import pydot
import pytest

from mathinterp.ablation import ElementKind
from mathinterp.errors import ConfigError
from mathinterp.flow import annotate_step, build_reasoning_graph, extract_flow, RawStep, summary_to_dict
from mathinterp.metrics import ElementImpact, ExamMetrics, MetricStats
from mathinterp.modes import Configuration
from mathinterp.report import (
    DEFAULT_RUBRIC,
    SECTION_HEADERS,
    TABLE_COLUMNS,
    AnalysisReport,
    RubricCriterion,
    RubricSchema,
    export_exam_table,
    export_graph_dot,
    render_question_report,
    utc_timestamp,
)

IMPACTS = (
    ElementImpact("(-1, 4)", ElementKind.NUMERIC_REFERENCE, 0.630),
    ElementImpact("∇f", ElementKind.MATH_EXPRESSION, 0.562),
    ElementImpact("directional", ElementKind.INSTRUCTION_KEYWORD, 0.477),
)


def _report(grad_solution: str, impacts=IMPACTS) -> AnalysisReport:
    return AnalysisReport.build(
        timestamp="20250724_182112",
        model_name="gemma3:latest",
        question_text="Find the gradient ∇f of f(x, y) = x^2y at point (-1, 4).",
        impacts=impacts,
        flow=extract_flow(grad_solution),
        run_metadata={"configuration": "baseline", "alpha": 0.5},
        question_id="q1",
    )


def test_markdown_sections_in_order(grad_solution):
    md = render_question_report(_report(grad_solution), "markdown")
    positions = [md.index(h) for h in SECTION_HEADERS]
    assert positions == sorted(positions)
    assert "Important phrase: (-1, 4)  Impact: 0.630" in md
    assert "Timestamp: 20250724_182112" in md


def test_markdown_flow_lines(grad_solution):
    md = render_question_report(_report(grad_solution), "markdown")
    assert "Total steps: 7" in md
    assert "Complexity score: " in md
    assert (
        "Reasoning patterns: substitution, differentiation, differentiation, solving, differentiation, "
        "evaluation, solving" in md
    )


def test_every_summary_field_rendered(grad_solution):
    report = _report(grad_solution)
    md = render_question_report(report, "markdown")
    s = report.flow_summary
    for value in (s.total_steps, s.total_operation_count, s.unique_concepts, s.reasoning_complexity_score):
        assert str(value) in md
    assert f"{s.avg_complexity_per_step:.2f}" in md
    assert ", ".join(s.pattern_trace) in md


def test_empty_impacts_render_none(grad_solution):
    md = render_question_report(_report(grad_solution, impacts=()), "markdown")
    section = md.split("## " + SECTION_HEADERS[0])[1].split("## ")[0]
    assert "none" in section


def test_unranked_impacts_rejected(grad_solution):
    with pytest.raises(ValueError):
        _report(grad_solution, impacts=tuple(reversed(IMPACTS)))


def test_json_round_trip(grad_solution):
    text = render_question_report(_report(grad_solution), "json")
    again = render_question_report(AnalysisReport.from_dict(json.loads(text)), "json")
    assert again == text
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["flow_summary"] == summary_to_dict(_report(grad_solution).flow_summary)


def test_rendering_is_pure(grad_solution):
    a, b = _report(grad_solution), _report(grad_solution)
    assert render_question_report(a) == render_question_report(b)


def test_rubric_defaults_and_validation():
    assert [c.weight for c in DEFAULT_RUBRIC.criteria] == [30, 40, 10, 10, 10]
    assert DEFAULT_RUBRIC.criteria[0].name == "Correct Method / Setup"
    with pytest.raises(ConfigError):
        RubricSchema((RubricCriterion("only", 90, "too light"),))


def test_timestamp_format():
    from datetime import datetime, timezone

    assert utc_timestamp(datetime(2025, 7, 24, 18, 21, 12, tzinfo=timezone.utc)) == "20250724_182112"


def _flow(texts):
    return build_reasoning_graph([annotate_step(RawStep(i, t, (0, len(t)))) for i, t in enumerate(texts)])


def test_dot_single_node():
    dot = export_graph_dot(_flow(["Differentiate f."]))
    assert dot.count("[label=") == 1 and "->" not in dot


def test_dot_edge_styles():
    dot = export_graph_dot(_flow(["Find f_x.", "Find f_y.", "Combine them using step 1."]))
    assert dot.count("style=solid") == 2
    assert dot.count("style=dashed") == 1
    assert 'label="S0: solving"' in dot


def test_dot_parses(grad_solution):
    dot = export_graph_dot(extract_flow(grad_solution), "grad_q1")
    [graph] = pydot.graph_from_dot_data(dot)
    assert graph.get_type() == "digraph"
    assert len(graph.get_nodes()) - sum(n.get_name() in ("node", "edge", "graph") for n in graph.get_nodes()) == 7
    assert len(graph.get_edges()) == 6


def _metrics(course, exam, config, robustness=0.7519, complexity=19.25, steps=6.375, sens=0.4449):
    stat = lambda v: MetricStats(v, 0.0, 8)
    return ExamMetrics(exam, Configuration.parse(config), stat(robustness), stat(complexity), stat(steps),
                       stat(sens), course)


def test_exam_table_precision_and_columns():
    text = export_exam_table([_metrics("Calculus III", "Exam 1", "baseline")], "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == TABLE_COLUMNS
    assert rows[1] == ["Calculus III", "Exam 1", "B", "0.752", "19.2", "6.4", "0.445"]


def test_exam_table_ordering():
    metrics = [
        _metrics("Calc II", "Exam 2", "contextual"),
        _metrics("Calc I", "Exam 1", "rag"),
        _metrics("Calc I", "Exam 1", "contextual"),
        _metrics("Calc I", "Exam 1", "baseline"),
        _metrics("Calc II", "Exam 1", "baseline"),
    ]
    rows = list(csv.reader(io.StringIO(export_exam_table(metrics, "csv"))))[1:]
    assert [(r[0], r[1], r[2]) for r in rows] == [
        ("Calc I", "Exam 1", "B"), ("Calc I", "Exam 1", "R"), ("Calc I", "Exam 1", "C"),
        ("Calc II", "Exam 1", "B"), ("Calc II", "Exam 2", "C"),
    ]
    assert export_exam_table(metrics, "csv") == export_exam_table(list(reversed(metrics)), "csv")


def test_exam_table_markdown():
    md = export_exam_table([_metrics("C", "E", c) for c in ("baseline", "rag", "contextual")], "markdown")
    lines = md.strip().splitlines()
    assert lines[0] == "| " + " | ".join(TABLE_COLUMNS) + " |"
    assert len(lines) == 2 + 3
