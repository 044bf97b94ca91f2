"""Question-level and exam-level interpretability metrics."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Any, Sequence

from mathinterp.ablation import ElementKind, PromptElement
from mathinterp.divergence import DivergenceScore
from mathinterp.errors import NoQuestions, NoTrials
from mathinterp.flow import ReasoningFlow
from mathinterp.modes import Configuration


@dataclass(frozen=True)
class AblationTrial:
    element: PromptElement
    ablated_prompt: str
    ablated_response: str
    score: DivergenceScore


@dataclass(frozen=True)
class ElementImpact:
    element_surface: str
    element_kind: ElementKind
    impact: float

    def to_dict(self) -> dict[str, Any]:
        return {"surface": self.element_surface, "kind": self.element_kind.value, "impact": self.impact}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ElementImpact":
        return cls(data["surface"], ElementKind(data["kind"]), data["impact"])


@dataclass(frozen=True)
class QuestionMetrics:
    question_id: str
    robustness: float
    phrase_sensitivity: float
    impacts: tuple[ElementImpact, ...]
    step_count: int
    complexity: int
    pattern_trace: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "robustness": self.robustness,
            "phrase_sensitivity": self.phrase_sensitivity,
            "impacts": [i.to_dict() for i in self.impacts],
            "step_count": self.step_count,
            "complexity": self.complexity,
            "pattern_trace": list(self.pattern_trace),
        }


def rank_impacts(trials: Sequence[AblationTrial]) -> tuple[ElementImpact, ...]:
    impacts = [ElementImpact(t.element.surface, t.element.kind, t.score.divergence) for t in trials]
    # stable sort keeps prompt order among ties
    return tuple(sorted(impacts, key=lambda i: -i.impact))


def question_metrics(question_id: str, trials: Sequence[AblationTrial], flow: ReasoningFlow) -> QuestionMetrics:
    if not trials:
        raise NoTrials(f"question {question_id!r} has no successful ablation trials")
    return QuestionMetrics(
        question_id=question_id,
        robustness=statistics.fmean(t.score.cosine_similarity for t in trials),
        phrase_sensitivity=max(t.score.divergence for t in trials),
        impacts=rank_impacts(trials),
        step_count=flow.summary.total_steps,
        complexity=flow.summary.reasoning_complexity_score,
        pattern_trace=flow.summary.pattern_trace,
    )


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std_dev: float
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "MetricStats":
        # sorted + exact-sum helpers make the result independent of input order
        ordered = sorted(values)
        return cls(statistics.fmean(ordered), statistics.pstdev(ordered), len(ordered))

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "std_dev": self.std_dev, "n": self.n}


EXAM_METRICS = ("robustness", "complexity", "step_count", "phrase_sensitivity")


@dataclass(frozen=True)
class ExamMetrics:
    exam_id: str
    configuration: Configuration
    robustness: MetricStats
    complexity: MetricStats
    step_count: MetricStats
    phrase_sensitivity: MetricStats
    course: str = ""

    @property
    def n(self) -> int:
        return self.robustness.n

    def to_dict(self) -> dict[str, Any]:
        return {
            "course": self.course,
            "exam_id": self.exam_id,
            "configuration": self.configuration.value,
            **{name: getattr(self, name).to_dict() for name in EXAM_METRICS},
        }


def exam_aggregate(
    questions: Sequence[QuestionMetrics],
    exam_id: str,
    configuration: Configuration | str,
    course: str = "",
) -> ExamMetrics:
    """Mean and population standard deviation of each metric over an exam."""
    if not questions:
        raise NoQuestions(f"exam {exam_id!r} has no analysed questions")
    configuration = Configuration.parse(configuration)
    return ExamMetrics(
        exam_id=exam_id,
        configuration=configuration,
        robustness=MetricStats.of([q.robustness for q in questions]),
        complexity=MetricStats.of([float(q.complexity) for q in questions]),
        step_count=MetricStats.of([float(q.step_count) for q in questions]),
        phrase_sensitivity=MetricStats.of([q.phrase_sensitivity for q in questions]),
        course=course,
    )
