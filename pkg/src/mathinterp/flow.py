"""Reasoning-flow extraction from step-by-step solution text.

A solution is segmented into steps with rule-based parsing, each step is
tagged with mathematical operations, calculus concepts and a coarse
complexity level, and the steps are linked into a directed acyclic graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, NamedTuple, Sequence

from mathinterp.errors import ConfigError, EmptySolution
from mathinterp.lexicon import Lexicon, default_lexicon
from mathinterp.text import math_token_count, nesting_depth


class Operation(str, Enum):
    SUBSTITUTION = "substitution"
    DIFFERENTIATION = "differentiation"
    INTEGRATION = "integration"
    SIMPLIFICATION = "simplification"
    EVALUATION = "evaluation"
    SOLVING = "solving"
    LIMIT = "limit"
    FACTORING = "factoring"
    OTHER = "other"


# Dominant-operation priority for the pattern trace. limit and factoring are
# not ranked by the design notes, so they sit after simplification.
DOMINANCE = (
    Operation.DIFFERENTIATION,
    Operation.INTEGRATION,
    Operation.SUBSTITUTION,
    Operation.EVALUATION,
    Operation.SOLVING,
    Operation.SIMPLIFICATION,
    Operation.LIMIT,
    Operation.FACTORING,
)


class Level(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


LEVEL_WEIGHTS = {Level.LOW: 1, Level.MEDIUM: 3, Level.HIGH: 5}


class EdgeKind(str, Enum):
    SEQUENTIAL = "sequential"
    REFERENCE = "reference"


@dataclass(frozen=True)
class RawStep:
    index: int
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class OperationTag:
    name: Operation
    matched_lexeme: str


@dataclass(frozen=True)
class ConceptTag:
    name: str
    matched_lexeme: str


@dataclass(frozen=True)
class ComplexityFeatures:
    math_token_count: int
    max_nesting_depth: int
    operation_count: int
    concept_count: int

    @property
    def score(self) -> int:
        return (
            self.math_token_count
            + 2 * self.max_nesting_depth
            + 2 * self.operation_count
            + 2 * self.concept_count
        )


@dataclass(frozen=True)
class ComplexityThresholds:
    """Inclusive upper bounds of the low and medium bands."""

    low_max: int = 4
    medium_max: int = 9

    def __post_init__(self) -> None:
        if not 0 <= self.low_max < self.medium_max:
            raise ConfigError("complexity thresholds must satisfy 0 <= low_max < medium_max")

    def level_for(self, score: int) -> Level:
        if score <= self.low_max:
            return Level.LOW
        if score <= self.medium_max:
            return Level.MEDIUM
        return Level.HIGH


@dataclass(frozen=True)
class ComplexityLevel:
    level: Level
    features: ComplexityFeatures

    @property
    def weight(self) -> int:
        return LEVEL_WEIGHTS[self.level]


@dataclass(frozen=True)
class AnnotatedStep:
    raw: RawStep
    operations: tuple[OperationTag, ...]
    concepts: tuple[ConceptTag, ...]
    complexity: ComplexityLevel

    @property
    def dominant_operation(self) -> Operation:
        names = {tag.name for tag in self.operations}
        for op in DOMINANCE:
            if op in names:
                return op
        return Operation.OTHER


class Edge(NamedTuple):
    from_index: int
    to_index: int
    kind: EdgeKind


@dataclass(frozen=True)
class FlowSummary:
    total_steps: int
    total_operation_count: int
    unique_concepts: int
    avg_complexity_per_step: float
    reasoning_complexity_score: int
    pattern_trace: tuple[str, ...]


@dataclass(frozen=True)
class ReasoningFlow:
    steps: tuple[AnnotatedStep, ...]
    edges: tuple[Edge, ...]
    summary: FlowSummary = field(compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "steps": [
                {
                    "index": s.raw.index,
                    "text": s.raw.text,
                    "char_span": list(s.raw.char_span),
                    "operations": [t.name.value for t in s.operations],
                    "concepts": [t.name for t in s.concepts],
                    "complexity": s.complexity.level.value,
                    "weight": s.complexity.weight,
                    "dominant_operation": s.dominant_operation.value,
                }
                for s in self.steps
            ],
            "edges": [[e.from_index, e.to_index, e.kind.value] for e in self.edges],
            "summary": summary_to_dict(self.summary),
        }


def summary_to_dict(summary: FlowSummary) -> dict[str, Any]:
    return {
        "total_steps": summary.total_steps,
        "total_operation_count": summary.total_operation_count,
        "unique_concepts": summary.unique_concepts,
        "avg_complexity_per_step": summary.avg_complexity_per_step,
        "reasoning_complexity_score": summary.reasoning_complexity_score,
        "pattern_trace": list(summary.pattern_trace),
    }


def summary_from_dict(data: dict[str, Any]) -> FlowSummary:
    return FlowSummary(
        total_steps=data["total_steps"],
        total_operation_count=data["total_operation_count"],
        unique_concepts=data["unique_concepts"],
        avg_complexity_per_step=data["avg_complexity_per_step"],
        reasoning_complexity_score=data["reasoning_complexity_score"],
        pattern_trace=tuple(data["pattern_trace"]),
    )


# --- segmentation -----------------------------------------------------------

_ENUM_MARKER = re.compile(
    r"(?:step\s+\d+\s*[:.)]?|part\s+\(?[a-z]\)|\(\s*(?:[a-z]|[ivx]{1,4}|\d{1,2})\s*\)|[a-z]\)|\d{1,2}[.)])"
    r"(?=[\s*])",
    re.IGNORECASE,
)
_DECORATION = " \t*#>-"
_DISCOURSE = re.compile(
    r"[*#>\s-]*(?:first(?:ly)?|second(?:ly)?|third|then|next|finally|lastly|therefore|thus|hence|so)\b",
    re.IGNORECASE,
)
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9∇∂∫√])|\s*\n\s*")
_BOILERPLATE_HEADER = re.compile(
    r"[#*\s]*(?:solution|solutions|answer|work|working|step-by-step solution)[\s:*#.]*",
    re.IGNORECASE,
)


def _is_boilerplate(segment: str) -> bool:
    if not re.search(r"[^\W_]", segment):
        return True
    return bool(_BOILERPLATE_HEADER.fullmatch(segment))


def _marker_allowed(text: str, pos: int) -> bool:
    before = text[:pos].rstrip(_DECORATION)
    if not before or before.endswith("\n"):
        return True
    # inline markers only directly after a sentence ends
    return text[pos - 1] in " \t*#" and before[-1] in ".!?:;"


def _line_start(text: str, pos: int) -> int:
    """Pull a marker back over markdown decoration (``**``, ``#``) that opens its line."""
    start = pos
    while start > 0 and text[start - 1] in _DECORATION:
        start -= 1
    return start if start == 0 or text[start - 1] == "\n" else pos


def _enumeration_starts(text: str) -> list[int]:
    return [
        _line_start(text, m.start()) for m in _ENUM_MARKER.finditer(text) if _marker_allowed(text, m.start())
    ]


def _trimmed(text: str, start: int, end: int) -> tuple[int, int]:
    piece = text[start:end]
    lead = len(piece) - len(piece.lstrip())
    return start + lead, start + len(piece.rstrip())


def _sentence_units(text: str) -> list[tuple[int, int]]:
    cuts = [0]
    for m in _SENTENCE_BREAK.finditer(text):
        cuts.extend((m.start(), m.end()))
    cuts.append(len(text))
    units = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        a, b = _trimmed(text, a, b)
        if a < b:
            units.append((a, b))
    return units


def _marker_only(segment: str) -> bool:
    m = _ENUM_MARKER.match(segment.lstrip(_DECORATION))
    if not m:
        return False
    rest = segment.lstrip(_DECORATION)[m.end():]
    return not re.search(r"[^\W_]", rest)


def segment_steps(solution_text: str) -> list[RawStep]:
    """Split a solution into steps.

    Rules, in priority order: explicit enumerations (``1.``, ``(a)``,
    ``Step 2:``), discourse markers at sentence start (``First``, ``Then``,
    ``Finally``, ...), then a plain sentence/line split.
    """
    if not solution_text or not solution_text.strip():
        raise EmptySolution("solution text is blank")
    text = solution_text

    starts = _enumeration_starts(text)
    if len(starts) >= 2:
        bounds = sorted({0, *starts})
        raw_spans = [_trimmed(text, a, b) for a, b in zip(bounds, bounds[1:] + [len(text)])]
        spans: list[tuple[int, int]] = []
        pending: int | None = None
        for a, b in raw_spans:
            if a >= b:
                continue
            if _marker_only(text[a:b]):
                pending = a if pending is None else pending
                continue
            if pending is not None:
                a, pending = pending, None
            spans.append((a, b))
        if pending is not None:
            spans.append(_trimmed(text, pending, len(text)))
    else:
        units = _sentence_units(text)
        heads = [i for i, (a, b) in enumerate(units) if i and _DISCOURSE.match(text[a:b])]
        if heads:
            groups = [0, *heads, len(units)]
            spans = [(units[g][0], units[h - 1][1]) for g, h in zip(groups, groups[1:])]
        else:
            spans = units

    kept = [(a, b) for a, b in spans if not _is_boilerplate(text[a:b])]
    if not kept:
        raise EmptySolution("solution contains no reasoning content")
    return [RawStep(i, text[a:b], (a, b)) for i, (a, b) in enumerate(kept)]


# --- annotation ---------------------------------------------------------------


@lru_cache(maxsize=None)
def _default(name: str) -> Lexicon:
    return default_lexicon(name)


def _validate_operation_lexicon(lexicon: Lexicon) -> None:
    known = {op.value for op in Operation} - {Operation.OTHER.value}
    unknown = [tag for tag in lexicon.tags if tag not in known]
    if unknown:
        raise ConfigError(f"unknown operation tags in lexicon {lexicon.name!r}: {unknown}")


def classify_operations(step: RawStep, lexicon: Lexicon | None = None) -> list[OperationTag]:
    lexicon = lexicon or _default("operations")
    _validate_operation_lexicon(lexicon)
    return [OperationTag(Operation(m.tag), m.surface) for m in lexicon.match(step.text)]


def classify_concepts(step: RawStep, lexicon: Lexicon | None = None) -> list[ConceptTag]:
    lexicon = lexicon or _default("concepts")
    return [ConceptTag(m.tag, m.surface) for m in lexicon.match(step.text)]


def step_features(
    step: RawStep, operations: Sequence[OperationTag], concepts: Sequence[ConceptTag]
) -> ComplexityFeatures:
    return ComplexityFeatures(
        math_token_count=math_token_count(step.text),
        max_nesting_depth=nesting_depth(step.text),
        operation_count=len(operations),
        concept_count=len(concepts),
    )


def estimate_step_complexity(
    step: RawStep,
    operations: Sequence[OperationTag],
    concepts: Sequence[ConceptTag],
    thresholds: ComplexityThresholds | None = None,
) -> ComplexityLevel:
    features = step_features(step, operations, concepts)
    thresholds = thresholds or ComplexityThresholds()
    return ComplexityLevel(thresholds.level_for(features.score), features)


def annotate_step(
    step: RawStep,
    operations: Lexicon | None = None,
    concepts: Lexicon | None = None,
    thresholds: ComplexityThresholds | None = None,
) -> AnnotatedStep:
    ops = classify_operations(step, operations)
    cons = classify_concepts(step, concepts)
    return AnnotatedStep(step, tuple(ops), tuple(cons), estimate_step_complexity(step, ops, cons, thresholds))


# --- graph --------------------------------------------------------------------

_STEP_REF = re.compile(
    r"\b(?:from|using|use|in|by|of|see|with|per|via)\s+step\s+(\d+)\b|\bstep\s+(\d+)\s+(?:above|earlier|before)\b",
    re.IGNORECASE,
)
_ABOVE_REF = re.compile(
    r"\b(?:the|our|this)\s+((?:[A-Za-z]+\s+){0,2}?[A-Za-z]+)\s+"
    r"(?:(?:found|computed|obtained|derived|calculated|shown)\s+)?(?:above|earlier|previously)\b",
    re.IGNORECASE,
)
_DEFINITION = re.compile(
    r"\b(?:let|set|define|substitute|substituting|put|where)\s+([A-Za-z])\s*=", re.IGNORECASE
)
# Names too common to act as evidence of a shared intermediate.
_UNINFORMATIVE_NAMES = frozenset("aAIeijkxyzt")


def _step_label(text: str) -> int | None:
    m = re.match(r"[\s*#>-]*step\s+(\d+)\b", text, re.IGNORECASE)
    return int(m.group(1)) if m else None


def _resolve_step_number(number: int, steps: Sequence[AnnotatedStep], current: int) -> int | None:
    for step in steps[:current]:
        if _step_label(step.raw.text) == number:
            return step.raw.index
    ordinal = number - 1
    return ordinal if 0 <= ordinal < current else None


def _mentions(step: AnnotatedStep, term: str) -> bool:
    if any(c.name.lower() == term for c in step.concepts):
        return True
    return re.search(rf"(?<!\w){re.escape(term)}(?!\w)", step.raw.text, re.IGNORECASE) is not None


def _reference_sources(steps: Sequence[AnnotatedStep], j: int, definitions: dict[str, int]) -> set[int]:
    text = steps[j].raw.text
    sources: set[int] = set()
    for m in _STEP_REF.finditer(text):
        target = _resolve_step_number(int(m.group(1) or m.group(2)), steps, j)
        if target is not None:
            sources.add(target)
    for m in _ABOVE_REF.finditer(text):
        term = m.group(1).split()[-1].lower()
        for prior in steps[:j]:
            if _mentions(prior, term):
                sources.add(prior.raw.index)
                break
    for name, origin in definitions.items():
        if origin < j and re.search(rf"(?<![\w^']){re.escape(name)}(?![\w(])", text):
            sources.add(origin)
    return sources


def build_reasoning_graph(steps: Sequence[AnnotatedStep]) -> ReasoningFlow:
    if not steps:
        raise ValueError("a reasoning flow needs at least one step")
    steps = tuple(steps)
    edges = [Edge(i, i + 1, EdgeKind.SEQUENTIAL) for i in range(len(steps) - 1)]
    definitions: dict[str, int] = {}
    references: set[tuple[int, int]] = set()
    for j, step in enumerate(steps):
        for source in _reference_sources(steps, j, definitions):
            if source < j - 1:
                references.add((source, j))
        for m in _DEFINITION.finditer(step.raw.text):
            name = m.group(1)
            if name not in _UNINFORMATIVE_NAMES:
                definitions.setdefault(name, j)
    edges.extend(Edge(a, b, EdgeKind.REFERENCE) for a, b in sorted(references, key=lambda e: (e[1], e[0])))
    return ReasoningFlow(steps, tuple(edges), summarize(steps))


def summarize(steps: Sequence[AnnotatedStep]) -> FlowSummary:
    score = sum(s.complexity.weight for s in steps)
    return FlowSummary(
        total_steps=len(steps),
        total_operation_count=sum(len(s.operations) for s in steps),
        unique_concepts=len({c.name for s in steps for c in s.concepts}),
        avg_complexity_per_step=score / len(steps),
        reasoning_complexity_score=score,
        pattern_trace=tuple(s.dominant_operation.value for s in steps),
    )


def extract_flow(
    solution_text: str,
    operations: Lexicon | None = None,
    concepts: Lexicon | None = None,
    thresholds: ComplexityThresholds | None = None,
) -> ReasoningFlow:
    """Segment, annotate and link a solution in one call."""
    raw = segment_steps(solution_text)
    return build_reasoning_graph([annotate_step(s, operations, concepts, thresholds) for s in raw])


def is_acyclic(flow: ReasoningFlow) -> bool:
    """Kahn's algorithm over the flow's edges."""
    n = len(flow.steps)
    indegree = [0] * n
    out: dict[int, list[int]] = {i: [] for i in range(n)}
    for e in flow.edges:
        out[e.from_index].append(e.to_index)
        indegree[e.to_index] += 1
    ready = [i for i in range(n) if indegree[i] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for nxt in out[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
    return seen == n
