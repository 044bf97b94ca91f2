"""Prompt decomposition and single-element ablation.

Each question prompt is broken into math expressions, instruction keywords,
numeric/coordinate references and synthesized linguistic features. One
ablated prompt is produced per element, either by masking every occurrence
of the element or by a whole-prompt syntactic perturbation.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Iterable, Sequence

from mathinterp.errors import DegenerateAblation, EmptyPrompt
from mathinterp.lexicon import Lexicon, default_lexicon
from mathinterp.text import (
    COORDINATE_TUPLE,
    MATH_EXPRESSION,
    NUMERAL,
    is_strong_math,
    normalize_whitespace,
)

log = logging.getLogger(__name__)


class ElementKind(str, Enum):
    MATH_EXPRESSION = "math_expression"
    INSTRUCTION_KEYWORD = "instruction_keyword"
    NUMERIC_REFERENCE = "numeric_reference"
    LINGUISTIC_FEATURE = "linguistic_feature"


class Perturbation(str, Enum):
    MASK = "mask"
    SWAP_ORDER = "swap_order"
    CASE_CHANGE = "case_change"
    STRIP_PUNCTUATION = "strip_punctuation"


LINGUISTIC_SURFACES = {
    Perturbation.SWAP_ORDER: "<word order>",
    Perturbation.CASE_CHANGE: "<casing>",
    Perturbation.STRIP_PUNCTUATION: "<punctuation>",
}

# Longest first so "at point" wins over "at".
_CONNECTIVES = sorted(
    (
        "at the point", "at the points", "at point", "at points", "at", "of", "in", "for",
        "with", "on", "to", "from", "by", "and", "where", "when", "as", "the", "a", "an",
    ),
    key=len,
    reverse=True,
)
_CLAUSE_END = re.compile(r"[ \t]*(?:$|[.,;:?!)\n])")
_LEADING_CONNECTIVE = re.compile(
    r"[ \t]*(?:" + "|".join(re.escape(c) for c in _CONNECTIVES) + r")(?!\w)", re.IGNORECASE
)


@dataclass(frozen=True)
class PromptElement:
    kind: ElementKind
    surface: str
    char_span: tuple[int, int]
    perturbation: Perturbation = Perturbation.MASK
    occurrences: tuple[tuple[int, int], ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if (self.kind is ElementKind.LINGUISTIC_FEATURE) == (self.perturbation is Perturbation.MASK):
            raise ValueError("linguistic features must use a non-mask perturbation and vice versa")
        if not self.occurrences:
            object.__setattr__(self, "occurrences", (self.char_span,))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "surface": self.surface,
            "char_span": list(self.char_span),
            "perturbation": self.perturbation.value,
        }


@dataclass(frozen=True)
class AblatedPrompt:
    element: PromptElement
    text: str
    provenance: str


@dataclass(frozen=True)
class SkippedAblation:
    element: PromptElement
    reason: str


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@lru_cache(maxsize=None)
def _instructions() -> Lexicon:
    return default_lexicon("instructions")


def _blank(text: str, spans: Iterable[tuple[int, int]]) -> str:
    chars = list(text)
    for a, b in spans:
        chars[a:b] = " " * (b - a)
    return "".join(chars)


def _group(kind: ElementKind, hits: Iterable[tuple[str, tuple[int, int]]], key=lambda s: s) -> list[PromptElement]:
    grouped: dict[str, list[tuple[str, tuple[int, int]]]] = {}
    for surface, span in hits:
        grouped.setdefault(key(surface), []).append((surface, span))
    elements = []
    for occurrences in grouped.values():
        occurrences.sort(key=lambda o: o[1])
        surface, first = occurrences[0]
        elements.append(PromptElement(kind, surface, first, Perturbation.MASK, tuple(span for _, span in occurrences)))
    return elements


def decompose_prompt(prompt: str, instructions: Lexicon | None = None) -> list[PromptElement]:
    """Find the ablatable elements of a question prompt.

    Coordinate tuples are claimed first, then math expressions, then
    standalone numerals and instruction keywords in what is left. Each
    distinct surface becomes one element covering all its occurrences.
    """
    if not prompt or not prompt.strip():
        raise EmptyPrompt("prompt is blank")
    instructions = instructions or _instructions()

    tuples = [(m.group(0), m.span()) for m in COORDINATE_TUPLE.finditer(prompt)]
    shadow = _blank(prompt, (span for _, span in tuples))
    maths = [
        (m.group(0), m.span())
        for m in MATH_EXPRESSION.finditer(shadow)
        if m.group(0).strip() and is_strong_math(m.group(0))
    ]
    shadow = _blank(shadow, (span for _, span in maths))
    numerals = [(m.group(0), m.span()) for m in NUMERAL.finditer(shadow)]
    shadow = _blank(shadow, (span for _, span in numerals))
    keywords = [(m.surface, m.span) for m in instructions.finditer(shadow)]

    elements = (
        _group(ElementKind.NUMERIC_REFERENCE, tuples + numerals)
        + _group(ElementKind.MATH_EXPRESSION, maths)
        + _group(ElementKind.INSTRUCTION_KEYWORD, keywords, key=str.lower)
    )
    elements.sort(key=lambda e: e.char_span)

    if keywords:
        verb_span = min(span for _, span in keywords)
        elements.append(
            PromptElement(
                ElementKind.LINGUISTIC_FEATURE,
                LINGUISTIC_SURFACES[Perturbation.SWAP_ORDER],
                verb_span,
                Perturbation.SWAP_ORDER,
            )
        )
    for perturbation in (Perturbation.CASE_CHANGE, Perturbation.STRIP_PUNCTUATION):
        elements.append(
            PromptElement(
                ElementKind.LINGUISTIC_FEATURE,
                LINGUISTIC_SURFACES[perturbation],
                (0, len(prompt)),
                perturbation,
            )
        )
    return elements


def _elide_connectives(left: str, right: str) -> str:
    """Drop connectives left dangling before a removed span."""
    if not (_CLAUSE_END.match(right) or _LEADING_CONNECTIVE.match(right)):
        return left
    changed = True
    while changed:
        changed = False
        stripped = left.rstrip(" \t")
        for conn in _CONNECTIVES:
            m = re.search(rf"(?<!\w){re.escape(conn)}$", stripped, re.IGNORECASE)
            if m:
                left = stripped[: m.start()]
                changed = True
                break
    return left


def _mask(prompt: str, spans: Sequence[tuple[int, int]]) -> str:
    text = prompt
    for a, b in sorted(spans, reverse=True):
        left, right = text[:a], text[b:]
        text = _elide_connectives(left, right) + right
    return text


def _swap(prompt: str, verb_span: tuple[int, int]) -> str:
    a, b = verb_span
    before, verb, after = prompt[:a].strip(), prompt[a:b], prompt[b:].strip()
    return " ".join(part for part in (after, verb, before) if part)


def _strip_punctuation(prompt: str) -> str:
    # decimal points and digit-group commas survive
    return re.sub(r"(?<!\d)[.,]|[.,](?!\d)", "", prompt)


def perturb(prompt: str, element: PromptElement) -> str:
    """Apply one element's perturbation; raises DegenerateAblation."""
    if element.perturbation is Perturbation.MASK:
        text = _mask(prompt, element.occurrences)
    elif element.perturbation is Perturbation.SWAP_ORDER:
        text = _swap(prompt, element.char_span)
    elif element.perturbation is Perturbation.CASE_CHANGE:
        text = prompt.lower()
    else:
        text = _strip_punctuation(prompt)
    text = normalize_whitespace(text)
    if not re.search(r"[^\W_]", text):
        raise DegenerateAblation(f"ablating {element.surface!r} leaves an empty prompt")
    if text == prompt or text == normalize_whitespace(prompt):
        raise DegenerateAblation(f"ablating {element.surface!r} leaves the prompt unchanged")
    return text


def generate_ablations(
    prompt: str,
    elements: Sequence[PromptElement],
    skipped: list[SkippedAblation] | None = None,
) -> list[AblatedPrompt]:
    """One ablated prompt per element; degenerate ones are skipped and recorded."""
    provenance = prompt_hash(prompt)
    out = []
    for element in elements:
        try:
            out.append(AblatedPrompt(element, perturb(prompt, element), provenance))
        except DegenerateAblation as exc:
            log.warning("skipping ablation: %s", exc)
            if skipped is not None:
                skipped.append(SkippedAblation(element, str(exc)))
    return out


def ablation_manifest(
    prompt: str, ablations: Sequence[AblatedPrompt], skipped: Sequence[SkippedAblation] = ()
) -> dict[str, Any]:
    return {
        "prompt": prompt,
        "prompt_sha256": prompt_hash(prompt),
        "trials": [{**a.element.to_dict(), "text": a.text} for a in ablations],
        "skipped": [{**s.element.to_dict(), "reason": s.reason} for s in skipped],
    }
