"""Tokenization and the plain-text math grammar used across modules.

Model responses are plain keyboard math (``f(x)=x^2``, ``∇f(-1, 4)``,
``sqrt(65)``), so math runs are kept as single tokens instead of being
shredded on punctuation.
"""

from __future__ import annotations

import re

TokenSequence = tuple[str, ...]

_TRAILING = ".,;:!?\"'`*"
_LEADING = ",;:\"'`*"
_PAIRS = (("(", ")"), ("[", "]"), ("{", "}"))
_MATH_WORDS = frozenset({"sqrt", "ln", "log", "sin", "cos", "tan", "sec", "csc", "cot", "exp", "lim"})
_MATH_HINT = re.compile(r"\d|[\^=+<>∇∂∫√|]|\w\(|\w[*/]\w|\)[*/(]|[*/]\(")
_PAREN_GROUP = re.compile(r"\([^()]*\)")
_COMMA_SPACE = re.compile(r"\s*,\s*")

# Prompt-level grammar, applied to original-case text.
_PAREN = r"\((?:[^()]|\([^()]*\))*\)"
_POWER = rf"(?:\^(?:{_PAREN}|-?\w+))*"
_OPERAND = (
    rf"-?(?:[∇∂∫√]\s?)*"
    rf"(?:(?:\d+(?:\.\d+)?|[A-Za-z][A-Za-z0-9_]*'*){_POWER}(?:{_PAREN}{_POWER})?|{_PAREN}{_POWER})"
)
MATH_EXPRESSION = re.compile(rf"{_OPERAND}(?:\s*[-+*/=]\s*{_OPERAND})*")
COORDINATE_TUPLE = re.compile(r"\(\s*-?\d+(?:\.\d+)?(?:\s*,\s*-?\d+(?:\.\d+)?)+\s*\)")
NUMERAL = re.compile(r"(?<![\w.^])-?\d+(?:\.\d+)?(?!\w)")
_STRONG = re.compile(r"[=^∇∂∫√]|[A-Za-z]'*\(")


def _collapse_commas(text: str) -> str:
    return _PAREN_GROUP.sub(lambda m: _COMMA_SPACE.sub(",", m.group(0)), text)


def is_math_token(token: str) -> bool:
    return bool(_MATH_HINT.search(token)) or token.lower() in _MATH_WORDS


def _trim(token: str) -> str:
    prev = None
    while token != prev:
        prev = token
        token = token.rstrip(_TRAILING).lstrip(_LEADING)
        for opening, closing in _PAIRS:
            if token.startswith(opening) and token.count(opening) > token.count(closing):
                token = token[1:]
            if token.endswith(closing) and token.count(closing) > token.count(opening):
                token = token[:-1]
    return token


def _split_chunk(chunk: str) -> list[str]:
    if is_math_token(chunk) or chunk.strip(_TRAILING + "()") in _MATH_WORDS:
        token = _trim(chunk)
        if token and is_math_token(token):
            return [token]
    return re.findall(r"\w+", chunk)


def tokenize(text: str) -> TokenSequence:
    """Lowercase tokens; math runs such as ``f(x)=x^2`` or ``(-1,4)`` stay whole."""
    text = _collapse_commas(text.lower())
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk))
    return tuple(tokens)


def math_token_count(text: str) -> int:
    return sum(1 for tok in tokenize(text) if is_math_token(tok))


def nesting_depth(text: str) -> int:
    """Maximum bracket nesting depth; stray closers are ignored."""
    depth = best = 0
    for ch in text:
        if ch in "([{":
            depth += 1
            best = max(best, depth)
        elif ch in ")]}" and depth:
            depth -= 1
    return best


def is_strong_math(surface: str) -> bool:
    """True when a grammar match is unambiguously mathematical, not prose."""
    if _STRONG.search(surface):
        return True
    return bool(re.search(r"[-+*/]", surface) and re.search(r"[\d()]", surface))


def normalize_whitespace(text: str) -> str:
    lines = [re.sub(r"[ \t\f\v]+", " ", line).strip() for line in text.splitlines()]
    text = "\n".join(lines)
    text = re.sub(r"\n{3,}", "\n\n", text)
    text = re.sub(r" +([,.;:?!)\]])", r"\1", text)
    text = re.sub(r"([(\[]) +", r"\1", text)
    return text.strip()
