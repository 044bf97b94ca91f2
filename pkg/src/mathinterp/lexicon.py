"""Plain-text lexicons mapping tags to trigger lexemes.

File format, one entry per line::

    # comment
    differentiation: differentiate, derivative, d/dx
    gradient: gradient, ∇

A tag may appear on several lines; its lexemes are merged in order.
Matching is case-insensitive and whole-word for lexemes that start or end
with a word character. Symbol aliases such as ``∇`` match anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterator

from mathinterp.errors import ConfigError

DEFAULT_LEXICONS = ("operations", "concepts", "instructions")


def term_pattern(term: str) -> str:
    """Regex source for one lexeme, tolerant of a plural on the last word."""
    words = term.split()
    if not words:
        raise ValueError("empty lexeme")
    last = words[-1]
    if last[-1].isascii() and last[-1].isalpha():
        base = last[:-1] if last.lower().endswith("s") and len(last) > 3 else last
        tail = re.escape(base) + "(?:s|es)?"
    else:
        tail = re.escape(last)
    body = r"\s+".join([re.escape(w) for w in words[:-1]] + [tail])
    left = r"(?<!\w)" if re.match(r"\w", term) else ""
    right = r"(?!\w)" if re.search(r"\w$", term) else ""
    return left + body + right


@dataclass(frozen=True)
class LexiconMatch:
    tag: str
    lexeme: str
    surface: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Lexicon:
    name: str
    entries: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigError(f"lexicon {self.name!r} is empty")

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.entries)

    def __contains__(self, tag: object) -> bool:
        return tag in self.tags

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def _compiled(self) -> tuple[tuple[str, tuple[tuple[str, re.Pattern[str]], ...]], ...]:
        return tuple(
            (tag, tuple((lx, re.compile(term_pattern(lx), re.IGNORECASE)) for lx in lexemes))
            for tag, lexemes in self.entries
        )

    def finditer(self, text: str) -> Iterator[LexiconMatch]:
        """Every occurrence of every lexeme, grouped by tag in lexicon order."""
        for tag, patterns in self._compiled:
            for lexeme, pattern in patterns:
                for m in pattern.finditer(text):
                    yield LexiconMatch(tag, lexeme, m.group(0), m.span())

    def match(self, text: str) -> list[LexiconMatch]:
        """One match per tag (its earliest occurrence), in lexicon order."""
        best: dict[str, LexiconMatch] = {}
        for hit in self.finditer(text):
            current = best.get(hit.tag)
            if current is None or hit.span[0] < current.span[0]:
                best[hit.tag] = hit
        return [best[tag] for tag in self.tags if tag in best]

    def with_entry(self, tag: str, lexeme: str) -> "Lexicon":
        entries = dict(self.entries)
        entries[tag] = entries.get(tag, ()) + (lexeme,)
        return Lexicon(self.name, tuple(entries.items()))


def parse_lexicon(text: str, name: str = "lexicon") -> Lexicon:
    merged: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, sep, rest = line.partition(":")
        tag = tag.strip()
        if not sep or not tag:
            raise ConfigError(f"{name}:{lineno}: expected 'tag: lexeme, ...'")
        lexemes = [lx.strip() for lx in rest.split(",") if lx.strip()]
        if not lexemes:
            raise ConfigError(f"{name}:{lineno}: tag {tag!r} has no lexemes")
        bucket = merged.setdefault(tag, [])
        bucket.extend(lx for lx in lexemes if lx not in bucket)
    return Lexicon(name, tuple((tag, tuple(lx)) for tag, lx in merged.items()))


def load_lexicon(path: str | Path) -> Lexicon:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read lexicon {path}: {exc}") from exc
    return parse_lexicon(text, name=path.stem)


def default_lexicon(name: str) -> Lexicon:
    if name not in DEFAULT_LEXICONS:
        raise ConfigError(f"no built-in lexicon named {name!r}")
    text = resources.files("mathinterp").joinpath(f"lexicons/{name}.txt").read_text(encoding="utf-8")
    return parse_lexicon(text, name=name)
