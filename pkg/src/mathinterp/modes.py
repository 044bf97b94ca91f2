"""Prompting configurations compared in a run."""

from __future__ import annotations

from enum import Enum


class Configuration(str, Enum):
    BASELINE = "baseline"
    RAG = "rag"
    CONTEXTUAL = "contextual"

    @property
    def code(self) -> str:
        return _CODES[self]

    @property
    def rank(self) -> int:
        return list(Configuration).index(self)

    @classmethod
    def parse(cls, value: "str | Configuration") -> "Configuration":
        if isinstance(value, cls):
            return value
        lowered = str(value).strip().lower()
        for config in cls:
            if lowered in (config.value, config.code.lower()):
                return config
        raise ValueError(f"unknown configuration {value!r}")


_CODES = {Configuration.BASELINE: "B", Configuration.RAG: "R", Configuration.CONTEXTUAL: "C"}
