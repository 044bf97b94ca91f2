"""Run configuration (YAML) and the exam file format."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from mathinterp.divergence import DEFAULT_ALPHA
from mathinterp.errors import BadConfig, ConfigError
from mathinterp.flow import ComplexityThresholds
from mathinterp.gateway import EndpointConfig
from mathinterp.lexicon import DEFAULT_LEXICONS, Lexicon, default_lexicon, load_lexicon
from mathinterp.modes import Configuration
from mathinterp.retrieval import EmbeddingConfig, RetrievalConfig


@dataclass(frozen=True)
class RunConfig:
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    alpha: float = DEFAULT_ALPHA
    lexicons: Mapping[str, Path] = field(default_factory=dict)
    thresholds: ComplexityThresholds = field(default_factory=ComplexityThresholds)
    system_prompt: str | None = None
    corpus_dir: Path | None = None
    index_path: Path | None = None
    manifest: Path | None = None
    exam: Path | None = None
    cache_dir: Path | None = None
    out_dir: Path | None = None
    replay_only: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise BadConfig(f"alpha must lie in [0, 1], got {self.alpha}")
        unknown = set(self.lexicons) - set(DEFAULT_LEXICONS)
        if unknown:
            raise BadConfig(f"unknown lexicon names: {sorted(unknown)}")
        for label, path in (
            ("corpus", self.corpus_dir),
            ("manifest", self.manifest),
            ("exam", self.exam),
            *((f"lexicon {k}", v) for k, v in self.lexicons.items()),
        ):
            if path is not None and not Path(path).exists():
                raise BadConfig(f"{label} path does not exist: {path}")

    def lexicon(self, name: str) -> Lexicon:
        path = self.lexicons.get(name)
        return load_lexicon(path) if path else default_lexicon(name)

    def to_dict(self) -> dict[str, Any]:
        """Settings worth recording in run metadata (no secrets, no absolute paths)."""
        ep = self.endpoint
        return {
            "model": ep.model,
            "temperature": ep.temperature,
            "max_tokens": ep.max_tokens,
            "alpha": self.alpha,
            "retrieval": self.retrieval.to_dict(),
            "embedding_model": self.embedding.model if self.embedding.url else "hashing-fallback",
            "complexity_thresholds": {"low_max": self.thresholds.low_max, "medium_max": self.thresholds.medium_max},
            "lexicons": {k: Path(v).name for k, v in sorted(self.lexicons.items())},
            "system_prompt_override": self.system_prompt is not None,
        }


_SECTIONS = {"endpoint": EndpointConfig, "embedding": EmbeddingConfig}
_RETRIEVAL_PATHS = {"corpus": "corpus_dir", "index": "index_path", "manifest": "manifest"}
_TOP_LEVEL = {"alpha", "lexicons", "complexity", "system_prompt", "exam", "cache_dir", "out", "replay_only",
              "retrieval", *_SECTIONS}


def _section(cls: type, data: Any, name: str) -> Any:
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise BadConfig(f"{name} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise BadConfig(f"unknown {name} keys: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise BadConfig(f"invalid {name} section: {exc}") from exc


def _resolve(base: Path, value: Any) -> Path | None:
    if value is None:
        return None
    path = Path(str(value)).expanduser()
    return path if path.is_absolute() else base / path


def config_from_mapping(data: Mapping[str, Any], base_dir: str | Path = ".") -> RunConfig:
    base = Path(base_dir)
    extra = set(data) - _TOP_LEVEL
    if extra:
        raise BadConfig(f"unknown config keys: {sorted(extra)}")

    retrieval_raw = dict(data.get("retrieval") or {})
    paths = {attr: _resolve(base, retrieval_raw.pop(key, None)) for key, attr in _RETRIEVAL_PATHS.items()}
    if "keywords" in retrieval_raw:
        retrieval_raw["keywords"] = tuple(retrieval_raw["keywords"])
    if "mode" in retrieval_raw:
        retrieval_raw["mode"] = Configuration.parse(retrieval_raw["mode"])

    lexicons = data.get("lexicons") or {}
    if not isinstance(lexicons, Mapping):
        raise BadConfig("lexicons must map a lexicon name to a file path")
    try:
        return RunConfig(
            endpoint=_section(EndpointConfig, data.get("endpoint"), "endpoint"),
            embedding=_section(EmbeddingConfig, data.get("embedding"), "embedding"),
            retrieval=_section(RetrievalConfig, retrieval_raw, "retrieval"),
            alpha=float(data.get("alpha", DEFAULT_ALPHA)),
            lexicons={k: _resolve(base, v) for k, v in lexicons.items()},
            thresholds=_section(ComplexityThresholds, data.get("complexity"), "complexity"),
            system_prompt=data.get("system_prompt"),
            exam=_resolve(base, data.get("exam")),
            cache_dir=_resolve(base, data.get("cache_dir")),
            out_dir=_resolve(base, data.get("out")),
            replay_only=bool(data.get("replay_only", False)),
            **paths,
        )
    except ValueError as exc:
        raise BadConfig(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Load a YAML config; relative paths resolve against the file's directory."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError as exc:
        raise BadConfig(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise BadConfig(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, Mapping):
        raise BadConfig(f"config file {path} must contain a mapping")
    return config_from_mapping(data, path.parent)


def with_overrides(config: RunConfig, **changes: Any) -> RunConfig:
    """Apply CLI overrides, ignoring ``None`` values."""
    changes = {k: v for k, v in changes.items() if v is not None}
    endpoint_changes = {k: changes.pop(k) for k in ("parallelism",) if k in changes}
    if endpoint_changes:
        changes["endpoint"] = replace(config.endpoint, **endpoint_changes)
    return replace(config, **changes)


# --- exam files -------------------------------------------------------------------


@dataclass(frozen=True)
class ExamQuestion:
    question_id: str
    prompt: str
    parts: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExamFile:
    exam_id: str
    questions: tuple[ExamQuestion, ...]
    course: str = ""

    def __post_init__(self) -> None:
        ids = [q.question_id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"exam {self.exam_id!r} has duplicate question ids")
        if any(not q.prompt.strip() for q in self.questions):
            raise ConfigError(f"exam {self.exam_id!r} has an empty prompt")

    def question(self, question_id: str) -> ExamQuestion:
        for q in self.questions:
            if q.question_id == question_id:
                return q
        raise ConfigError(f"exam {self.exam_id!r} has no question {question_id!r}")


_EXAM_HEADER = re.compile(r"^#\s*Exam:\s*(\S.*?)\s*$")
_COURSE = re.compile(r"^Course:\s*(.*?)\s*$")
_QUESTION = re.compile(r"^##\s+(\S+)\s*$")
_PART = re.compile(r"^\s*\(([a-z]|[ivx]+)\)\s+\S")


def parse_exam(text: str) -> ExamFile:
    """Parse ``# Exam: <id>``, optional ``Course: <name>``, then ``## <qid>`` sections.

    Lines in a section starting with ``(a)``, ``(b)``, ... are recorded as
    sub-parts; the prompt keeps the whole section text.
    """
    exam_id = course = None
    current: str | None = None
    bodies: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if current is None:
            if m := _EXAM_HEADER.match(line):
                exam_id = m.group(1)
                continue
            if (m := _COURSE.match(line)) and exam_id is not None:
                course = m.group(1)
                continue
        if m := _QUESTION.match(line):
            current = m.group(1)
            if current in bodies:
                raise ConfigError(f"duplicate question id {current!r} on line {lineno}")
            bodies[current] = []
        elif current is not None:
            bodies[current].append(line)
        elif line.strip():
            raise ConfigError(f"unexpected text before the first question on line {lineno}")
    if exam_id is None:
        raise ConfigError("exam file lacks a '# Exam: <id>' header")
    questions = []
    for qid, lines in bodies.items():
        prompt = "\n".join(lines).strip()
        parts = tuple(line.strip() for line in lines if _PART.match(line))
        questions.append(ExamQuestion(qid, prompt, parts))
    return ExamFile(exam_id, tuple(questions), course or "")


def load_exam(path: str | Path) -> ExamFile:
    try:
        return parse_exam(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise BadConfig(f"exam file not found: {path}") from exc
