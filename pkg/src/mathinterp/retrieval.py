"""Knowledge augmentation: keyword-filtered RAG and inlined curated context.

RAG path: paragraphs that mention a topic keyword are cut into overlapping
character windows, embedded, and held in an exact cosine index; the top-k
chunks are placed above the question. Contextual path: a curated, ordered
list of documents is inlined as-is, truncating the lowest-priority ones when
a token budget is exceeded.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import httpx
import numpy as np

from mathinterp.errors import (
    BadConfig,
    ContextOverflow,
    EmptyCorpus,
    EmptyIndex,
    EndpointUnreachable,
    HttpError,
    Timeout,
)
from mathinterp.gateway import DEFAULT_SYSTEM_PROMPT
from mathinterp.lexicon import term_pattern
from mathinterp.modes import Configuration

log = logging.getLogger(__name__)

TIE_DECIMALS = 12

CONTEXT_HEADER = "Reference material:"
QUESTION_HEADER = "Question:"
CORPUS_SUFFIXES = (".txt", ".md")


@dataclass(frozen=True)
class RetrievalConfig:
    chunk_size: int = 800
    overlap: int = 200
    top_k: int = 4
    keywords: tuple[str, ...] = ("derivatives", "integrals", "optimization")
    mode: Configuration = Configuration.RAG
    token_budget: int | None = None

    def __post_init__(self) -> None:
        if self.chunk_size < 1 or not 0 <= self.overlap < self.chunk_size:
            raise BadConfig(f"need 0 <= overlap < chunk_size, got {self.overlap} / {self.chunk_size}")
        if self.top_k < 1:
            raise BadConfig("top_k must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_size": self.chunk_size,
            "overlap": self.overlap,
            "top_k": self.top_k,
            "keywords": list(self.keywords),
            "mode": self.mode.value,
            "token_budget": self.token_budget,
        }


@dataclass(frozen=True)
class CorpusSegment:
    doc_id: str
    text: str
    matched_keywords: tuple[str, ...]
    offset: int = 0


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dims(self) -> int:
        return len(self.values)

    @property
    def is_zero(self) -> bool:
        return not any(self.values)


@dataclass(frozen=True)
class CorpusChunk:
    chunk_id: int
    doc_id: str
    text: str
    char_span: tuple[int, int]
    vector: EmbeddingVector | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "char_span": list(self.char_span),
            "vector": list(self.vector.values) if self.vector is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CorpusChunk":
        vector = data.get("vector")
        return cls(
            chunk_id=data["chunk_id"],
            doc_id=data["doc_id"],
            text=data["text"],
            char_span=tuple(data["char_span"]),
            vector=EmbeddingVector(tuple(vector)) if vector is not None else None,
        )


# --- corpus ---------------------------------------------------------------------


def read_corpus(directory: str | Path) -> dict[str, str]:
    """All ``.txt``/``.md`` files under ``directory``, keyed by relative path."""
    root = Path(directory)
    if not root.is_dir():
        raise EmptyCorpus(f"corpus directory {root} does not exist")
    docs = {
        path.relative_to(root).as_posix(): path.read_text(encoding="utf-8")
        for path in sorted(root.rglob("*"))
        if path.is_file() and path.suffix.lower() in CORPUS_SUFFIXES
    }
    if not any(text.strip() for text in docs.values()):
        raise EmptyCorpus(f"no text documents under {root}")
    return docs


def paragraphs(text: str) -> Iterable[tuple[int, str]]:
    """Blank-line separated blocks with their start offsets, whitespace-trimmed."""
    start = 0
    for m in [*re.finditer(r"\n[ \t]*\n\s*", text), None]:
        end = m.start() if m else len(text)
        block = text[start:end]
        if block.strip():
            lead = len(block) - len(block.lstrip())
            yield start + lead, block.strip()
        if m:
            start = m.end()


def filter_segments(docs: Mapping[str, str], keywords: Sequence[str]) -> list[CorpusSegment]:
    """Paragraphs containing at least one keyword (case-insensitive, whole word)."""
    if not docs or not any(text.strip() for text in docs.values()):
        raise EmptyCorpus("corpus is empty")
    if not keywords:
        raise BadConfig("RAG filtering needs at least one keyword")
    patterns = [(kw, re.compile(term_pattern(kw), re.IGNORECASE)) for kw in keywords]
    segments = []
    for doc_id, text in docs.items():
        for offset, para in paragraphs(text):
            matched = tuple(kw for kw, pat in patterns if pat.search(para))
            if matched:
                segments.append(CorpusSegment(doc_id, para, matched, offset))
    if not segments:
        log.warning("no corpus paragraph mentions any of %s", ", ".join(keywords))
    return segments


def chunk_spans(length: int, chunk_size: int, overlap: int) -> list[tuple[int, int]]:
    if chunk_size < 1 or not 0 <= overlap < chunk_size:
        raise BadConfig(f"need 0 <= overlap < chunk_size, got {overlap} / {chunk_size}")
    if length <= 0:
        return []
    stride = chunk_size - overlap
    spans = []
    start = 0
    while True:
        end = min(start + chunk_size, length)
        spans.append((start, end))
        if end == length:
            return spans
        start += stride


def chunk(segment: CorpusSegment, chunk_size: int, overlap: int, first_id: int = 0) -> list[CorpusChunk]:
    """Sliding character windows; spans are offsets into the parent document."""
    return [
        CorpusChunk(first_id + i, segment.doc_id, segment.text[a:b], (segment.offset + a, segment.offset + b))
        for i, (a, b) in enumerate(chunk_spans(len(segment.text), chunk_size, overlap))
    ]


def chunk_segments(segments: Sequence[CorpusSegment], chunk_size: int, overlap: int) -> list[CorpusChunk]:
    chunks: list[CorpusChunk] = []
    for segment in segments:
        chunks.extend(chunk(segment, chunk_size, overlap, first_id=len(chunks)))
    return chunks


# --- embedding --------------------------------------------------------------------

Embedder = Callable[[Sequence[str]], list[EmbeddingVector]]


@dataclass(frozen=True)
class HashingEmbedder:
    """Offline embedder: signed feature hashing of words and character trigrams."""

    dims: int = 256
    trigram_weight: float = 0.5

    def _features(self, text: str) -> Iterable[tuple[str, float]]:
        for word in re.findall(r"\w+", text.lower()):
            yield "w:" + word, 1.0
            padded = f"#{word}#"
            for i in range(len(padded) - 2):
                yield "c:" + padded[i : i + 3], self.trigram_weight

    def embed_one(self, text: str) -> EmbeddingVector:
        values = [0.0] * self.dims
        for feature, weight in self._features(text):
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "big")
            values[h % self.dims] += weight if (h >> 63) & 1 else -weight
        norm = math.sqrt(math.fsum(v * v for v in values))
        if norm:
            values = [v / norm for v in values]
        return EmbeddingVector(tuple(values))

    def __call__(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed_one(t) for t in texts]


@dataclass(frozen=True)
class EmbeddingConfig:
    url: str = ""
    path: str = "/v1/embeddings"
    model: str = "nomic-embed-text"
    timeout_ms: int = 60_000
    auth_env: str = "MATHINTERP_API_KEY"
    dims: int = 256


@dataclass
class HttpEmbedder:
    """Client for OpenAI-style ``/v1/embeddings`` or Ollama ``/api/embed`` endpoints."""

    config: EmbeddingConfig
    transport: httpx.BaseTransport | None = None

    def __call__(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            return []
        headers = {}
        token = os.environ.get(self.config.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            with httpx.Client(
                base_url=self.config.url,
                timeout=self.config.timeout_ms / 1000,
                transport=self.transport,
                headers=headers,
            ) as client:
                resp = client.post(self.config.path, json={"model": self.config.model, "input": list(texts)})
        except httpx.TimeoutException as exc:
            raise Timeout(f"embedding request to {self.config.url} timed out") from exc
        except httpx.TransportError as exc:
            raise EndpointUnreachable(f"cannot reach embedding endpoint {self.config.url}: {exc}") from exc
        if resp.status_code >= 400:
            raise HttpError(resp.status_code, resp.text)
        body = resp.json()
        if "data" in body:
            rows = [item["embedding"] for item in sorted(body["data"], key=lambda d: d.get("index", 0))]
        else:
            rows = body["embeddings"]
        return [EmbeddingVector(tuple(float(v) for v in row)) for row in rows]


def embed(texts: Sequence[str], embedder: Embedder) -> list[EmbeddingVector]:
    vectors = embedder(texts)
    if len(vectors) != len(texts):
        raise ValueError(f"embedder returned {len(vectors)} vectors for {len(texts)} texts")
    if len({v.dims for v in vectors}) > 1:
        raise ValueError("embedder returned vectors of mixed dimensionality")
    return vectors


# --- index ------------------------------------------------------------------------


@dataclass
class VectorIndex:
    """Exact cosine index; build once, then read-only."""

    dims: int
    config: RetrievalConfig = field(default_factory=RetrievalConfig)
    chunks: list[CorpusChunk] = field(default_factory=list)
    _matrix: np.ndarray | None = field(default=None, init=False, repr=False)

    def add(self, chunks: Iterable[CorpusChunk]) -> None:
        if self._matrix is not None:
            raise RuntimeError("index is frozen")
        for c in chunks:
            if c.vector is None or c.vector.dims != self.dims:
                raise ValueError(f"chunk {c.chunk_id} lacks a {self.dims}-d vector")
            self.chunks.append(c)

    def freeze(self) -> "VectorIndex":
        if self._matrix is None:
            self.chunks.sort(key=lambda c: c.chunk_id)
            matrix = np.array([c.vector.values for c in self.chunks], dtype=float).reshape(-1, self.dims)
            norms = np.linalg.norm(matrix, axis=1)
            norms[norms == 0] = 1.0
            self._matrix = matrix / norms[:, None]
        return self

    def __len__(self) -> int:
        return len(self.chunks)

    def query_topk(self, query: EmbeddingVector, k: int) -> list[tuple[CorpusChunk, float]]:
        if not self.chunks:
            raise EmptyIndex("index has no chunks")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.freeze()
        q = np.asarray(query.values, dtype=float)
        qn = np.linalg.norm(q)
        sims = self._matrix @ (q / qn) if qn else np.zeros(len(self.chunks))
        ids = np.array([c.chunk_id for c in self.chunks])
        # scores equal up to float noise count as ties and break by chunk_id
        order = np.lexsort((ids, -np.round(sims, TIE_DECIMALS)))[:k]
        return [(self.chunks[i], float(sims[i])) for i in order]

    def to_json(self) -> str:
        payload = {
            "config": self.config.to_dict(),
            "dims": self.dims,
            "chunks": [c.to_dict() for c in sorted(self.chunks, key=lambda c: c.chunk_id)],
        }
        return json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def from_json(cls, text: str) -> "VectorIndex":
        data = json.loads(text)
        cfg = data["config"]
        config = RetrievalConfig(
            chunk_size=cfg["chunk_size"],
            overlap=cfg["overlap"],
            top_k=cfg["top_k"],
            keywords=tuple(cfg["keywords"]),
            mode=Configuration.parse(cfg["mode"]),
            token_budget=cfg.get("token_budget"),
        )
        index = cls(data["dims"], config)
        index.add(CorpusChunk.from_dict(c) for c in data["chunks"])
        return index.freeze()

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_index(docs: Mapping[str, str], config: RetrievalConfig, embedder: Embedder) -> VectorIndex:
    """Filter, chunk, embed and index a corpus."""
    segments = filter_segments(docs, config.keywords)
    chunks = chunk_segments(segments, config.chunk_size, config.overlap)
    vectors = embed([c.text for c in chunks], embedder)
    dims = vectors[0].dims if vectors else getattr(embedder, "dims", 0)
    index = VectorIndex(dims, config)
    index.add(
        CorpusChunk(c.chunk_id, c.doc_id, c.text, c.char_span, v) for c, v in zip(chunks, vectors)
    )
    return index.freeze()


def retrieve(index: VectorIndex, question: str, embedder: Embedder, k: int | None = None) -> list[tuple[CorpusChunk, float]]:
    [query] = embed([question], embedder)
    return index.query_topk(query, k or index.config.top_k)


# --- contextual documents and prompt assembly ----------------------------------------


@dataclass(frozen=True)
class ContextDocument:
    doc_id: str
    text: str


def load_manifest(path: str | Path) -> list[ContextDocument]:
    """Manifest: one document path per line, highest priority first; ``#`` comments."""
    path = Path(path)
    docs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        doc_path = (path.parent / entry).resolve() if not Path(entry).is_absolute() else Path(entry)
        if not doc_path.is_file():
            raise BadConfig(f"manifest {path} lists missing document {entry}")
        docs.append(ContextDocument(entry, doc_path.read_text(encoding="utf-8").strip()))
    if not docs:
        raise EmptyCorpus(f"manifest {path} lists no documents")
    return docs


def manifest_similarity(question: str, documents: Sequence[ContextDocument], embedder: Embedder) -> dict[str, float]:
    """Cosine between the question and each curated document; diagnostics only, never reorders."""
    vectors = embed([question] + [d.text for d in documents], embedder)
    q = np.asarray(vectors[0].values, dtype=float)
    out = {}
    for doc, vec in zip(documents, vectors[1:]):
        v = np.asarray(vec.values, dtype=float)
        denom = float(np.linalg.norm(q) * np.linalg.norm(v))
        out[doc.doc_id] = round(float(q @ v) / denom, 6) if denom else 0.0
    return out


@dataclass(frozen=True)
class AssembledPrompt:
    system_text: str
    user_text: str
    truncated: bool = False
    truncations: tuple[str, ...] = ()
    context_ids: tuple[str, ...] = ()


def count_tokens(text: str) -> int:
    return len(text.split())


def _render(question: str, blocks: Sequence[tuple[str, str]]) -> str:
    if not blocks:
        return question
    body = "\n\n".join(f"[{label}] {text}" for label, text in blocks)
    return f"{CONTEXT_HEADER}\n{body}\n\n{QUESTION_HEADER}\n{question}"


def _fits(system_text: str, user_text: str, budget: int | None) -> bool:
    return budget is None or count_tokens(system_text) + count_tokens(user_text) <= budget


def assemble_prompt(
    question: str,
    mode: Configuration | str,
    retrieved: Sequence[tuple[CorpusChunk, float]] | Sequence[CorpusChunk] = (),
    documents: Sequence[ContextDocument] = (),
    token_budget: int | None = None,
    system_text: str = DEFAULT_SYSTEM_PROMPT,
) -> AssembledPrompt:
    """Place context above the question under a ``Reference material:`` header.

    Over budget, the lowest-ranked chunk (RAG) is dropped or the
    lowest-priority document (contextual) is cut from its end until the prompt
    fits. ContextOverflow is raised only if the bare question cannot fit.
    """
    mode = Configuration.parse(mode)
    if mode is Configuration.BASELINE:
        if not _fits(system_text, question, token_budget):
            raise ContextOverflow("question alone exceeds the token budget")
        return AssembledPrompt(system_text, question)

    if mode is Configuration.RAG:
        chunks = [item[0] if isinstance(item, tuple) else item for item in retrieved]
        blocks = [(f"{c.doc_id}:{c.chunk_id}", c.text) for c in chunks]
    else:
        blocks = [(d.doc_id, d.text) for d in documents]
    if not blocks:
        raise BadConfig(f"{mode.value} mode needs context to assemble")

    truncations: list[str] = []
    while not _fits(system_text, _render(question, blocks), token_budget):
        if not blocks:
            raise ContextOverflow("question alone exceeds the token budget")
        label, text = blocks[-1]
        if mode is Configuration.RAG:
            blocks.pop()
            truncations.append(f"dropped {label}")
            continue
        words = text.split()
        excess = count_tokens(system_text) + count_tokens(_render(question, blocks)) - token_budget
        keep = len(words) - excess
        if keep > 0:
            blocks[-1] = (label, " ".join(words[:keep]))
            truncations.append(f"truncated {label} to {keep} of {len(words)} words")
        else:
            blocks.pop()
            truncations.append(f"dropped {label}")
    if not blocks:
        raise ContextOverflow("no context fits within the token budget")
    return AssembledPrompt(
        system_text,
        _render(question, blocks),
        truncated=bool(truncations),
        truncations=tuple(truncations),
        context_ids=tuple(label for label, _ in blocks),
    )
