"""Per-question analysis and per-exam runs, independent of the command line."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from mathinterp.ablation import SkippedAblation, decompose_prompt, generate_ablations
from mathinterp.config import ExamFile, RunConfig
from mathinterp.divergence import score_responses
from mathinterp.errors import BadConfig, GatewayError, MathInterpError, NoTrials
from mathinterp.flow import ReasoningFlow, extract_flow
from mathinterp.gateway import CompletionResponse, LLMClient, ReplayCache, TrialFailure, build_system_prompt
from mathinterp.metrics import AblationTrial, ExamMetrics, QuestionMetrics, exam_aggregate, question_metrics
from mathinterp.modes import Configuration
from mathinterp.report import AnalysisReport, export_exam_table, export_graph_dot, render_question_report
from mathinterp.retrieval import (
    AssembledPrompt,
    ContextDocument,
    Embedder,
    HashingEmbedder,
    HttpEmbedder,
    VectorIndex,
    assemble_prompt,
    build_index,
    load_manifest,
    manifest_similarity,
    read_corpus,
    retrieve,
)

log = logging.getLogger(__name__)


class QuestionFailed(MathInterpError):
    def __init__(self, question_id: str, cause: Exception):
        super().__init__(f"question {question_id}: {type(cause).__name__}: {cause}")
        self.question_id = question_id
        self.cause = cause


def make_embedder(config: RunConfig) -> Embedder:
    if config.embedding.url:
        return HttpEmbedder(config.embedding)
    return HashingEmbedder(config.embedding.dims)


def make_client(config: RunConfig, transport: Any = None) -> LLMClient:
    cache = ReplayCache(config.cache_dir) if config.cache_dir is not None else None
    return LLMClient(config.endpoint, cache, config.replay_only, transport)


@dataclass
class PromptBuilder:
    """Turns a (possibly ablated) question into system and user text for one configuration."""

    mode: Configuration
    system_text: str
    token_budget: int | None = None
    index: VectorIndex | None = None
    embedder: Embedder | None = None
    documents: Sequence[ContextDocument] = ()
    top_k: int | None = None
    _hits: dict[str, list] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def retrieved(self, anchor: str) -> list:
        with self._lock:
            if anchor not in self._hits:
                self._hits[anchor] = retrieve(self.index, anchor, self.embedder, self.top_k)
            return self._hits[anchor]

    def __call__(self, question: str, anchor: str) -> AssembledPrompt:
        # retrieval is keyed on the unablated question so every trial sees the same context
        retrieved = self.retrieved(anchor) if self.mode is Configuration.RAG else ()
        return assemble_prompt(question, self.mode, retrieved, self.documents, self.token_budget, self.system_text)

    def diagnostics(self, question: str) -> dict[str, Any]:
        if self.mode is Configuration.RAG:
            hits = self.retrieved(question)
            return {"retrieved": [{"chunk": f"{c.doc_id}:{c.chunk_id}", "similarity": round(s, 6)} for c, s in hits]}
        if self.mode is Configuration.CONTEXTUAL and self.embedder is not None:
            return {"manifest_similarity": manifest_similarity(question, self.documents, self.embedder)}
        return {}


def prompt_builder(config: RunConfig, mode: Configuration | str) -> PromptBuilder:
    """Validate that ``mode`` is runnable under ``config`` and prepare its context source."""
    mode = Configuration.parse(mode)
    system_text = build_system_prompt(config.system_prompt)
    builder = PromptBuilder(mode, system_text, config.retrieval.token_budget, top_k=config.retrieval.top_k)
    if mode is Configuration.RAG:
        embedder = make_embedder(config)
        if config.index_path is not None and Path(config.index_path).is_file():
            index = VectorIndex.load(config.index_path)
        elif config.corpus_dir is not None:
            index = build_index(read_corpus(config.corpus_dir), config.retrieval, embedder)
        else:
            raise BadConfig("rag mode needs retrieval.corpus or retrieval.index")
        if not len(index):
            raise BadConfig("rag index has no chunks; check retrieval.keywords")
        builder.index, builder.embedder = index, embedder
    elif mode is Configuration.CONTEXTUAL:
        if config.manifest is None:
            raise BadConfig("contextual mode needs retrieval.manifest")
        builder.documents = load_manifest(config.manifest)
        builder.embedder = make_embedder(config)
    return builder


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    report: AnalysisReport
    metrics: QuestionMetrics
    flow: ReasoningFlow
    original_response: str = ""
    trials: tuple[AblationTrial, ...] = ()


def analyze_question(
    question_id: str,
    prompt: str,
    *,
    config: RunConfig,
    client: LLMClient,
    builder: PromptBuilder,
    timestamp: str,
    parallelism: int | None = None,
) -> QuestionResult:
    """Decompose, ablate, query, score and annotate one question."""
    try:
        return _analyze(question_id, prompt, config, client, builder, timestamp, parallelism)
    except MathInterpError as exc:
        raise QuestionFailed(question_id, exc) from exc


def _analyze(
    question_id: str,
    prompt: str,
    config: RunConfig,
    client: LLMClient,
    builder: PromptBuilder,
    timestamp: str,
    parallelism: int | None,
) -> QuestionResult:
    elements = decompose_prompt(prompt, config.lexicon("instructions"))
    skipped: list[SkippedAblation] = []
    ablations = generate_ablations(prompt, elements, skipped)

    assembled = [builder(prompt, prompt)] + [builder(a.text, prompt) for a in ablations]
    requests = [client.request(p.user_text, p.system_text) for p in assembled]
    results = client.run_trials(requests, parallelism)

    original = results[0]
    if isinstance(original, TrialFailure):
        raise GatewayError(f"original prompt failed: {original.error_type}: {original.message}")
    kept = [(a, r) for a, r in zip(ablations, results[1:]) if isinstance(r, CompletionResponse)]
    failures = [r for r in results[1:] if isinstance(r, TrialFailure)]
    if not kept:
        raise NoTrials("every ablation trial failed or was skipped")

    scores = score_responses(original.text, [r.text for _, r in kept], config.alpha)
    trials = [AblationTrial(a.element, a.text, r.text, s) for (a, r), s in zip(kept, scores)]
    flow = extract_flow(original.text, config.lexicon("operations"), config.lexicon("concepts"), config.thresholds)
    metrics = question_metrics(question_id, trials, flow)

    metadata = {
        "configuration": builder.mode.value,
        "alpha": config.alpha,
        "model": config.endpoint.model,
        "temperature": config.endpoint.temperature,
        "max_tokens": config.endpoint.max_tokens,
        "robustness": metrics.robustness,
        "phrase_sensitivity": metrics.phrase_sensitivity,
        "trials": len(trials),
        "failed_trials": [f.to_dict() for f in failures],
        "skipped_ablations": [{**s.element.to_dict(), "reason": s.reason} for s in skipped],
        "truncated": any(p.truncated for p in assembled),
        "truncations": sorted({t for p in assembled for t in p.truncations}),
        "context_ids": list(assembled[0].context_ids),
        "context_diagnostics": builder.diagnostics(prompt),
        "zero_norm_trials": sum(s.zero_norm for s in scores),
    }
    report = AnalysisReport.build(
        timestamp=timestamp,
        model_name=config.endpoint.model,
        question_text=prompt,
        impacts=metrics.impacts,
        flow=flow,
        run_metadata=metadata,
        question_id=question_id,
    )
    return QuestionResult(question_id, report, metrics, flow, original.text, tuple(trials))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def write_question_outputs(out_dir: Path, result: QuestionResult) -> None:
    qid = result.question_id
    _write(out_dir / "questions" / f"{qid}.md", render_question_report(result.report, "markdown"))
    _write(out_dir / "questions" / f"{qid}.json", render_question_report(result.report, "json"))
    _write(out_dir / "graphs" / f"{qid}.dot", export_graph_dot(result.flow, qid))


def write_json(path: Path, data: Any) -> None:
    _write(path, json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n")


@dataclass
class ExamRun:
    exam: ExamFile
    configuration: Configuration
    results: list[QuestionResult] = field(default_factory=list)
    failures: list[QuestionFailed] = field(default_factory=list)
    metrics: ExamMetrics | None = None

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def metadata(self, config: RunConfig, timestamp: str) -> dict[str, Any]:
        return {
            "timestamp": timestamp,
            "exam_id": self.exam.exam_id,
            "course": self.exam.course,
            "configuration": self.configuration.value,
            "questions_total": len(self.exam.questions),
            "n": len(self.results),
            "failed_questions": [{"question_id": f.question_id, "error": str(f.cause),
                                  "error_type": type(f.cause).__name__} for f in self.failures],
            "settings": config.to_dict(),
        }


def run_exam(
    exam: ExamFile,
    mode: Configuration | str,
    config: RunConfig,
    out_dir: Path,
    *,
    timestamp: str,
    client: LLMClient,
    builder: PromptBuilder | None = None,
    question_parallelism: int = 1,
    on_question: Callable[[str, QuestionResult | QuestionFailed], None] | None = None,
) -> ExamRun:
    """Analyse every question; failures are isolated and the aggregate uses the rest."""
    mode = Configuration.parse(mode)
    builder = builder or prompt_builder(config, mode)
    run = ExamRun(exam, mode)

    def one(q) -> QuestionResult | QuestionFailed:
        try:
            return analyze_question(
                q.question_id, q.prompt, config=config, client=client, builder=builder, timestamp=timestamp
            )
        except QuestionFailed as exc:
            return exc

    if question_parallelism > 1:
        with ThreadPoolExecutor(max_workers=question_parallelism) as pool:
            outcomes = list(pool.map(one, exam.questions))
    else:
        outcomes = [one(q) for q in exam.questions]

    for outcome in outcomes:
        if on_question is not None:
            on_question(outcome.question_id, outcome)
        if isinstance(outcome, QuestionFailed):
            log.error("%s", outcome)
            run.failures.append(outcome)
        else:
            run.results.append(outcome)
            write_question_outputs(out_dir, outcome)

    if run.results:
        run.metrics = exam_aggregate([r.metrics for r in run.results], exam.exam_id, mode, exam.course)
        _write(out_dir / "exam_metrics.csv", export_exam_table([run.metrics], "csv"))
        write_json(out_dir / "exam_metrics.json", run.metrics.to_dict())
    write_json(out_dir / "run_metadata.json", run.metadata(config, timestamp))
    return run
