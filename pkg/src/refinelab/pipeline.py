"""Translation and iterative-refinement pipelines.

A run translates every document at one granularity (step s0), then each
refinement step revises the current translation at a possibly different
granularity.  Every refinement prompt carries the source context and the
full current translation (except the monolingual strategy, which never
sees the source); only the local unit is rewritten, and revised units are
merged back with the double-newline delimiter.  Steps are append-only.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import (
    DELIMITER,
    Corpus,
    Document,
    Segment,
    UnitSpan,
    merge_units,
    plan_units,
    span_text,
    split_units,
)
from .gateway import Backend, BackendError, GenerationRequest
from .judge import MqmError, extract_json_object
from .prompts import (
    ERROR_DIMENSION_INSTRUCTIONS,
    ERROR_TASK_DESCRIPTIONS,
    PromptTemplate,
    language_name,
    load_templates,
    render_prompt,
)

logger = logging.getLogger(__name__)

STRATEGY_KINDS = (
    "general",
    "monolingual",
    "step_by_step",
    "eval_refine",
    "error_specific",
)

MAX_REFINE_STEPS = 4

_GRAN_NOUN = {"segment": "segment", "paragraph": "paragraph", "doc_chunk": "document"}


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    kind: str
    dimension: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise PipelineError(f"unknown strategy: {self.kind!r}")
        if self.kind == "error_specific":
            if self.dimension not in ERROR_DIMENSION_INSTRUCTIONS:
                raise PipelineError(
                    "error_specific strategy needs dimension 'accuracy' or 'fluency'"
                )
        elif self.dimension is not None:
            raise PipelineError(f"strategy {self.kind} takes no dimension")

    @property
    def tag(self) -> str:
        return f"{self.kind}_{self.dimension}" if self.dimension else self.kind

    @classmethod
    def parse(cls, spec) -> "Strategy":
        if isinstance(spec, Strategy):
            return spec
        if isinstance(spec, str):
            if spec.startswith("error_specific_"):
                return cls("error_specific", spec[len("error_specific_"):])
            return cls(spec)
        return cls(spec["kind"], spec.get("dimension"))


@dataclass(frozen=True)
class GranularityPlanConfig:
    g_mt: str
    g_refine: str

    def __post_init__(self) -> None:
        for g in (self.g_mt, self.g_refine):
            if g not in _GRAN_NOUN:
                raise PipelineError(f"unknown granularity: {g!r}")


@dataclass(frozen=True)
class Step:
    """One pipeline step: per-unit texts at the step's granularity."""

    index: int
    granularity: str
    unit_texts: tuple[str, ...]
    merged_text: str
    provenance: dict
    diagnosis: tuple | None = None  # eval_refine: per-unit MqmError tuples / None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.merged_text != merge_units(list(self.unit_texts)):
            raise PipelineError("merged text does not equal merged unit texts")


@dataclass
class DocumentRun:
    doc_id: str
    steps: list[Step] = field(default_factory=list)

    @property
    def latest(self) -> Step:
        return self.steps[-1]


@dataclass
class TranslationRun:
    g_mt: str
    provenance: dict
    doc_runs: dict[str, DocumentRun]
    sample_index: int = 0
    sample_seed: int | None = None
    partial: bool = False
    failed_units: list[str] = field(default_factory=list)
    max_refine_steps: int = MAX_REFINE_STEPS

    @property
    def n_steps(self) -> int:
        return max(len(d.steps) for d in self.doc_runs.values())


_FENCE_WRAP_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)
_LABEL_RE = re.compile(
    r"^(?:(?:refined|revised|improved|final|polished)\s+)?"
    r"(?:segment|paragraph|translation|text)\s*#?\d*\s*:\s*",
    re.IGNORECASE,
)
_EXCESS_NEWLINES_RE = re.compile(r"\n{3,}")


def sanitize_output(text: str) -> str:
    """Strip fences, wrapping quotes and leading labels from model output."""
    t = text.strip()
    fence = _FENCE_WRAP_RE.match(t)
    if fence:
        t = fence.group(1).strip()
    t = _LABEL_RE.sub("", t, count=1)
    if len(t) >= 2 and t[0] == '"' and t[-1] == '"':
        t = t[1:-1]
    t = _EXCESS_NEWLINES_RE.sub(DELIMITER, t)
    return t.strip()


def _source_chunk_context(doc: Document, lo_frac: float, hi_frac: float,
                          include_siblings: bool) -> str:
    """Source context for a unit covering the given positional fraction.

    Documents above one chunk default to chunk-local context: the text of
    the 2,048-word source chunks overlapping the unit's position.
    """
    chunks = plan_units(doc, "doc_chunk")
    if include_siblings or len(chunks) <= 1:
        return doc.full_text
    n = len(doc.segments)
    lo_seg = int(lo_frac * n)
    hi_seg = min(n - 1, int(hi_frac * n))
    parts = [
        span_text(doc, c)
        for c in chunks
        if c.start_seg <= hi_seg and c.end_seg >= lo_seg
    ]
    return DELIMITER.join(parts)


def _target_document(doc: Document, merged_text: str) -> Document:
    texts = split_units(merged_text)
    segments = tuple(Segment(doc.id, i, t) for i, t in enumerate(texts))
    return Document(doc.id, segments, doc.pair, lang=doc.pair.tgt)


def _aligned_source_text(doc: Document, tgt_doc: Document, span: UnitSpan) -> str:
    """Source text aligned to a target-side span.

    Index alignment when segmentations agree; positional mapping when the
    refiner changed the segment count.
    """
    n_src, n_tgt = len(doc.segments), len(tgt_doc.segments)
    if n_src == n_tgt:
        return span_text(doc, UnitSpan(span.granularity, span.start_seg, span.end_seg))
    lo = min(n_src - 1, span.start_seg * n_src // n_tgt)
    hi = min(n_src - 1, span.end_seg * n_src // n_tgt)
    return span_text(doc, UnitSpan(span.granularity, lo, hi))


def _generate_text(
    backend: Backend,
    system: str,
    turns: tuple[tuple[str, str], ...],
    temperature: float,
    max_output_tokens: int | None,
    sample_seed: int | None,
) -> str:
    gen = backend.generate(
        GenerationRequest(
            system_prompt=system,
            turns=turns,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
            sample_seed=sample_seed,
        )
    )
    return gen.text


def translate_corpus(
    corpus: Corpus,
    g_mt: str,
    backend: Backend,
    templates: dict[str, PromptTemplate] | None = None,
    n_samples: int = 1,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
    include_sibling_chunks: bool = False,
    base_seed: int = 0,
) -> list[TranslationRun]:
    """Produce initial translations (step s0); one run per sample.

    Sampling more than one candidate requires temperature > 0; sampled
    runs carry their index and seed.  Unit failures leave the source text
    in place and mark the run partial.
    """
    if n_samples < 1:
        raise PipelineError("n_samples must be >= 1")
    if n_samples > 1 and temperature <= 0:
        raise PipelineError("sampling requires temperature > 0")
    templates = templates or load_templates()
    template = templates["translate_unit"]

    runs = []
    for sample in range(n_samples):
        seed = None if n_samples == 1 else base_seed + sample
        doc_runs: dict[str, DocumentRun] = {}
        failed: list[str] = []
        for doc in corpus.documents:
            if not doc.segments:
                raise PipelineError(f"document {doc.id} has no segments")
            spans = plan_units(doc, g_mt, lang=doc.lang)
            n = len(doc.segments)

            def translate_unit(item: tuple[int, UnitSpan]) -> tuple[str, str | None]:
                idx, span = item
                unit = span_text(doc, span)
                system, user = render_prompt(
                    template,
                    {
                        "src_lang": language_name(doc.pair.src),
                        "tgt_lang": language_name(doc.pair.tgt),
                        "full_src": _source_chunk_context(
                            doc, span.start_seg / n, span.end_seg / n,
                            include_sibling_chunks,
                        ),
                        "unit_to_translate": unit,
                    },
                )
                try:
                    raw = _generate_text(
                        backend, system, (("user", user),), temperature,
                        max_output_tokens, seed,
                    )
                except BackendError as exc:
                    logger.error("unit %s[%d] failed: %s", doc.id, idx, exc)
                    return unit, f"{doc.id}:u{idx}"
                text = sanitize_output(raw)
                return (text or unit), None

            with ThreadPoolExecutor(max_workers=backend.max_concurrency) as pool:
                results = list(pool.map(translate_unit, enumerate(spans)))
            unit_texts = tuple(text for text, _ in results)
            failed.extend(f for _, f in results if f)
            doc_runs[doc.id] = DocumentRun(
                doc.id,
                [
                    Step(
                        index=0,
                        granularity=g_mt,
                        unit_texts=unit_texts,
                        merged_text=merge_units(list(unit_texts)),
                        provenance={
                            "backend_id": backend.backend_id,
                            "template_digest": template.digest(),
                            "strategy": None,
                        },
                    )
                ],
            )
        runs.append(
            TranslationRun(
                g_mt=g_mt,
                provenance={
                    "backend_id": backend.backend_id,
                    "temperature": temperature,
                },
                doc_runs=doc_runs,
                sample_index=sample,
                sample_seed=seed,
                partial=bool(failed),
                failed_units=failed,
            )
        )
    return runs


def _refine_template_name(strategy: Strategy, g_refine: str) -> str:
    if strategy.kind == "general":
        return f"general_{_GRAN_NOUN[g_refine]}"
    if strategy.kind == "monolingual":
        return f"monolingual_{_GRAN_NOUN[g_refine]}"
    if strategy.kind == "error_specific":
        return "error_specific"
    if strategy.kind == "eval_refine":
        return "eval_refine_diagnose"
    raise PipelineError(f"no refine template for strategy {strategy.kind}")


def parse_diagnosis(raw: str) -> list[MqmError] | None:
    """Parse the diagnosis stage's error list; None when unparseable."""
    obj = extract_json_object(raw)
    if obj is None or not isinstance(obj.get("errors"), list):
        return None
    errors = []
    for rec in obj["errors"]:
        if not isinstance(rec, dict):
            return None
        type_field = str(rec.get("type", "other")).strip().lower()
        category, _, subtype = type_field.partition("/")
        severity = str(rec.get("severity", "")).strip().lower()
        try:
            errors.append(
                MqmError(
                    error_category=category or "other",
                    error_type=subtype or type_field,
                    severity=severity,
                    explanation=str(rec.get("explanation", "")),
                    error_span=rec.get("text"),
                )
            )
        except ValueError:
            logger.warning("diagnosis record with bad severity skipped: %r", severity)
    return errors


def refine_once(
    run: TranslationRun,
    strategy: Strategy,
    g_refine: str,
    backend: Backend,
    corpus: Corpus,
    templates: dict[str, PromptTemplate] | None = None,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
    include_sibling_chunks: bool = False,
    cascade: bool = False,
) -> TranslationRun:
    """Append one refinement step to every document of the run.

    The step partitions the previous step's merged translation at
    g_refine and revises each unit; empty refiner outputs keep the
    previous unit text.  For eval_refine a diagnosis conversation runs
    first and its parsed error list is stored on the step.

    By default every unit sees the previous step's frozen full translation
    as context; with ``cascade=True`` units run sequentially and later
    units see earlier units of the same step already revised.
    """
    if strategy.kind == "step_by_step":
        raise PipelineError(
            "step_by_step replaces the whole pipeline; use step_by_step_translate"
        )
    templates = templates or load_templates()
    template = templates[_refine_template_name(strategy, g_refine)]
    docs_by_id = {d.id: d for d in corpus.documents}

    for doc_id, doc_run in run.doc_runs.items():
        if not doc_run.steps:
            raise PipelineError(f"document {doc_id} has no initial step")
        if len(doc_run.steps) - 1 >= run.max_refine_steps:
            raise PipelineError(
                f"refinement step budget ({run.max_refine_steps}) exhausted"
            )
        doc = docs_by_id[doc_id]
        prev = doc_run.latest
        tgt_doc = _target_document(doc, prev.merged_text)
        spans = plan_units(tgt_doc, g_refine, lang=doc.pair.tgt)
        n_tgt = len(tgt_doc.segments)

        def refine_unit(item: tuple[int, UnitSpan], tgt_context: str | None = None):
            """Returns (text, diagnosis, unit flags); safe to run in parallel."""
            idx, span = item
            unit = span_text(tgt_doc, span)
            unit_flags: list[str] = []
            diagnosis = None
            lo_frac, hi_frac = span.start_seg / n_tgt, span.end_seg / n_tgt
            if tgt_context is None:
                tgt_context = _target_chunk_context(
                    tgt_doc, span, include_sibling_chunks
                )
            ctx = _refine_context(
                strategy, doc, tgt_doc, span, unit, idx,
                _source_chunk_context(doc, lo_frac, hi_frac, include_sibling_chunks),
                tgt_context,
            )
            system, user = render_prompt(template, ctx)
            turns: tuple[tuple[str, str], ...] = (("user", user),)
            if strategy.kind == "eval_refine":
                try:
                    diag_raw = _generate_text(
                        backend, system, turns, temperature, max_output_tokens,
                        run.sample_seed,
                    )
                except BackendError as exc:
                    logger.error("diagnosis for %s[%d] failed: %s", doc_id, idx, exc)
                    return unit, None, [f"u{idx}: diagnosis failed"]
                diagnosis = parse_diagnosis(diag_raw)
                if diagnosis is None:
                    unit_flags.append(f"u{idx}: diagnosis unparsed")
                _, revise_user = render_prompt(
                    templates["eval_refine_revise"], {"segment_number": idx + 1}
                )
                turns = (("user", user), ("assistant", diag_raw),
                         ("user", revise_user))
            try:
                raw = _generate_text(
                    backend, system, turns, temperature, max_output_tokens,
                    run.sample_seed,
                )
            except BackendError as exc:
                logger.error("refine %s[%d] failed: %s", doc_id, idx, exc)
                unit_flags.append(f"u{idx}: backend failure, kept previous text")
                return unit, diagnosis, unit_flags
            text = sanitize_output(raw)
            if not text:
                unit_flags.append(f"u{idx}: empty output, kept previous text")
                return unit, diagnosis, unit_flags
            return text, diagnosis, unit_flags

        if cascade:
            # Sequential: later units see earlier ones already revised.
            working = [span_text(tgt_doc, s) for s in spans]
            results = []
            for idx, span in enumerate(spans):
                result = refine_unit((idx, span), merge_units(working))
                working[idx] = result[0]
                results.append(result)
        else:
            with ThreadPoolExecutor(max_workers=backend.max_concurrency) as pool:
                results = list(pool.map(refine_unit, enumerate(spans)))
        unit_texts = tuple(text for text, _, _ in results)
        diagnoses = [diag for _, diag, _ in results]
        flags = [flag for _, _, unit_flags in results for flag in unit_flags]
        doc_run.steps.append(
            Step(
                index=len(doc_run.steps),
                granularity=g_refine,
                unit_texts=unit_texts,
                merged_text=merge_units(list(unit_texts)),
                provenance={
                    "backend_id": backend.backend_id,
                    "template_digest": template.digest(),
                    "strategy": strategy.tag,
                },
                diagnosis=tuple(diagnoses) if strategy.kind == "eval_refine" else None,
                flags=tuple(flags),
            )
        )
    return run


def _target_chunk_context(tgt_doc: Document, span: UnitSpan,
                          include_siblings: bool) -> str:
    chunks = plan_units(tgt_doc, "doc_chunk", lang=tgt_doc.lang)
    if include_siblings or len(chunks) <= 1:
        return tgt_doc.full_text
    parts = [
        span_text(tgt_doc, c)
        for c in chunks
        if c.start_seg <= span.end_seg and c.end_seg >= span.start_seg
    ]
    return DELIMITER.join(parts)


def _refine_context(
    strategy: Strategy,
    doc: Document,
    tgt_doc: Document,
    span: UnitSpan,
    unit: str,
    idx: int,
    src_context: str,
    tgt_context: str,
) -> dict:
    src_name = language_name(doc.pair.src)
    tgt_name = language_name(doc.pair.tgt)
    number = idx + 1
    if strategy.kind == "general":
        ctx = {
            "src_lang": src_name,
            "tgt_lang": tgt_name,
            "full_src": src_context,
            "full_translation": tgt_context,
        }
        if span.granularity == "segment":
            ctx.update(segment_number=number, segment_to_refine=unit)
        elif span.granularity == "paragraph":
            ctx.update(paragraph_number=number, paragraph_to_refine=unit)
        else:
            ctx["full_translation"] = unit
        return ctx
    if strategy.kind == "monolingual":
        # Never sees the source document.
        ctx = {"tgt_lang": tgt_name, "full_translation": tgt_context}
        if span.granularity == "segment":
            ctx.update(segment_number=number, segment_to_refine=unit)
        elif span.granularity == "paragraph":
            ctx.update(paragraph_number=number, paragraph_to_refine=unit)
        else:
            ctx["full_translation"] = unit
        return ctx
    if strategy.kind == "error_specific":
        return {
            "source_language": src_name,
            "target_language": tgt_name,
            "full_source": src_context,
            "full_translation": tgt_context,
            "segment_number": number,
            "focused_dimensions": strategy.dimension,
            "source_segment": _aligned_source_text(doc, tgt_doc, span),
            "current_segment": unit,
            "task_description": ERROR_TASK_DESCRIPTIONS[strategy.dimension],
            "dimension_instructions": ERROR_DIMENSION_INSTRUCTIONS[strategy.dimension],
        }
    if strategy.kind == "eval_refine":
        return {
            "src_lang": src_name,
            "tgt_lang": tgt_name,
            "full_src": src_context,
            "full_translation": tgt_context,
            "segment_number": number,
            "src_segment": _aligned_source_text(doc, tgt_doc, span),
            "segment_to_eval": unit,
        }
    raise PipelineError(f"unsupported strategy: {strategy.kind}")


STAGES = ("research", "draft", "refine", "proofread")


def step_by_step_translate(
    doc: Document,
    backend: Backend,
    templates: dict[str, PromptTemplate] | None = None,
    temperature: float = 0.0,
    max_output_tokens: int | None = None,
) -> TranslationRun:
    """Four-stage conversation per chunk: research, draft, refine, proofread.

    Each stage appends to the same conversation; the proofread text is the
    final output.  Draft/refine/proofread become steps s0..s2; the
    research notes are kept in the run provenance.
    """
    if not doc.segments:
        raise PipelineError(f"document {doc.id} is empty")
    templates = templates or load_templates()
    spans = plan_units(doc, "doc_chunk", lang=doc.lang)
    src_name = language_name(doc.pair.src)
    tgt_name = language_name(doc.pair.tgt)

    def run_chunk(item: tuple[int, UnitSpan]):
        idx, span = item
        chunk = span_text(doc, span)
        stage_ctx = {
            "research": {
                "src_lang": src_name,
                "tgt_lang": tgt_name,
                "src_text_display": chunk,
            },
            "draft": {"src_lang": src_name, "tgt_lang": tgt_name},
            "refine": {"tgt_lang": tgt_name},
            "proofread": {"tgt_lang": tgt_name},
        }
        turns: list[tuple[str, str]] = []
        outputs: dict[str, str] = {}
        for stage in STAGES:
            system, user = render_prompt(
                templates[f"step_by_step_{stage}"], stage_ctx[stage]
            )
            turns.append(("user", user))
            try:
                raw = _generate_text(
                    backend, system, tuple(turns), temperature,
                    max_output_tokens, None,
                )
            except BackendError as exc:
                raise PipelineError(
                    f"chunk {idx} failed at stage {stage!r}: {exc}"
                ) from exc
            turns.append(("assistant", raw))
            outputs[stage] = raw if stage == "research" else (
                sanitize_output(raw) or chunk
            )
        return outputs

    with ThreadPoolExecutor(max_workers=backend.max_concurrency) as pool:
        chunk_outputs = list(pool.map(run_chunk, enumerate(spans)))

    doc_run = DocumentRun(doc.id)
    for step_idx, stage in enumerate(("draft", "refine", "proofread")):
        unit_texts = tuple(out[stage] for out in chunk_outputs)
        doc_run.steps.append(
            Step(
                index=step_idx,
                granularity="doc_chunk",
                unit_texts=unit_texts,
                merged_text=merge_units(list(unit_texts)),
                provenance={
                    "backend_id": backend.backend_id,
                    "strategy": "step_by_step",
                    "stage": stage,
                },
            )
        )
    return TranslationRun(
        g_mt="doc_chunk",
        provenance={
            "backend_id": backend.backend_id,
            "strategy": "step_by_step",
            "research_outputs": [out["research"] for out in chunk_outputs],
        },
        doc_runs={doc.id: doc_run},
    )
