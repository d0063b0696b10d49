"""Reference-free MQM-style judging with length-normalized scores.

Each segment is judged with the full document as context; parsed errors
are weighted 1/3/5 by severity, summed per document, and normalized to a
1,000-token basis:

    score = max(0, 100 - (sum of weights / doc_len_tokens) * 1000)

Dimension scores reuse the same normalization over keyword-matched
category buckets; the overall score is NOT the mean of the dimensions.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import LanguagePair, count_words, merge_units
from .gateway import Backend, Generation, GenerationRequest
from .prompts import PromptTemplate, load_templates, language_name, render_prompt

logger = logging.getLogger(__name__)

SEVERITIES = ("minor", "major", "critical")
SEVERITY_WEIGHTS = {"minor": 1.0, "major": 3.0, "critical": 5.0}

# Dimension buckets; an error joins every bucket whose keyword occurs in
# its category text (case-insensitive substring), else it falls to other.
DIMENSION_KEYWORDS = {
    "accuracy": ("accuracy",),
    "fluency": ("fluency",),
    "style_term": ("style", "terminology"),
}
DIMENSIONS = ("accuracy", "fluency", "style_term", "other")


class JudgeError(ValueError):
    """Raised for judge contract violations and unparseable responses."""


@dataclass(frozen=True)
class MqmError:
    error_category: str
    error_type: str
    severity: str
    explanation: str = ""
    error_span: str | None = None

    def __post_init__(self) -> None:
        if self.severity not in SEVERITIES:
            raise JudgeError(f"unknown severity: {self.severity!r}")

    @property
    def weight(self) -> float:
        return SEVERITY_WEIGHTS[self.severity]

    def buckets(self) -> list[str]:
        cat = self.error_category.lower()
        hits = [
            dim
            for dim, keys in DIMENSION_KEYWORDS.items()
            if any(k in cat for k in keys)
        ]
        return hits or ["other"]

    def to_dict(self) -> dict:
        return {
            "error_category": self.error_category,
            "error_type": self.error_type,
            "severity": self.severity,
            "explanation": self.explanation,
            "error_span": self.error_span,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "MqmError":
        return cls(
            error_category=str(rec.get("error_category", "")),
            error_type=str(rec.get("error_type", "")),
            severity=str(rec.get("severity", "")).lower(),
            explanation=str(rec.get("explanation", "")),
            error_span=rec.get("error_span"),
        )


@dataclass(frozen=True)
class SegmentJudgment:
    quality_explanation: str
    quality_score: int
    errors: tuple[MqmError, ...]
    raw_response: str
    parse_status: str = "ok"


@dataclass(frozen=True)
class DocJudgment:
    doc_id: str
    pair: str
    segments: tuple[SegmentJudgment | None, ...]
    doc_len_tokens: int
    normalized_overall: float
    dimension_scores: dict[str, float]
    tokenization: str = "whitespace"

    @property
    def coverage(self) -> float:
        scored = sum(1 for s in self.segments if s is not None)
        return scored / len(self.segments) if self.segments else 0.0

    @property
    def errors(self) -> list[MqmError]:
        out: list[MqmError] = []
        for seg in self.segments:
            if seg is not None:
                out.extend(seg.errors)
        return out

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "pair": self.pair,
            "doc_len_tokens": self.doc_len_tokens,
            "tokenization": self.tokenization,
            "normalized_overall": self.normalized_overall,
            "dimension_scores": dict(self.dimension_scores),
            "coverage": self.coverage,
            "segments": [
                None
                if seg is None
                else {
                    "quality_explanation": seg.quality_explanation,
                    "quality_score": seg.quality_score,
                    "parse_status": seg.parse_status,
                    "errors": [e.to_dict() for e in seg.errors],
                }
                for seg in self.segments
            ],
        }


def normalized_score(errors: list[MqmError], doc_len_tokens: int) -> float:
    """Severity-weighted error mass per 1,000 tokens, clamped to [0, 100]."""
    if doc_len_tokens <= 0:
        raise JudgeError("doc_len_tokens must be > 0")
    total = sum(e.weight for e in errors)
    return max(0.0, 100.0 - total / doc_len_tokens * 1000.0)


def dimension_scores(errors: list[MqmError], doc_len_tokens: int) -> dict[str, float]:
    """Per-dimension normalized scores via keyword bucketing.

    Buckets are not mutually exclusive: an error whose category matches
    several keywords contributes to each matching dimension.
    """
    by_dim: dict[str, list[MqmError]] = {dim: [] for dim in DIMENSIONS}
    for err in errors:
        for dim in err.buckets():
            by_dim[dim].append(err)
    return {
        dim: normalized_score(errs, doc_len_tokens) for dim, errs in by_dim.items()
    }


_FENCE_RE = re.compile(r"^\s*```[a-zA-Z]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)


def extract_json_object(raw: str) -> dict | None:
    """Parse repair ladder: as-is, fence-stripped, first balanced object."""
    for candidate in _repair_candidates(raw):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _repair_candidates(raw: str):
    yield raw
    fence = _FENCE_RE.match(raw)
    if fence:
        yield fence.group(1)
    start = raw.find("{")
    if start == -1:
        return
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                yield raw[start : i + 1]
                return


def parse_judge_response(raw: str) -> SegmentJudgment:
    """Tolerant parse of one judge reply to the document-context MQM prompt."""
    if not raw:
        raise JudgeError("empty judge response")
    obj = extract_json_object(raw)
    if obj is None:
        raise JudgeError(f"unparseable judge response: {raw[:2000]}")

    try:
        score = int(obj["quality_score"])
    except (KeyError, TypeError, ValueError) as exc:
        raise JudgeError(f"judge response missing quality_score: {raw[:500]}") from exc
    if not 0 <= score <= 100:
        raise JudgeError(f"quality_score out of range: {score}")

    errors = []
    raw_errors = obj.get("errors", [])
    if not isinstance(raw_errors, list):
        raise JudgeError("errors field is not a list")
    for rec in raw_errors:
        if not isinstance(rec, dict):
            raise JudgeError("error record is not an object")
        severity = str(rec.get("severity", "")).strip().lower()
        if severity not in SEVERITIES:
            raise JudgeError(f"unknown severity: {severity!r}")
        errors.append(
            MqmError(
                error_category=str(rec.get("error_category", "")).strip().lower(),
                error_type=str(rec.get("error_type", "")).strip(),
                severity=severity,
                explanation=str(rec.get("explanation", "")),
                error_span=rec.get("error_span"),
            )
        )
    return SegmentJudgment(
        quality_explanation=str(obj.get("quality_explanation", "")),
        quality_score=score,
        errors=tuple(errors),
        raw_response=raw,
    )


def judge_document(
    src_doc: str,
    hyp_doc: str,
    segments: list[str],
    judge_backend: Backend,
    pair: LanguagePair,
    doc_id: str = "",
    templates: dict[str, PromptTemplate] | None = None,
    concurrency: int | None = None,
) -> DocJudgment:
    """Judge every segment of one document translation.

    Each request carries the full source, the full translation, and the
    one target segment under evaluation.  Unparseable replies leave the
    segment unscored (tracked by coverage) rather than failing the doc.
    """
    if not segments:
        raise JudgeError("no segments to judge")
    if merge_units(segments) != hyp_doc:
        raise JudgeError("segments do not partition the hypothesis document")
    templates = templates or load_templates()
    template = templates["judge_mqm"]

    def judge_one(segment: str) -> SegmentJudgment | None:
        system, user = render_prompt(
            template,
            {
                "src_lang": language_name(pair.src),
                "tgt_lang": language_name(pair.tgt),
                "src": src_doc,
                "output_seq": hyp_doc,
                "target_segment": segment,
            },
        )
        gen = judge_backend.generate(
            GenerationRequest(system_prompt=system, turns=(("user", user),))
        )
        try:
            return parse_judge_response(gen.text)
        except JudgeError as exc:
            logger.warning("doc %s: segment left unscored: %s", doc_id, exc)
            return None

    workers = concurrency or judge_backend.max_concurrency
    with ThreadPoolExecutor(max_workers=workers) as pool:
        judged = list(pool.map(judge_one, segments))

    all_errors = [e for seg in judged if seg is not None for e in seg.errors]
    tokenization = "char" if pair.tgt in ("zh", "ja") else "whitespace"
    doc_len = count_words(hyp_doc, pair.tgt)
    return DocJudgment(
        doc_id=doc_id,
        pair=pair.code,
        segments=tuple(judged),
        doc_len_tokens=doc_len,
        normalized_overall=normalized_score(all_errors, doc_len),
        dimension_scores=dimension_scores(all_errors, doc_len),
        tokenization=tokenization,
    )


@dataclass(frozen=True)
class AggregateScores:
    per_lp: dict[str, float]
    system: float
    per_lp_dimensions: dict[str, dict[str, float]]
    system_dimensions: dict[str, float]


def aggregate_scores(
    judgments_by_lp: dict[str, list[DocJudgment]],
) -> AggregateScores:
    """Two-level mean: over documents within each pair, then over pairs.

    Document counts never weight the system mean.  Empty groups are
    dropped with a warning.
    """
    per_lp: dict[str, float] = {}
    per_lp_dims: dict[str, dict[str, float]] = {}
    for lp, docs in judgments_by_lp.items():
        if not docs:
            logger.warning("language pair %s has no judged documents; skipped", lp)
            continue
        per_lp[lp] = sum(d.normalized_overall for d in docs) / len(docs)
        per_lp_dims[lp] = {
            dim: sum(d.dimension_scores[dim] for d in docs) / len(docs)
            for dim in DIMENSIONS
        }
    if not per_lp:
        raise JudgeError("no judged documents to aggregate")
    system = sum(per_lp.values()) / len(per_lp)
    system_dims = {
        dim: sum(dims[dim] for dims in per_lp_dims.values()) / len(per_lp_dims)
        for dim in DIMENSIONS
    }
    return AggregateScores(per_lp, system, per_lp_dims, system_dims)


_TARGET_SEGMENT_RE = re.compile(
    r"<target_segment>(.*?)</target_segment>", re.DOTALL
)


class MockJudgeBackend(Backend):
    """Deterministic judge stand-in: valid MQM JSON derived from a digest
    of the judged segment, so judging pipelines run end to end offline."""

    def __init__(self, seed: int = 0, backend_id: str = "mock-judge") -> None:
        self.seed = seed
        self.backend_id = backend_id

    def generate(self, req: GenerationRequest) -> Generation:
        # the prompt's instruction text contains empty <target_segment></>
        # pairs; the real segment is the nonempty occurrence
        matches = _TARGET_SEGMENT_RE.findall(req.turns[-1][1])
        segment = next(
            (m for m in matches if m.strip()), req.turns[-1][1]
        )
        h = int.from_bytes(
            hashlib.sha256(f"{self.seed}|{segment}".encode("utf-8")).digest()[:8],
            "big",
        )
        # roughly 40% of segments get one finding, skewed toward minor
        n_errors = 1 if h % 5 < 2 else 0
        categories = ("accuracy", "fluency", "style", "terminology", "other")
        severity_menu = ("minor", "minor", "minor", "major", "major", "critical")
        words = segment.split() or [segment[:10] or "span"]
        errors = []
        for i in range(n_errors):
            hi = h // (7 ** (i + 1))
            errors.append(
                {
                    "explanation": "synthetic deterministic finding",
                    "error_span": words[hi % len(words)],
                    "error_category": categories[hi % len(categories)],
                    "error_type": "synthetic",
                    "severity": severity_menu[hi % len(severity_menu)],
                }
            )
        body = {
            "quality_explanation": "deterministic mock judgment",
            "quality_score": max(0, 100 - 15 * n_errors),
            "errors": errors,
        }
        return Generation(
            text=json.dumps(body, ensure_ascii=False), backend_id=self.backend_id
        )
