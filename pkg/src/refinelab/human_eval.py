"""Human evaluation sessions: blind pairwise preferences, MQM spans, DA.

Each pairwise item shows two candidates in seeded-random A/B order; the
initial/refined identity behind each letter is kept out of every payload
an annotator can see.  Judgments are idempotent upserts with an audit
log.  Summaries de-randomize via the hidden mapping, collapse the 5-point
scale to win/tie/win, exclude ties from win rates, and attach a
two-sided exact binomial p-value against 0.5.
"""

from __future__ import annotations

import json
import logging
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from scipy.stats import binomtest

from .corpus import DELIMITER, Document, count_words, plan_units, span_text, split_units
from .judge import MqmError, dimension_scores, normalized_score

logger = logging.getLogger(__name__)

DIMENSIONS = ("accuracy", "fluency", "style_term")
CHOICES = (
    "a_much_better",
    "a_slightly_better",
    "tie",
    "b_slightly_better",
    "b_much_better",
)
MQM_CATEGORIES = ("accuracy", "fluency", "style", "terminology", "other")
MQM_SEVERITIES = ("minor", "major", "critical")

CHUNK_WORDS_LO, CHUNK_WORDS_HI = 200, 300


class HumanEvalError(ValueError):
    pass


@dataclass(frozen=True)
class PairwiseItem:
    item_id: str
    lp: str
    source: str
    candidate_a: str
    candidate_b: str
    # Hidden: which system candidate "a" is ("initial" or "refined").
    a_is: str

    def blind_payload(self) -> dict:
        return {
            "item_id": self.item_id,
            "lp": self.lp,
            "source": self.source,
            "candidate_a": self.candidate_a,
            "candidate_b": self.candidate_b,
        }


@dataclass
class PairwiseSession:
    """Mutable annotation state guarded by a lock; persistable to JSON."""

    seed: int
    items: list[PairwiseItem]
    # (item_id, dimension, annotator) -> choice; latest submission wins.
    judgments: dict[tuple[str, str, str], str] = field(default_factory=dict)
    audit_log: list[dict] = field(default_factory=list)
    mqm_annotations: list[dict] = field(default_factory=list)
    da_scores: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def item(self, item_id: str) -> PairwiseItem:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise HumanEvalError(f"unknown item: {item_id}")

    def judged_dimensions(self, item_id: str, annotator: str) -> dict[str, str]:
        return {
            dim: choice
            for (iid, dim, ann), choice in self.judgments.items()
            if iid == item_id and ann == annotator
        }

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "items": [
                {**item.blind_payload(), "a_is": item.a_is} for item in self.items
            ],
            "judgments": [
                {"item_id": iid, "dimension": dim, "annotator": ann, "choice": c}
                for (iid, dim, ann), c in sorted(self.judgments.items())
            ],
            "audit_log": self.audit_log,
            "mqm_annotations": self.mqm_annotations,
            "da_scores": self.da_scores,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, payload: dict) -> "PairwiseSession":
        items = [
            PairwiseItem(
                item_id=rec["item_id"],
                lp=rec["lp"],
                source=rec["source"],
                candidate_a=rec["candidate_a"],
                candidate_b=rec["candidate_b"],
                a_is=rec["a_is"],
            )
            for rec in payload["items"]
        ]
        session = cls(seed=payload["seed"], items=items)
        for rec in payload.get("judgments", []):
            session.judgments[
                (rec["item_id"], rec["dimension"], rec["annotator"])
            ] = rec["choice"]
        session.audit_log = list(payload.get("audit_log", []))
        session.mqm_annotations = list(payload.get("mqm_annotations", []))
        session.da_scores = list(payload.get("da_scores", []))
        return session

    @classmethod
    def load(cls, path: str | Path) -> "PairwiseSession":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def chunk_pairs_for_annotation(
    doc: Document,
    initial_text: str,
    refined_text: str,
    target_words: int = 250,
    tolerance_words: int = 50,
) -> list[tuple[str, str, str, str]]:
    """Split one document into annotation-sized pairs.

    The source is chunked with the standard 250 +/- 50 word plan (hitting
    the 200-300 word annotation window); each candidate translation is
    sliced along proportionally mapped segment boundaries, since the two
    candidates need not share the source's segmentation.
    """
    spans = plan_units(doc, "paragraph", target_words, tolerance_words)
    n_src = len(doc.segments)

    def slice_candidate(text: str, start: int, end: int) -> str:
        segments = split_units(text)
        n = len(segments)
        lo = min(n - 1, start * n // n_src)
        hi = min(n - 1, end * n // n_src)
        return DELIMITER.join(segments[lo : hi + 1])

    pairs = []
    for span in spans:
        pairs.append(
            (
                span_text(doc, span),
                slice_candidate(initial_text, span.start_seg, span.end_seg),
                slice_candidate(refined_text, span.start_seg, span.end_seg),
                doc.pair.code,
            )
        )
    return pairs


def build_pairwise_session(
    pairs: list[tuple[str, str, str, str]], seed: int
) -> PairwiseSession:
    """Build a session from (chunk, initial_text, refined_text, lp) tuples.

    A/B assignment and item order come from a generator seeded with
    ``seed``; the mapping is stored only server-side.  Chunks outside the
    200-300 word window are kept with a warning.
    """
    if not pairs:
        raise HumanEvalError("no pairs to annotate")
    rng = random.Random(seed)
    items = []
    for i, (chunk, initial_text, refined_text, lp) in enumerate(pairs):
        words = count_words(chunk, lp.split("-")[0])
        if not CHUNK_WORDS_LO <= words <= CHUNK_WORDS_HI:
            logger.warning(
                "chunk %d has %d words (outside %d-%d)",
                i, words, CHUNK_WORDS_LO, CHUNK_WORDS_HI,
            )
        a_is = "initial" if rng.random() < 0.5 else "refined"
        cand_a, cand_b = (
            (initial_text, refined_text)
            if a_is == "initial"
            else (refined_text, initial_text)
        )
        items.append(
            PairwiseItem(
                item_id=f"item-{i:04d}",
                lp=lp,
                source=chunk,
                candidate_a=cand_a,
                candidate_b=cand_b,
                a_is=a_is,
            )
        )
    rng.shuffle(items)
    return PairwiseSession(seed=seed, items=items)


def record_judgment(
    session: PairwiseSession,
    item_id: str,
    dimension: str,
    choice: str,
    annotator: str = "anon",
) -> None:
    """Idempotent upsert of one judgment; every submission is audited."""
    if dimension not in DIMENSIONS:
        raise HumanEvalError(f"unknown dimension: {dimension!r}")
    if choice not in CHOICES:
        raise HumanEvalError(f"unknown choice: {choice!r}")
    session.item(item_id)  # raises on unknown item
    with session.lock:
        session.judgments[(item_id, dimension, annotator)] = choice
        session.audit_log.append(
            {
                "kind": "pairwise",
                "item_id": item_id,
                "dimension": dimension,
                "annotator": annotator,
                "choice": choice,
            }
        )


def record_mqm_annotation(
    session: PairwiseSession,
    item_id: str,
    candidate: str,
    start: int,
    end: int,
    category: str,
    severity: str,
    annotator: str = "anon",
) -> None:
    item = session.item(item_id)
    if candidate not in ("a", "b"):
        raise HumanEvalError(f"candidate must be 'a' or 'b', got {candidate!r}")
    text = item.candidate_a if candidate == "a" else item.candidate_b
    if not (0 <= start < end <= len(text)):
        raise HumanEvalError(f"span {start}..{end} out of bounds for candidate")
    if category.lower() not in MQM_CATEGORIES:
        raise HumanEvalError(f"unknown category: {category!r}")
    if severity.lower() not in MQM_SEVERITIES:
        raise HumanEvalError(f"unknown severity: {severity!r}")
    with session.lock:
        record = {
            "kind": "mqm",
            "item_id": item_id,
            "candidate": candidate,
            "start": start,
            "end": end,
            "category": category.lower(),
            "severity": severity.lower(),
            "annotator": annotator,
        }
        session.mqm_annotations.append(record)
        session.audit_log.append(record)


def record_da_score(
    session: PairwiseSession,
    item_id: str,
    candidate: str,
    value: int,
    annotator: str = "anon",
) -> None:
    session.item(item_id)
    if candidate not in ("a", "b"):
        raise HumanEvalError(f"candidate must be 'a' or 'b', got {candidate!r}")
    if not 0 <= value <= 100:
        raise HumanEvalError(f"DA score must be 0..100, got {value}")
    with session.lock:
        record = {
            "kind": "da",
            "item_id": item_id,
            "candidate": candidate,
            "value": value,
            "annotator": annotator,
        }
        session.da_scores.append(record)
        session.audit_log.append(record)


@dataclass(frozen=True)
class PairwiseSummary:
    dimension: str
    n_judged: int
    pct_initial: float
    pct_tie: float
    pct_refined: float
    win_rate_no_ties: float | None
    p_value: float | None
    per_lp_wins: dict[str, tuple[int, int]]  # lp -> (refined wins, non-ties)
    counts: tuple[int, int, int]  # initial, tie, refined


def _outcome(choice: str, a_is: str) -> str:
    """De-randomize one 5-point choice to initial/tie/refined."""
    if choice == "tie":
        return "tie"
    if choice.startswith("a_"):
        return a_is
    return "refined" if a_is == "initial" else "initial"


def _majority(outcomes: list[str]) -> str:
    """Per-item multi-annotator resolution; ties break toward 'tie'."""
    counts = {"initial": 0, "tie": 0, "refined": 0}
    for o in outcomes:
        counts[o] += 1
    best = max(counts.values())
    leaders = [k for k, v in counts.items() if v == best]
    return leaders[0] if len(leaders) == 1 else "tie"


def summarize_pairwise(session: PairwiseSession) -> dict[str, PairwiseSummary]:
    """Per-dimension preferences, tie-excluded win rate and exact binomial p."""
    summaries = {}
    for dim in DIMENSIONS:
        outcomes: list[tuple[str, str]] = []  # (lp, outcome)
        for item in session.items:
            per_annotator = [
                _outcome(choice, item.a_is)
                for (iid, d, _ann), choice in session.judgments.items()
                if iid == item.item_id and d == dim
            ]
            if per_annotator:
                outcomes.append((item.lp, _majority(per_annotator)))
        if not outcomes:
            continue
        n = len(outcomes)
        n_initial = sum(1 for _, o in outcomes if o == "initial")
        n_tie = sum(1 for _, o in outcomes if o == "tie")
        n_refined = n - n_initial - n_tie
        non_ties = n_initial + n_refined
        per_lp: dict[str, tuple[int, int]] = {}
        for lp, o in outcomes:
            wins, total = per_lp.get(lp, (0, 0))
            if o != "tie":
                per_lp[lp] = (wins + (o == "refined"), total + 1)
        if non_ties:
            win_rate = 100.0 * n_refined / non_ties
            p_value = binomtest(n_refined, non_ties, 0.5).pvalue
        else:
            win_rate = None
            p_value = None
        summaries[dim] = PairwiseSummary(
            dimension=dim,
            n_judged=n,
            pct_initial=100.0 * n_initial / n,
            pct_tie=100.0 * n_tie / n,
            pct_refined=100.0 * n_refined / n,
            win_rate_no_ties=win_rate,
            p_value=p_value,
            per_lp_wins=per_lp,
            counts=(n_initial, n_tie, n_refined),
        )
    return summaries


@dataclass(frozen=True)
class SystemDeltas:
    model: str
    strategy: str
    mqm: float
    da: float | None
    dimensions: dict[str, float]


def summarize_mqm_da(
    annotations: list[dict],
    da_scores: list[dict],
    candidates: dict[str, dict],
) -> list[SystemDeltas]:
    """Aggregate human MQM and DA into per-system deltas vs Initial.

    ``candidates`` maps candidate id -> {text, model, strategy, lp}; the
    annotations and DA records carry candidate ids.  MQM scores reuse the
    judge normalization over the human error lists (style and terminology
    merge into one dimension); all values report system minus the model's
    Initial system.  Models without an Initial baseline are skipped.
    """
    by_system: dict[tuple[str, str], list[str]] = {}
    for cand_id, info in candidates.items():
        by_system.setdefault((info["model"], info["strategy"]), []).append(cand_id)

    anns_by_candidate: dict[str, list[MqmError]] = {}
    for rec in annotations:
        cand_id = rec["candidate_id"]
        text = candidates[cand_id]["text"]
        span = text[rec["start"] : rec["end"]]
        anns_by_candidate.setdefault(cand_id, []).append(
            MqmError(
                error_category=rec["category"].lower(),
                error_type=rec.get("type", ""),
                severity=rec["severity"].lower(),
                error_span=span,
            )
        )
    da_by_candidate: dict[str, list[int]] = {}
    for rec in da_scores:
        da_by_candidate.setdefault(rec["candidate_id"], []).append(rec["value"])

    def system_scores(cand_ids: list[str]) -> tuple[float, float | None, dict]:
        overalls, dims_acc, das = [], [], []
        for cand_id in cand_ids:
            info = candidates[cand_id]
            tgt = info["lp"].split("-")[1]
            tokens = count_words(info["text"], tgt)
            errors = anns_by_candidate.get(cand_id, [])
            overalls.append(normalized_score(errors, tokens))
            dims_acc.append(dimension_scores(errors, tokens))
            das.extend(da_by_candidate.get(cand_id, []))
        overall = sum(overalls) / len(overalls)
        dims = {
            dim: sum(d[dim] for d in dims_acc) / len(dims_acc)
            for dim in ("accuracy", "fluency", "style_term")
        }
        da = sum(das) / len(das) if das else None
        return overall, da, dims

    baselines = {}
    for (model, strategy), cand_ids in by_system.items():
        if strategy.lower() == "initial":
            baselines[model] = system_scores(cand_ids)

    rows = []
    for (model, strategy), cand_ids in sorted(by_system.items()):
        if strategy.lower() == "initial":
            continue
        if model not in baselines:
            logger.warning("model %s has no Initial baseline; skipped", model)
            continue
        base_overall, base_da, base_dims = baselines[model]
        overall, da, dims = system_scores(cand_ids)
        rows.append(
            SystemDeltas(
                model=model,
                strategy=strategy,
                mqm=overall - base_overall,
                da=(da - base_da) if da is not None and base_da is not None else None,
                dimensions={
                    dim: dims[dim] - base_dims[dim] for dim in dims
                },
            )
        )
    return rows
