"""Behavior probes for refinement runs.

Edit measurement is LCS-based: initial-translation tokens absent from a
longest common subsequence with the refined text count as modified.
Confidence probes aggregate token log-probabilities and entropies to the
word level and test whether they predict edit locations (ROC AUC, Cohen's
d).  Likelihood deltas compare length-normalized scores of initial vs
refined text under the same scorer, conditioned on the source and
unconditioned.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace

from scipy.stats import rankdata

from .corpus import is_char_counted
from .gateway import Backend, ScoreRequest, TokenInfo, token_entropy
from .judge import MqmError

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"\S+")


class DiagnosticsError(ValueError):
    pass


def diff_tokenization_for(lang: str) -> str:
    return "char" if is_char_counted(lang) else "whitespace"


def tokenize_with_offsets(
    text: str, tokenization: str = "whitespace"
) -> list[tuple[str, int, int]]:
    """(surface, start, end) triples; char mode emits one non-space char each."""
    if tokenization == "char":
        return [
            (ch, i, i + 1) for i, ch in enumerate(text) if not ch.isspace()
        ]
    if tokenization != "whitespace":
        raise DiagnosticsError(f"unknown tokenization: {tokenization!r}")
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def _lcs_keep_mask(a: list[str], b: list[str]) -> list[bool]:
    """True for each token of ``a`` kept by one LCS alignment with ``b``.

    The kept COUNT equals the LCS length for any maximum alignment; the
    traceback prefers the left predecessor on ties, which fixes the
    particular alignment deterministically.
    """
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        row = table[i]
        prev = table[i - 1]
        ai = a[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = row[j - 1]
                row[j] = left if left >= up else up
    mask = [False] * m
    i, j = m, n
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            mask[i - 1] = True
            i -= 1
            j -= 1
        elif table[i][j - 1] >= table[i - 1][j]:
            j -= 1
        else:
            i -= 1
    return mask


@dataclass(frozen=True)
class WordRecord:
    surface: str
    start: int
    end: int
    label: str  # "modified" | "kept"
    logprob_agg: float | None = None
    entropy_agg: float | None = None


def label_words(
    initial: str, refined: str, tokenization: str = "whitespace"
) -> list[WordRecord]:
    """Label every initial-side word kept/modified by the LCS diff."""
    toks = tokenize_with_offsets(initial, tokenization)
    if not toks:
        raise DiagnosticsError("initial text has no tokens")
    refined_tokens = [t for t, _, _ in tokenize_with_offsets(refined, tokenization)]
    mask = _lcs_keep_mask([t for t, _, _ in toks], refined_tokens)
    return [
        WordRecord(surface=t, start=s, end=e, label="kept" if kept else "modified")
        for (t, s, e), kept in zip(toks, mask)
    ]


def edit_ratio(
    initial: str, refined: str, tokenization: str = "whitespace"
) -> float:
    """Fraction of initial tokens not preserved by the LCS alignment."""
    records = label_words(initial, refined, tokenization)
    modified = sum(1 for r in records if r.label == "modified")
    return modified / len(records)


def attach_confidence(
    records: list[WordRecord],
    tokens: list[TokenInfo] | tuple[TokenInfo, ...],
    entropy_rule: str = "max",
    min_coverage: float = 0.8,
) -> list[WordRecord]:
    """Aggregate sub-token signals onto word records by span overlap.

    logprob is min over sub-tokens (least-confident reading); entropy
    defaults to max for the same reason but the rule is configurable
    ("max", "min", "mean").  Words without any overlapping token are
    dropped with a warning; too many drops is an alignment error.
    """
    if entropy_rule not in ("max", "min", "mean"):
        raise DiagnosticsError(f"unknown entropy rule: {entropy_rule!r}")
    offsets: list[tuple[int, int, TokenInfo]] = []
    cursor = 0
    for tok in tokens:
        offsets.append((cursor, cursor + len(tok.surface), tok))
        cursor += len(tok.surface)

    out: list[WordRecord] = []
    dropped = 0
    for rec in records:
        subs = [
            tok for ts, te, tok in offsets if ts < rec.end and te > rec.start
        ]
        if not subs:
            dropped += 1
            logger.warning("no token overlaps word %r at %d..%d", rec.surface,
                           rec.start, rec.end)
            continue
        logprob = min(t.logprob for t in subs)
        entropies = [token_entropy(t) for t in subs]
        if entropy_rule == "max":
            entropy = max(entropies)
        elif entropy_rule == "min":
            entropy = min(entropies)
        else:
            entropy = sum(entropies) / len(entropies)
        out.append(replace(rec, logprob_agg=logprob, entropy_agg=entropy))

    if records:
        coverage = len(out) / len(records)
        if coverage < min_coverage:
            raise DiagnosticsError(
                f"token/word alignment failed: only {len(out)}/{len(records)} "
                f"words covered (coverage {coverage:.2f} < {min_coverage})"
            )
    return out


def roc_auc(scores: list[float], labels: list[bool]) -> float:
    """Probability a random positive outscores a random negative, ties at 1/2.

    Computed exactly from average ranks (Mann-Whitney U), equivalent to
    the brute-force pairwise count.
    """
    if len(scores) != len(labels):
        raise DiagnosticsError("scores and labels differ in length")
    n_pos = sum(1 for l in labels if l)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DiagnosticsError("AUC undefined: need both classes")
    ranks = rankdata(scores)
    rank_sum = sum(r for r, l in zip(ranks, labels) if l)
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def cohens_d(group_a: list[float], group_b: list[float]) -> float:
    """(mean_a - mean_b) / pooled standard deviation (n-1 denominators)."""
    na, nb = len(group_a), len(group_b)
    if na < 2 or nb < 2:
        raise DiagnosticsError("both groups need at least 2 observations")
    mean_a = sum(group_a) / na
    mean_b = sum(group_b) / nb
    var_a = sum((x - mean_a) ** 2 for x in group_a) / (na - 1)
    var_b = sum((x - mean_b) ** 2 for x in group_b) / (nb - 1)
    pooled = ((na - 1) * var_a + (nb - 1) * var_b) / (na + nb - 2)
    if pooled == 0:
        raise DiagnosticsError("zero pooled variance")
    return (mean_a - mean_b) / pooled**0.5


@dataclass(frozen=True)
class LikelihoodDelta:
    delta_cond: float  # source-conditioned, refined minus initial
    delta_uncond: float  # unconditional target-text score delta
    tokens_initial: int
    tokens_refined: int
    step: int | None = None


def _length_normalized_score(backend: Backend, context: str, text: str) -> tuple[float, int]:
    infos = backend.score(ScoreRequest(context=context, continuation=text))
    if not infos:
        raise DiagnosticsError("scorer returned no tokens")
    return sum(t.logprob for t in infos) / len(infos), len(infos)


def likelihood_deltas(
    src_doc: str,
    y0: str,
    yr: str,
    scorer: Backend,
    step: int | None = None,
) -> LikelihoodDelta:
    """Length-normalized log-likelihood deltas of refined vs initial text."""
    if not y0 or not yr:
        raise DiagnosticsError("initial and refined texts must be nonempty")
    cond_0, n0 = _length_normalized_score(scorer, src_doc, y0)
    cond_r, nr = _length_normalized_score(scorer, src_doc, yr)
    uncond_0, _ = _length_normalized_score(scorer, "", y0)
    uncond_r, _ = _length_normalized_score(scorer, "", yr)
    return LikelihoodDelta(
        delta_cond=cond_r - cond_0,
        delta_uncond=uncond_r - uncond_0,
        tokens_initial=n0,
        tokens_refined=nr,
        step=step,
    )


OVERLAP_MODES = ("category", "category_severity", "category_severity_span")


@dataclass(frozen=True)
class OverlapReport:
    mode: str
    matched: int
    predicted: int
    reference: int
    precision: float
    recall: float
    f1: float


def _span_chars(span: str | None, translation: str) -> set[int] | None:
    if not span:
        return None
    idx = translation.find(span)
    if idx < 0:
        return None
    return set(range(idx, idx + len(span)))


def _char_jaccard(a: set[int], b: set[int]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _max_matching(eligible: list[list[int]], n_right: int) -> int:
    """Maximum bipartite matching size via augmenting paths."""
    match_right = [-1] * n_right

    def try_assign(left: int, seen: list[bool]) -> bool:
        for right in eligible[left]:
            if not seen[right]:
                seen[right] = True
                if match_right[right] == -1 or try_assign(match_right[right], seen):
                    match_right[right] = left
                    return True
        return False

    matched = 0
    for left in range(len(eligible)):
        if try_assign(left, [False] * n_right):
            matched += 1
    return matched


def error_overlap(
    predicted: list[MqmError],
    reference: list[MqmError],
    mode: str = "category",
    translation: str | None = None,
    span_threshold: float = 0.3,
) -> OverlapReport:
    """P/R/F1 of a maximum one-to-one matching between two error lists.

    Eligibility tightens with the mode: category equality, plus severity
    equality, plus character-level Jaccard overlap >= threshold between
    the span texts located (first occurrence) in the translation.  Errors
    lacking a locatable span cannot match in span mode.
    """
    if mode not in OVERLAP_MODES:
        raise DiagnosticsError(f"unknown overlap mode: {mode!r}")
    if mode == "category_severity_span" and translation is None:
        raise DiagnosticsError("span mode needs the translation text")

    if mode == "category_severity_span":
        pred_chars = [_span_chars(e.error_span, translation) for e in predicted]
        ref_chars = [_span_chars(e.error_span, translation) for e in reference]

    def eligible(pi: int, ri: int) -> bool:
        p, r = predicted[pi], reference[ri]
        if p.error_category.strip().lower() != r.error_category.strip().lower():
            return False
        if mode == "category":
            return True
        if p.severity != r.severity:
            return False
        if mode == "category_severity":
            return True
        pc, rc = pred_chars[pi], ref_chars[ri]
        if pc is None or rc is None:
            return False
        return _char_jaccard(pc, rc) >= span_threshold

    adjacency = [
        [ri for ri in range(len(reference)) if eligible(pi, ri)]
        for pi in range(len(predicted))
    ]
    matched = _max_matching(adjacency, len(reference))
    precision = matched / len(predicted) if predicted else 0.0
    recall = matched / len(reference) if reference else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return OverlapReport(
        mode=mode,
        matched=matched,
        predicted=len(predicted),
        reference=len(reference),
        precision=precision,
        recall=recall,
        f1=f1,
    )
