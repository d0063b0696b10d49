"""Reference-based sanity metrics: document-level BLEU and a length-ratio guard."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import is_char_counted


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 4
    smoothing: str = "add_k"  # or "none"
    tokenization: str = "whitespace"  # or "char"
    smoothing_k: float = 1.0

    def __post_init__(self) -> None:
        if self.max_n < 1:
            raise MetricError("max_n must be >= 1")
        if self.smoothing not in ("none", "add_k"):
            raise MetricError(f"unknown smoothing: {self.smoothing!r}")
        if self.tokenization not in ("whitespace", "char"):
            raise MetricError(f"unknown tokenization: {self.tokenization!r}")


def bleu_config_for(tgt_lang: str) -> BleuConfig:
    tok = "char" if is_char_counted(tgt_lang) else "whitespace"
    return BleuConfig(tokenization=tok)


def _tokens(text: str, tokenization: str) -> list[str]:
    if tokenization == "char":
        return [ch for ch in text if not ch.isspace()]
    return text.split()


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def d_bleu(hyp_doc: str, ref_doc: str, cfg: BleuConfig | None = None) -> float:
    """BLEU over one document treated as a single continuous sequence.

    Modified n-gram precisions up to max_n, geometric mean, brevity
    penalty.  add_k smoothing applies to orders >= 2 only; orders where
    the hypothesis has no n-grams at all are skipped.  Returns 0..100.
    """
    cfg = cfg or BleuConfig()
    ref_tokens = _tokens(ref_doc, cfg.tokenization)
    if not ref_tokens:
        raise MetricError("reference document is empty")
    hyp_tokens = _tokens(hyp_doc, cfg.tokenization)
    if not hyp_tokens:
        return 0.0

    log_sum = 0.0
    orders_used = 0
    for n in range(1, cfg.max_n + 1):
        hyp_counts = _ngrams(hyp_tokens, n)
        total = sum(hyp_counts.values())
        if total == 0:
            continue
        ref_counts = _ngrams(ref_tokens, n)
        clipped = sum(
            min(count, ref_counts[ngram]) for ngram, count in hyp_counts.items()
        )
        if cfg.smoothing == "add_k" and n >= 2:
            precision = (clipped + cfg.smoothing_k) / (total + cfg.smoothing_k)
        else:
            precision = clipped / total
        if precision == 0.0:
            return 0.0
        log_sum += math.log(precision)
        orders_used += 1

    if orders_used == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders_used)
    c, r = len(hyp_tokens), len(ref_tokens)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * geo_mean


def length_ratio_guard(
    src_doc: str, tgt_doc: str, tokenization: str = "whitespace"
) -> tuple[float, bool]:
    """Token-count ratio tgt/src; flagged when outside [0.8, 1.2].

    The bounds themselves pass (closed acceptance interval).
    """
    src_n = len(_tokens(src_doc, tokenization))
    if src_n == 0:
        raise MetricError("empty source document")
    tgt_n = len(_tokens(tgt_doc, tokenization))
    ratio = tgt_n / src_n
    flagged = ratio < 0.8 or ratio > 1.2
    return ratio, flagged
