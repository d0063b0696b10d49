"""Probe how a refiner edits: where, how much, and toward what.

Edit ratio counts initial-translation tokens not preserved by an LCS
alignment with the refined text.  Word-level confidence (min log-prob
over sub-tokens, max entropy) feeds ROC AUC: near 0.5 means edits are NOT
targeted at low-confidence words.  Likelihood deltas compare the length-
normalized score of refined vs initial text, source-conditioned and
unconditioned: a positive unconditioned delta with a flat or negative
conditioned delta reads as target-side polishing rather than fidelity
repair.  Error overlap scores a diagnosis stage against a judge.

    python demos/04_behavior_diagnostics.py
"""

import random

from refinelab.diagnostics import (
    attach_confidence,
    cohens_d,
    edit_ratio,
    error_overlap,
    label_words,
    likelihood_deltas,
    roc_auc,
)
from refinelab.gateway import MockBackend, ScoreRequest
from refinelab.judge import MqmError


def main() -> None:
    initial = "the harbour was quiet before the first boats went out"
    refined = "the harbour lay quiet before the first boats sailed out"
    print(f"edit ratio: {edit_ratio(initial, refined):.3f}")
    records = label_words(initial, refined)
    print("labels:", " ".join(
        f"{r.surface}({'M' if r.label == 'modified' else 'k'})" for r in records
    ))

    # Attach confidence from a (re)scoring pass and test predictiveness.
    scorer = MockBackend(seed=3, score_top_alternatives=3)
    tokens = scorer.score(ScoreRequest(context="", continuation=initial))
    scored = attach_confidence(records, tokens)
    labels = [r.label == "modified" for r in scored]
    neg_logprobs = [-r.logprob_agg for r in scored]
    entropies = [r.entropy_agg for r in scored]
    print(f"AUC(-logprob): {roc_auc(neg_logprobs, labels):.3f}   "
          f"AUC(entropy): {roc_auc(entropies, labels):.3f}   (0.5 = chance)")
    modified = [s for s, m in zip(neg_logprobs, labels) if m]
    kept = [s for s, m in zip(neg_logprobs, labels) if not m]
    if len(modified) >= 2 and len(kept) >= 2:
        print(f"Cohen's d (modified vs kept): {cohens_d(modified, kept):+.3f}")

    delta = likelihood_deltas("source document text", initial, refined, scorer)
    print(f"likelihood deltas: conditioned {delta.delta_cond:+.4f}, "
          f"unconditioned {delta.delta_uncond:+.4f}")

    # Diagnosis-vs-judge overlap under the three matching strictnesses.
    translation = refined
    predicted = [
        MqmError("accuracy", "mistranslation", "major", error_span="lay quiet"),
        MqmError("style", "awkward", "minor", error_span="sailed out"),
        MqmError("fluency", "grammar", "minor", error_span="the first"),
    ]
    judged = [
        MqmError("accuracy", "mistranslation", "major", error_span="lay quiet"),
        MqmError("style", "awkward", "major", error_span="sailed"),
    ]
    print("\noverlap (predicted diagnosis vs judged errors):")
    for mode in ("category", "category_severity", "category_severity_span"):
        report = error_overlap(predicted, judged, mode, translation)
        print(f"  {mode:<26} P={report.precision:.2f} R={report.recall:.2f} "
              f"F1={report.f1:.2f}")

    # AUC sanity: on random labels the statistic sits near one half.
    rng = random.Random(0)
    scores = [rng.random() for _ in range(2000)]
    labels = [rng.random() < 0.3 for _ in range(2000)]
    print(f"\nAUC on unrelated scores/labels: {roc_auc(scores, labels):.3f}")


if __name__ == "__main__":
    main()
