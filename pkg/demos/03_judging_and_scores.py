"""Severity-weighted, length-normalized quality scoring.

Every segment is judged with the full document in context; parsed errors
carry a category and a minor/major/critical severity weighted 1/3/5.  A
document's score normalizes the weighted error mass to a 1,000-token
basis:

    score = max(0, 100 - (sum of weights / doc tokens) * 1000)

Dimension scores bucket errors by keyword (style and terminology share a
bucket); the overall score is NOT the mean of the dimensions.  Scores
average over documents within a language pair, then over pairs.

    python demos/03_judging_and_scores.py
"""

from refinelab.corpus import LanguagePair
from refinelab.gateway import ScriptedBackend
from refinelab.judge import (
    MqmError,
    aggregate_scores,
    dimension_scores,
    judge_document,
    normalized_score,
)


def main() -> None:
    minor = MqmError("accuracy", "omission", "minor")
    major = MqmError("fluency", "grammar", "major")
    critical = MqmError("accuracy", "mistranslation", "critical")

    print("score formula on a 200-token document:")
    for errors, label in [
        ([], "no errors"),
        ([minor], "one minor"),
        ([major], "one major"),
        ([critical], "one critical"),
        ([minor, major, critical], "one of each"),
        ([critical] * 10, "ten critical (clamped)"),
    ]:
        print(f"  {label:<24} -> {normalized_score(errors, 200):6.1f}")

    print("\ndimension bucketing (not mutually exclusive, Other catches rest):")
    errors = [
        MqmError("accuracy/omission", "t", "major"),
        MqmError("style", "t", "minor"),
        MqmError("terminology", "t", "minor"),
        MqmError("locale", "t", "minor"),
    ]
    for dim, value in dimension_scores(errors, 200).items():
        print(f"  {dim:<12} {value:6.1f}")

    # Judging end to end with a canned judge: one request per segment,
    # full source + full translation + the target segment in each prompt.
    segments = [" ".join(f"w{i}" for i in range(50)) for _ in range(2)]
    replies = iter([
        '{"quality_explanation": "-", "quality_score": 70,'
        ' "errors": [{"explanation": "-", "error_span": "w3",'
        ' "error_category": "accuracy", "error_type": "mistranslation",'
        ' "severity": "major"}]}',
        '{"quality_explanation": "-", "quality_score": 95, "errors": []}',
    ])
    judgment = judge_document(
        "source doc", "\n\n".join(segments), segments,
        ScriptedBackend(lambda req: next(replies)),
        pair=LanguagePair("en", "de"), doc_id="demo", concurrency=1,
    )
    print(f"\njudged demo doc: tokens={judgment.doc_len_tokens} "
          f"overall={judgment.normalized_overall:.1f} "
          f"coverage={judgment.coverage:.0%}")

    # Two-level aggregation: unweighted over docs, then over pairs.
    class Scored:
        def __init__(self, pair, score):
            self.pair = pair
            self.normalized_overall = score
            self.dimension_scores = dict.fromkeys(
                ("accuracy", "fluency", "style_term", "other"), score
            )

    aggregate = aggregate_scores({
        "en-de": [Scored("en-de", 75.0), Scored("en-de", 85.0)],
        "en-zh": [Scored("en-zh", 90.0)],
    })
    print(f"per-pair means: {aggregate.per_lp} -> system {aggregate.system}")


if __name__ == "__main__":
    main()
