"""Walk through corpus loading and multi-granularity unit planning.

Documents arrive pre-segmented; units at coarser granularities are
contiguous runs of segments grouped greedily by word count (paragraphs
aim for 250 +/- 50 words, document chunks for 2,048 +/- 500), and a span
never splits a segment.  Run from the repository root:

    python demos/01_corpus_chunking.py
"""

from pathlib import Path

from refinelab.corpus import (
    count_words,
    load_corpus,
    merge_units,
    plan_units,
    span_text,
)

CORPUS = Path(__file__).parent.parent / "tests" / "fixtures" / "fixture_corpus.jsonl"


def main() -> None:
    corpus = load_corpus(CORPUS)
    print(f"loaded {len(corpus.documents)} documents "
          f"({len(corpus.references)} with references)\n")

    for doc in corpus.documents:
        print(f"{doc.id}: pair={doc.pair.code}  segments={len(doc.segments)}  "
              f"words={doc.word_count}")
    print()

    # The 360-word document splits into two paragraph units; everything in
    # this small fixture fits a single 2,048-word chunk.
    beta = next(d for d in corpus.documents if d.id == "beta")
    for granularity in ("segment", "paragraph", "doc_chunk"):
        spans = plan_units(beta, granularity)
        sizes = [count_words(span_text(beta, s), beta.lang) for s in spans]
        print(f"beta @ {granularity:<9} -> {len(spans)} unit(s), words {sizes}")

    # Round trip: merging the per-span texts reproduces the document.
    spans = plan_units(beta, "paragraph")
    rebuilt = merge_units([span_text(beta, s) for s in spans])
    print("\nround-trip merge identity:", rebuilt == beta.full_text)

    # Chinese documents count characters instead of whitespace words.
    gamma = next(d for d in corpus.documents if d.id == "gamma")
    ref = corpus.reference_for("gamma")
    print(f"gamma source (en) words: {gamma.word_count}; "
          f"reference (zh) chars: {ref.word_count}")


if __name__ == "__main__":
    main()
