"""Corpus loading and multi-granularity unit planning for document translation.

Documents are ordered lists of pre-segmented units (typically sentences).
The double-newline delimiter joins segments into full document text, and
units at coarser granularities are contiguous runs of segments grouped by
a greedy word-count rule.  Spans never split a segment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

DELIMITER = "\n\n"

GRANULARITIES = ("segment", "paragraph", "doc_chunk")

# (target_words, tolerance_words) defaults for the coarse granularities.
DEFAULT_TARGETS: dict[str, tuple[int, int]] = {
    "paragraph": (250, 50),
    "doc_chunk": (2048, 500),
}

SUPPORTED_PAIRS = frozenset(
    {"en-cs", "en-de", "en-es", "en-ja", "en-ru", "en-zh", "ja-zh"}
)

# Languages whose "word count" is a character count (no whitespace words).
CHAR_COUNTED_LANGS = frozenset({"zh", "ja"})


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid corpus structures."""


def is_char_counted(lang: str) -> bool:
    """True if word counts for this language are non-whitespace char counts."""
    return lang.split("-")[0].split("_")[0].lower() in CHAR_COUNTED_LANGS


def count_words(text: str, lang: str) -> int:
    """Word count: whitespace tokens, or non-whitespace chars for zh/ja."""
    if is_char_counted(lang):
        return sum(1 for ch in text if not ch.isspace())
    return len(text.split())


@dataclass(frozen=True)
class LanguagePair:
    src: str
    tgt: str

    def __post_init__(self) -> None:
        if not self.src or not self.tgt:
            raise CorpusError("language codes must be nonempty")
        if self.src == self.tgt:
            raise CorpusError(f"source and target language are equal: {self.src}")

    @property
    def code(self) -> str:
        return f"{self.src}-{self.tgt}"

    @classmethod
    def from_code(
        cls, code: str, allowed: frozenset[str] | None = SUPPORTED_PAIRS
    ) -> "LanguagePair":
        """Parse "src-tgt"; enforce the allow-list unless allowed=None."""
        parts = code.split("-")
        if len(parts) != 2:
            raise CorpusError(f"malformed language pair code: {code!r}")
        if allowed is not None and code not in allowed:
            raise CorpusError(
                f"unsupported language pair {code!r}; "
                f"pass allowed=None to lift the allow-list"
            )
        return cls(parts[0], parts[1])


@dataclass(frozen=True)
class Segment:
    doc_id: str
    index: int
    text: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise CorpusError(f"segment index must be >= 0, got {self.index}")
        if not self.text.strip():
            raise CorpusError(f"empty segment (doc {self.doc_id}, index {self.index})")
        if DELIMITER in self.text:
            raise CorpusError(
                f"segment contains the double-newline delimiter "
                f"(doc {self.doc_id}, index {self.index})"
            )


@dataclass(frozen=True)
class Document:
    """One document with its translation direction.

    ``lang`` is the language the segment texts are written in; source-side
    documents default it to ``pair.src``.  Reference documents carry the
    same ids but ``lang = pair.tgt``.
    """

    id: str
    segments: tuple[Segment, ...]
    pair: LanguagePair
    lang: str = ""

    def __post_init__(self) -> None:
        if not self.lang:
            object.__setattr__(self, "lang", self.pair.src)
        for i, seg in enumerate(self.segments):
            if seg.index != i:
                raise CorpusError(
                    f"segment indices not contiguous in doc {self.id}: "
                    f"expected {i}, got {seg.index}"
                )
            if seg.doc_id != self.id:
                raise CorpusError(
                    f"segment doc_id {seg.doc_id!r} != document id {self.id!r}"
                )

    @property
    def full_text(self) -> str:
        return DELIMITER.join(s.text for s in self.segments)

    @property
    def word_count(self) -> int:
        return sum(count_words(s.text, self.lang) for s in self.segments)


@dataclass(frozen=True)
class UnitSpan:
    """Inclusive run [start_seg, end_seg] of segment indices at a granularity."""

    granularity: str
    start_seg: int
    end_seg: int

    def __post_init__(self) -> None:
        if self.granularity not in GRANULARITIES:
            raise CorpusError(f"unknown granularity: {self.granularity!r}")
        if not (0 <= self.start_seg <= self.end_seg):
            raise CorpusError(
                f"bad span bounds: start={self.start_seg}, end={self.end_seg}"
            )


@dataclass(frozen=True)
class Corpus:
    """Documents plus optional aligned references.

    ``pair`` is the corpus-wide language pair when all documents share one,
    else None (mixed corpus; each document carries its own pair).
    """

    documents: tuple[Document, ...]
    references: tuple[Document, ...] = ()
    pair: LanguagePair | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.documents:
            raise CorpusError("no documents")
        pairs = {d.pair.code for d in self.documents}
        inferred = self.documents[0].pair if len(pairs) == 1 else None
        if self.pair is None:
            object.__setattr__(self, "pair", inferred)
        elif inferred is None or inferred.code != self.pair.code:
            raise CorpusError("corpus pair does not match its documents")
        if self.references:
            by_id = {d.id: d for d in self.documents}
            for ref in self.references:
                src = by_id.get(ref.id)
                if src is None:
                    raise CorpusError(f"reference doc {ref.id!r} has no source doc")
                if len(ref.segments) != len(src.segments):
                    raise CorpusError(
                        f"reference doc {ref.id!r} segment count "
                        f"{len(ref.segments)} != source {len(src.segments)}"
                    )

    def reference_for(self, doc_id: str) -> Document | None:
        for ref in self.references:
            if ref.id == doc_id:
                return ref
        return None


def _build_document(
    doc_id: str, texts: list[str], pair: LanguagePair, lang: str = ""
) -> Document:
    segments = tuple(Segment(doc_id, i, t) for i, t in enumerate(texts))
    return Document(doc_id, segments, pair, lang)


def _load_jsonl_segments(
    path: Path, pair: LanguagePair | None, allowed: frozenset[str] | None
) -> Corpus:
    docs: dict[str, list[str]] = {}
    refs: dict[str, list[str | None]] = {}
    doc_pairs: dict[str, LanguagePair] = {}

    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                doc_id = str(rec["doc_id"])
                seg_index = int(rec["seg_index"])
                src_text = rec["src_text"]
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from exc
            if not isinstance(src_text, str) or not src_text.strip():
                raise CorpusError(f"{path}:{lineno}: empty src_text")
            if DELIMITER in src_text:
                raise CorpusError(
                    f"{path}:{lineno}: src_text contains the double-newline delimiter"
                )

            if doc_id not in doc_pairs:
                if "src_lang" in rec and "tgt_lang" in rec:
                    rec_pair = LanguagePair.from_code(
                        f"{rec['src_lang']}-{rec['tgt_lang']}", allowed
                    )
                elif pair is not None:
                    rec_pair = pair
                else:
                    raise CorpusError(
                        f"{path}:{lineno}: record has no src_lang/tgt_lang and "
                        f"no pair was supplied"
                    )
                doc_pairs[doc_id] = rec_pair
                docs[doc_id] = []
                refs[doc_id] = []

            if seg_index != len(docs[doc_id]):
                raise CorpusError(
                    f"{path}:{lineno}: seg_index {seg_index} out of order for "
                    f"doc {doc_id} (expected {len(docs[doc_id])})"
                )
            ref_text = rec.get("ref_text")
            if ref_text is not None and DELIMITER in ref_text:
                raise CorpusError(
                    f"{path}:{lineno}: ref_text contains the double-newline delimiter"
                )
            docs[doc_id].append(src_text)
            refs[doc_id].append(ref_text)

    if not docs:
        raise CorpusError(f"{path}: no documents")

    documents = []
    references = []
    for doc_id, texts in docs.items():
        doc_pair = doc_pairs[doc_id]
        if pair is not None and doc_pair.code != pair.code:
            continue
        documents.append(_build_document(doc_id, texts, doc_pair))
        ref_texts = refs[doc_id]
        if any(t is not None for t in ref_texts):
            if any(t is None for t in ref_texts):
                raise CorpusError(
                    f"{path}: doc {doc_id} has a partial reference "
                    f"(every segment needs ref_text, or none)"
                )
            references.append(
                _build_document(doc_id, ref_texts, doc_pair, lang=doc_pair.tgt)
            )
    if not documents:
        raise CorpusError(f"{path}: no documents for pair {pair.code}")
    return Corpus(tuple(documents), tuple(references))


def _load_plain_paired(path: Path, pair: LanguagePair | None) -> Corpus:
    if pair is None:
        raise CorpusError("plain_paired format requires an explicit language pair")
    src_path = path if path.suffix == ".src" else Path(str(path) + ".src")
    if not src_path.exists():
        raise CorpusError(f"missing source file: {src_path}")
    ref_path = src_path.with_suffix(".ref")

    def read_docs(p: Path) -> list[list[str]]:
        blocks: list[list[str]] = []
        current: list[str] = []
        for line in p.read_text(encoding="utf-8").splitlines():
            if line.strip():
                current.append(line.strip())
            elif current:
                blocks.append(current)
                current = []
        if current:
            blocks.append(current)
        return blocks

    src_blocks = read_docs(src_path)
    if not src_blocks:
        raise CorpusError(f"{src_path}: no documents")
    documents = tuple(
        _build_document(f"doc{i:04d}", texts, pair)
        for i, texts in enumerate(src_blocks)
    )
    references: tuple[Document, ...] = ()
    if ref_path.exists():
        ref_blocks = read_docs(ref_path)
        if len(ref_blocks) != len(src_blocks):
            raise CorpusError(
                f"{ref_path}: {len(ref_blocks)} documents but source has "
                f"{len(src_blocks)}"
            )
        references = tuple(
            _build_document(f"doc{i:04d}", texts, pair, lang=pair.tgt)
            for i, texts in enumerate(ref_blocks)
        )
    return Corpus(documents, references)


def load_corpus(
    path: str | Path,
    format_id: str = "jsonl_segments",
    pair: LanguagePair | None = None,
    allowed_pairs: frozenset[str] | None = SUPPORTED_PAIRS,
) -> Corpus:
    """Load a corpus file.

    jsonl_segments: one JSON record per segment with fields doc_id,
    seg_index, src_text, optional ref_text and src_lang/tgt_lang.
    plain_paired: ``<base>.src`` (+ optional ``<base>.ref``) with one
    segment per line and blank lines between documents.
    """
    path = Path(path)
    if format_id == "plain_paired":
        return _load_plain_paired(path, pair)
    if format_id != "jsonl_segments":
        raise CorpusError(f"unknown corpus format: {format_id!r}")
    if not path.exists():
        raise CorpusError(f"missing file: {path}")
    return _load_jsonl_segments(path, pair, allowed_pairs)


def plan_units(
    doc: Document,
    granularity: str,
    target_words: int | None = None,
    tolerance_words: int | None = None,
    lang: str | None = None,
) -> list[UnitSpan]:
    """Partition a document's segments into contiguous unit spans.

    Greedy rule: extend the current span while adding the next segment
    keeps its word count <= target + tolerance; close it otherwise.
    A single segment above the cap becomes its own span with a warning.
    For granularity="segment" the targets are ignored and every segment
    is its own span.
    """
    if granularity not in GRANULARITIES:
        raise CorpusError(f"unknown granularity: {granularity!r}")
    if granularity == "segment":
        return [UnitSpan("segment", i, i) for i in range(len(doc.segments))]

    if target_words is None or tolerance_words is None:
        default_t, default_tol = DEFAULT_TARGETS[granularity]
        target_words = default_t if target_words is None else target_words
        tolerance_words = default_tol if tolerance_words is None else tolerance_words
    if tolerance_words < 0 or target_words <= tolerance_words:
        raise CorpusError(
            f"need target_words > tolerance_words >= 0, "
            f"got {target_words} +/- {tolerance_words}"
        )
    lang = lang or doc.lang
    cap = target_words + tolerance_words

    spans: list[UnitSpan] = []
    start: int | None = None
    acc = 0
    for i, seg in enumerate(doc.segments):
        w = count_words(seg.text, lang)
        if start is None:
            start, acc = i, w
        elif acc + w <= cap:
            acc += w
        else:
            spans.append(UnitSpan(granularity, start, i - 1))
            start, acc = i, w
        if acc > cap and start == i:
            logger.warning(
                "segment %s[%d] alone exceeds %d words (%d); kept as its own span",
                doc.id,
                i,
                cap,
                w,
            )
    if start is not None:
        spans.append(UnitSpan(granularity, start, len(doc.segments) - 1))
    return spans


def span_text(doc: Document, span: UnitSpan) -> str:
    """Text of one span: its segments joined by the delimiter."""
    return DELIMITER.join(
        s.text for s in doc.segments[span.start_seg : span.end_seg + 1]
    )


def merge_units(unit_texts: list[str] | tuple[str, ...]) -> str:
    """Join unit texts with the double-newline delimiter."""
    if not unit_texts:
        raise CorpusError("nothing to merge")
    for i, text in enumerate(unit_texts):
        if not text:
            raise CorpusError(f"unit {i} is empty")
    return DELIMITER.join(unit_texts)


def split_units(text: str) -> list[str]:
    """Inverse of merge_units for well-formed text.

    Blank pieces (extra or whitespace-only delimiter blocks, which model
    output can contain) are dropped rather than producing empty units.
    """
    parts = [p for p in text.split(DELIMITER) if p.strip()]
    if not parts:
        raise CorpusError("no units in text")
    return parts


def plan_to_dict(doc: Document, spans: list[UnitSpan]) -> dict:
    """Sidecar-file form of a plan: (granularity, start, end) triples."""
    return {
        "doc_id": doc.id,
        "spans": [[s.granularity, s.start_seg, s.end_seg] for s in spans],
    }


def write_plan_file(path: str | Path, plans: list[dict]) -> None:
    Path(path).write_text(
        json.dumps({"plans": plans}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
