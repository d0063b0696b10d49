"""Report tables over persisted run directories.

Reports are pure functions of the run tree: the gain table shows the
judged initial score and per-step deltas with tier labels plus per-step
edit ratios; metrics rows add d-BLEU and the length-ratio guard when
references exist; diagnostics rows mirror the per-pair confidence table
(#Words, Mod.%, AUC by log-probability and entropy) and per-step
likelihood deltas.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

from .diagnostics import (
    attach_confidence,
    cohens_d,
    diff_tokenization_for,
    edit_ratio,
    label_words,
    likelihood_deltas,
    roc_auc,
)
from .experiment import load_corpus_snapshot
from .gateway import Backend, ScoreRequest
from .judge import DocJudgment, MqmError, SegmentJudgment, aggregate_scores
from .metrics import bleu_config_for, d_bleu, length_ratio_guard

logger = logging.getLogger(__name__)

# Gain tier thresholds: negative / small / medium / large.
DEFAULT_TIER_BOUNDS = (0.0, 2.0, 5.0)


class ReportError(ValueError):
    pass


def gain_tier(delta: float, bounds: tuple[float, float, float] = DEFAULT_TIER_BOUNDS) -> str:
    lo, mid, hi = bounds
    if delta < lo:
        return "negative"
    if delta < mid:
        return "small"
    if delta < hi:
        return "medium"
    return "large"


def _load_judgment(path: Path) -> DocJudgment:
    payload = json.loads(path.read_text(encoding="utf-8"))
    segments = tuple(
        None
        if seg is None
        else SegmentJudgment(
            quality_explanation=seg["quality_explanation"],
            quality_score=seg["quality_score"],
            errors=tuple(MqmError.from_dict(e) for e in seg["errors"]),
            raw_response="",
            parse_status=seg.get("parse_status", "ok"),
        )
        for seg in payload["segments"]
    )
    return DocJudgment(
        doc_id=payload["doc_id"],
        pair=payload["pair"],
        segments=segments,
        doc_len_tokens=payload["doc_len_tokens"],
        normalized_overall=payload["normalized_overall"],
        dimension_scores=payload["dimension_scores"],
        tokenization=payload.get("tokenization", "whitespace"),
    )


def _cell_dirs(run_root: Path) -> list[Path]:
    return sorted(
        p for p in run_root.iterdir() if p.is_dir() and (p / "cell.json").exists()
    )


def _judgments_by_step(cell_dir: Path) -> dict[int, list[DocJudgment]]:
    out: dict[int, list[DocJudgment]] = {}
    for path in sorted((cell_dir / "judgments").glob("*.json")):
        step = int(path.stem.rsplit(".s", 1)[1])
        out.setdefault(step, []).append(_load_judgment(path))
    return out


def _system_score(judgments: list[DocJudgment]) -> float:
    by_lp: dict[str, list[DocJudgment]] = {}
    for j in judgments:
        by_lp.setdefault(j.pair, []).append(j)
    return aggregate_scores(by_lp).system


def gain_table(
    run_root: str | Path,
    tier_bounds: tuple[float, float, float] = DEFAULT_TIER_BOUNDS,
) -> list[dict]:
    """One row per grid cell: initial score, per-step delta + tier + edit%.

    Steps lacking a judgment render as missing values, never zero.
    """
    run_root = Path(run_root)
    corpus = load_corpus_snapshot(run_root)
    docs = {d.id: d for d in corpus.documents}
    rows = []
    for cell_dir in _cell_dirs(run_root):
        meta = json.loads((cell_dir / "cell.json").read_text(encoding="utf-8"))
        judged = (
            _judgments_by_step(cell_dir)
            if (cell_dir / "judgments").is_dir()
            else {}
        )
        doc_dirs = sorted((cell_dir / "docs").iterdir())
        n_steps = max(
            len(list(d.glob("s*.merged.txt"))) for d in doc_dirs
        )
        row: dict = {
            "cell_id": meta["cell_id"],
            "g_mt": meta["g_mt"],
            "g_refine": meta["g_refine"],
            "strategy": meta["strategy"],
            "initial_score": _system_score(judged[0]) if 0 in judged else None,
        }
        for step in range(1, n_steps):
            delta = None
            if step in judged and 0 in judged:
                delta = _system_score(judged[step]) - _system_score(judged[0])
            ratios = []
            for doc_dir in doc_dirs:
                initial_path = doc_dir / "s0.merged.txt"
                step_path = doc_dir / f"s{step}.merged.txt"
                if not (initial_path.exists() and step_path.exists()):
                    continue
                doc = docs[doc_dir.name]
                ratios.append(
                    edit_ratio(
                        initial_path.read_text(encoding="utf-8"),
                        step_path.read_text(encoding="utf-8"),
                        diff_tokenization_for(doc.pair.tgt),
                    )
                )
            row[f"s{step}_delta"] = delta
            row[f"s{step}_tier"] = gain_tier(delta, tier_bounds) if delta is not None else None
            row[f"s{step}_edit_pct"] = (
                100.0 * sum(ratios) / len(ratios) if ratios else None
            )
        rows.append(row)
    return rows


def metrics_table(run_root: str | Path) -> list[dict]:
    """d-BLEU against references plus the length-ratio guard, per doc/step."""
    run_root = Path(run_root)
    corpus = load_corpus_snapshot(run_root)
    refs = {d.id: d for d in corpus.references}
    docs = {d.id: d for d in corpus.documents}
    rows = []
    for cell_dir in _cell_dirs(run_root):
        for doc_dir in sorted((cell_dir / "docs").iterdir()):
            doc = docs[doc_dir.name]
            ref = refs.get(doc_dir.name)
            for step_path in sorted(doc_dir.glob("s*.merged.txt")):
                step = int(step_path.stem.split(".")[0][1:])
                hyp = step_path.read_text(encoding="utf-8")
                ratio, flagged = length_ratio_guard(
                    doc.full_text, hyp, "char" if doc.lang in ("zh", "ja") else "whitespace"
                )
                row = {
                    "cell_id": cell_dir.name,
                    "doc_id": doc.id,
                    "step": step,
                    "length_ratio": round(ratio, 4),
                    "length_flagged": flagged,
                    "d_bleu": None,
                }
                if ref is not None:
                    row["d_bleu"] = round(
                        d_bleu(hyp, ref.full_text, bleu_config_for(doc.pair.tgt)), 2
                    )
                rows.append(row)
    return rows


def diagnostics_report(
    run_root: str | Path,
    scorer: Backend | None = None,
    step: int | None = None,
) -> dict:
    """Confidence-vs-edit table per language pair plus likelihood deltas.

    Confidence comes from a rescoring pass of the initial translation
    (flagged in the output); the compared step defaults to the last one.
    """
    run_root = Path(run_root)
    corpus = load_corpus_snapshot(run_root)
    docs = {d.id: d for d in corpus.documents}
    report: dict = {"cells": {}, "confidence_source": "rescoring_pass"}
    for cell_dir in _cell_dirs(run_root):
        per_lp: dict[str, dict] = {}
        deltas_by_step: dict[int, list] = {}
        for doc_dir in sorted((cell_dir / "docs").iterdir()):
            doc = docs[doc_dir.name]
            step_paths = sorted(
                doc_dir.glob("s*.merged.txt"),
                key=lambda p: int(p.stem.split(".")[0][1:]),
            )
            if len(step_paths) < 2:
                continue
            initial = step_paths[0].read_text(encoding="utf-8")
            chosen = step_paths[step] if step is not None else step_paths[-1]
            refined = chosen.read_text(encoding="utf-8")
            tok = diff_tokenization_for(doc.pair.tgt)
            records = label_words(initial, refined, tok)
            lp_stats = per_lp.setdefault(
                doc.pair.code,
                {"n_words": 0, "n_modified": 0, "lp_scores": [], "ent_scores": [],
                 "labels": []},
            )
            lp_stats["n_words"] += len(records)
            lp_stats["n_modified"] += sum(
                1 for r in records if r.label == "modified"
            )
            if scorer is not None:
                tokens = scorer.score(ScoreRequest(context="", continuation=initial))
                scored = attach_confidence(records, tokens)
                lp_stats["lp_scores"].extend(-r.logprob_agg for r in scored)
                lp_stats["ent_scores"].extend(r.entropy_agg for r in scored)
                lp_stats["labels"].extend(r.label == "modified" for r in scored)
                for k, step_path in enumerate(step_paths[1:], start=1):
                    deltas_by_step.setdefault(k, []).append(
                        likelihood_deltas(
                            doc.full_text,
                            initial,
                            step_path.read_text(encoding="utf-8"),
                            scorer,
                            step=k,
                        )
                    )
        lp_rows = []
        for lp, stats in sorted(per_lp.items()):
            row = {
                "lp": lp,
                "n_words": stats["n_words"],
                "modified_pct": round(
                    100.0 * stats["n_modified"] / stats["n_words"], 1
                )
                if stats["n_words"]
                else None,
                "auc_logprob": None,
                "auc_entropy": None,
                "cohens_d_logprob": None,
            }
            labels = stats["labels"]
            if labels and any(labels) and not all(labels):
                row["auc_logprob"] = round(roc_auc(stats["lp_scores"], labels), 3)
                row["auc_entropy"] = round(roc_auc(stats["ent_scores"], labels), 3)
                modified = [s for s, l in zip(stats["lp_scores"], labels) if l]
                kept = [s for s, l in zip(stats["lp_scores"], labels) if not l]
                if len(modified) >= 2 and len(kept) >= 2:
                    try:
                        row["cohens_d_logprob"] = round(cohens_d(modified, kept), 3)
                    except Exception:
                        pass
            lp_rows.append(row)
        step_rows = [
            {
                "step": k,
                "delta_cond": round(sum(d.delta_cond for d in ds) / len(ds), 4),
                "delta_uncond": round(sum(d.delta_uncond for d in ds) / len(ds), 4),
            }
            for k, ds in sorted(deltas_by_step.items())
        ]
        report["cells"][cell_dir.name] = {
            "per_lp": lp_rows,
            "likelihood_deltas": step_rows,
        }
    return report


def eval_refine_overlap_table(run_root: str | Path) -> list[dict]:
    """Compare stored eval-refine diagnoses with judged errors per doc."""
    from .diagnostics import error_overlap

    run_root = Path(run_root)
    rows = []
    for cell_dir in _cell_dirs(run_root):
        for diag_path in sorted(cell_dir.glob("docs/*/s1.diagnosis.json")):
            doc_id = diag_path.parent.name
            judged_path = cell_dir / "judgments" / f"{doc_id}.s0.json"
            if not judged_path.exists():
                continue
            diag_units = json.loads(diag_path.read_text(encoding="utf-8"))
            predicted = [
                MqmError.from_dict(e)
                for unit in diag_units
                if unit
                for e in unit
            ]
            judgment = _load_judgment(judged_path)
            translation = (
                (cell_dir / "docs" / doc_id / "s0.merged.txt").read_text(
                    encoding="utf-8"
                )
            )
            for mode in ("category", "category_severity", "category_severity_span"):
                rep = error_overlap(
                    predicted, judgment.errors, mode, translation=translation
                )
                rows.append(
                    {
                        "cell_id": cell_dir.name,
                        "doc_id": doc_id,
                        "mode": mode,
                        "n_predicted": rep.predicted,
                        "n_reference": rep.reference,
                        "precision": round(rep.precision, 4),
                        "recall": round(rep.recall, 4),
                        "f1": round(rep.f1, 4),
                    }
                )
    return rows


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def render_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fieldnames = list(rows[0].keys())
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row.get(k) is None else row.get(k) for k in fieldnames})
    return buf.getvalue()


def render_text_table(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)\n"
    headers = list(rows[0].keys())
    cells = [[_fmt(r.get(h)) for h in headers] for r in rows]
    widths = [
        max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
