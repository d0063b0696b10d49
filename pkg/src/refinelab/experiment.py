"""Experiment grids: deterministic run directories with full provenance.

A config names a corpus, a grid of (g_mt, g_refine, strategy, steps)
cells and the translator/refiner backends (which may differ, e.g. weak
translator with strong refiner).  Each cell writes its own directory with
per-step unit files, merged documents, stored diagnoses and request logs.
Everything except timing.json is a pure function of config and corpus, so
mock reruns are byte-identical.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from . import __version__
from .corpus import Corpus, LanguagePair, load_corpus, split_units
from .gateway import Backend, HttpChatBackend, MockBackend
from .judge import DocJudgment, MockJudgeBackend, judge_document
from .pipeline import (
    Strategy,
    TranslationRun,
    refine_once,
    step_by_step_translate,
    translate_corpus,
)
from .prompts import load_templates

logger = logging.getLogger(__name__)

TIMING_FILE = "timing.json"
MAX_STEPS_DEFAULT = 4


class ConfigError(ValueError):
    pass


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def digest_of(obj) -> str:
    return hashlib.sha256(_canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def corpus_digest(corpus: Corpus) -> str:
    payload = [
        {
            "id": d.id,
            "pair": d.pair.code,
            "segments": [s.text for s in d.segments],
        }
        for d in corpus.documents
    ]
    return digest_of(payload)


def backend_from_config(cfg: dict) -> Backend:
    kind = cfg.get("kind")
    if kind == "mock":
        return MockBackend(
            seed=cfg.get("seed", 0),
            backend_id=cfg.get("backend_id", "mock"),
            default_max_tokens=cfg.get("default_max_tokens", 256),
            score_top_alternatives=cfg.get("score_top_alternatives", 0),
        )
    if kind == "mock_judge":
        return MockJudgeBackend(
            seed=cfg.get("seed", 0),
            backend_id=cfg.get("backend_id", "mock-judge"),
        )
    if kind == "http":
        try:
            return HttpChatBackend(
                endpoint=cfg["endpoint"],
                model=cfg["model"],
                backend_id=cfg.get("backend_id"),
                auth_env=cfg.get("auth_env", "REFINELAB_API_KEY"),
                timeout_s=cfg.get("timeout_s", 120.0),
                max_retries=cfg.get("max_retries", 4),
                max_concurrency=cfg.get("max_concurrency", 8),
                supports_scoring=cfg.get("supports_scoring", False),
            )
        except KeyError as exc:
            raise ConfigError(f"http backend config missing {exc}") from exc
    raise ConfigError(f"unknown backend kind: {kind!r}")


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    corpus_digest: str
    backend_ids: dict[str, str]
    cells: list[dict]
    tool_version: str
    timestamps: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        # Timestamps live in timing.json so reruns stay byte-identical.
        return _canonical_json(
            {
                "config_digest": self.config_digest,
                "corpus_digest": self.corpus_digest,
                "backend_ids": self.backend_ids,
                "cells": self.cells,
                "tool_version": self.tool_version,
            }
        )


@dataclass
class Experiment:
    root: Path
    manifest: RunManifest
    runs: dict[str, TranslationRun]


def cell_id(g_mt: str, g_refine: str, strategy: Strategy) -> str:
    return f"{g_mt}__{g_refine}__{strategy.tag}"


def _grid_cells(config: dict) -> list[tuple[str, str, Strategy]]:
    grid = config.get("grid")
    if isinstance(grid, list):
        return [
            (c["g_mt"], c["g_refine"], Strategy.parse(c["strategy"])) for c in grid
        ]
    if isinstance(grid, dict):
        return [
            (g_mt, g_refine, Strategy.parse(s))
            for g_mt, g_refine, s in product(
                grid.get("g_mt", ["doc_chunk"]),
                grid.get("g_refine", ["segment"]),
                grid.get("strategies", ["general"]),
            )
        ]
    raise ConfigError("config needs a 'grid' (list of cells or axes object)")


def _clone_run(run: TranslationRun) -> TranslationRun:
    clone = copy.copy(run)
    clone.doc_runs = {
        doc_id: copy.copy(doc_run) for doc_id, doc_run in run.doc_runs.items()
    }
    for doc_run in clone.doc_runs.values():
        doc_run.steps = list(doc_run.steps)
    clone.failed_units = list(run.failed_units)
    return clone


def _write_corpus_snapshot(root: Path, corpus: Corpus) -> None:
    payload = {
        "documents": [
            {
                "id": d.id,
                "pair": d.pair.code,
                "lang": d.lang,
                "segments": [s.text for s in d.segments],
            }
            for d in corpus.documents
        ],
        "references": [
            {
                "id": d.id,
                "pair": d.pair.code,
                "lang": d.lang,
                "segments": [s.text for s in d.segments],
            }
            for d in corpus.references
        ],
    }
    (root / "corpus.json").write_text(
        _canonical_json(payload) + "\n", encoding="utf-8"
    )


def load_corpus_snapshot(root: Path) -> Corpus:
    from .corpus import Document, Segment

    payload = json.loads((root / "corpus.json").read_text(encoding="utf-8"))

    def build(rec: dict) -> Document:
        pair = LanguagePair.from_code(rec["pair"], allowed=None)
        segments = tuple(
            Segment(rec["id"], i, t) for i, t in enumerate(rec["segments"])
        )
        return Document(rec["id"], segments, pair, rec["lang"])

    return Corpus(
        tuple(build(r) for r in payload["documents"]),
        tuple(build(r) for r in payload["references"]),
    )


def _write_run_dir(cell_dir: Path, run: TranslationRun, meta: dict) -> None:
    cell_dir.mkdir(parents=True, exist_ok=True)
    log_lines = []
    for doc_id, doc_run in run.doc_runs.items():
        doc_dir = cell_dir / "docs" / doc_id
        for step in doc_run.steps:
            step_dir = doc_dir / f"s{step.index}" / "units"
            step_dir.mkdir(parents=True, exist_ok=True)
            for i, text in enumerate(step.unit_texts):
                (step_dir / f"{i:03d}.txt").write_text(text, encoding="utf-8")
            (doc_dir / f"s{step.index}.merged.txt").write_text(
                step.merged_text, encoding="utf-8"
            )
            meta_step = {
                "granularity": step.granularity,
                "provenance": step.provenance,
                "flags": list(step.flags),
            }
            (doc_dir / f"s{step.index}.meta.json").write_text(
                _canonical_json(meta_step) + "\n", encoding="utf-8"
            )
            if step.diagnosis is not None:
                diag = [
                    None if unit is None else [e.to_dict() for e in unit]
                    for unit in step.diagnosis
                ]
                (doc_dir / f"s{step.index}.diagnosis.json").write_text(
                    _canonical_json(diag) + "\n", encoding="utf-8"
                )
            log_lines.append(
                _canonical_json(
                    {
                        "doc": doc_id,
                        "step": step.index,
                        "units": len(step.unit_texts),
                        "merged_sha256": hashlib.sha256(
                            step.merged_text.encode("utf-8")
                        ).hexdigest(),
                    }
                )
            )
    logs_dir = cell_dir / "logs"
    logs_dir.mkdir(exist_ok=True)
    (logs_dir / "requests.jsonl").write_text(
        "\n".join(log_lines) + "\n", encoding="utf-8"
    )
    (cell_dir / "cell.json").write_text(_canonical_json(meta) + "\n", encoding="utf-8")


def run_experiment(config: dict, run_root: str | Path) -> Experiment:
    """Execute every grid cell and persist the run tree under run_root."""
    started = time.time()
    run_root = Path(run_root)
    run_root.mkdir(parents=True, exist_ok=True)

    corpus_cfg = config.get("corpus")
    if not corpus_cfg or "path" not in corpus_cfg:
        raise ConfigError("config needs corpus.path")
    pair = None
    if corpus_cfg.get("pair"):
        pair = LanguagePair.from_code(corpus_cfg["pair"], allowed=None)
    corpus = load_corpus(
        corpus_cfg["path"], corpus_cfg.get("format", "jsonl_segments"), pair
    )

    translator = backend_from_config(
        config.get("translator", {"kind": "mock"})
    )
    refiner_cfg = config.get("refiner")
    refiner = backend_from_config(refiner_cfg) if refiner_cfg else translator

    cells = _grid_cells(config)
    steps = int(config.get("steps", MAX_STEPS_DEFAULT))
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    temperature = float(config.get("temperature", 0.0))
    n_samples = int(config.get("n_samples", 1))
    max_tokens = config.get("max_output_tokens")
    siblings = bool(config.get("include_sibling_chunks", False))
    cascade = bool(config.get("cascade_refinement", False))
    templates = load_templates(config.get("template_dir"))

    _write_corpus_snapshot(run_root, corpus)

    initial_cache: dict[str, list[TranslationRun]] = {}
    runs: dict[str, TranslationRun] = {}
    cell_records: list[dict] = []
    for g_mt, g_refine, strategy in cells:
        base_cid = cell_id(g_mt, g_refine, strategy)
        for sample in range(n_samples):
            cid = base_cid if n_samples == 1 else f"{base_cid}__sample{sample:02d}"
            record = {
                "cell_id": cid,
                "g_mt": g_mt,
                "g_refine": g_refine,
                "strategy": strategy.tag,
                "status": "ok",
            }
            try:
                if strategy.kind == "step_by_step":
                    doc_runs = {}
                    research = []
                    for doc in corpus.documents:
                        doc_result = step_by_step_translate(
                            doc, refiner, templates, temperature, max_tokens
                        )
                        doc_runs.update(doc_result.doc_runs)
                        research.extend(doc_result.provenance["research_outputs"])
                    run = TranslationRun(
                        g_mt="doc_chunk",
                        provenance={
                            "backend_id": refiner.backend_id,
                            "strategy": "step_by_step",
                            "research_outputs": research,
                        },
                        doc_runs=doc_runs,
                    )
                else:
                    if g_mt not in initial_cache:
                        initial_cache[g_mt] = translate_corpus(
                            corpus,
                            g_mt,
                            translator,
                            templates,
                            n_samples=n_samples,
                            temperature=temperature,
                            max_output_tokens=max_tokens,
                            include_sibling_chunks=siblings,
                        )
                    run = _clone_run(initial_cache[g_mt][sample])
                    # an explicitly configured step count IS the budget
                    run.max_refine_steps = max(run.max_refine_steps, steps)
                    for _ in range(steps):
                        refine_once(
                            run,
                            strategy,
                            g_refine,
                            refiner,
                            corpus,
                            templates,
                            temperature=temperature,
                            max_output_tokens=max_tokens,
                            include_sibling_chunks=siblings,
                            cascade=cascade,
                        )
                if run.partial:
                    record["status"] = "partial"
                    record["failed_units"] = run.failed_units
                runs[cid] = run
                _write_run_dir(
                    run_root / cid,
                    run,
                    {
                        "cell_id": cid,
                        "g_mt": g_mt,
                        "g_refine": g_refine,
                        "strategy": strategy.tag,
                        "steps": steps,
                        "sample_index": run.sample_index,
                        "sample_seed": run.sample_seed,
                    },
                )
            except Exception as exc:  # cell isolation: a bad cell never kills the grid
                logger.exception("cell %s failed", cid)
                record["status"] = "failed"
                record["error"] = str(exc)
            cell_records.append(record)

    manifest = RunManifest(
        config_digest=digest_of(config),
        corpus_digest=corpus_digest(corpus),
        backend_ids={
            "translator": translator.backend_id,
            "refiner": refiner.backend_id,
        },
        cells=cell_records,
        tool_version=__version__,
        timestamps={"started": started, "finished": time.time()},
    )
    (run_root / "manifest.json").write_text(
        manifest.to_json() + "\n", encoding="utf-8"
    )
    (run_root / TIMING_FILE).write_text(
        json.dumps(manifest.timestamps, sort_keys=True) + "\n", encoding="utf-8"
    )
    return Experiment(run_root, manifest, runs)


def runs_identical(
    root_a: str | Path, root_b: str | Path, exclude: tuple[str, ...] = (TIMING_FILE,)
) -> bool:
    """Byte-compare two run trees, ignoring excluded file names."""
    root_a, root_b = Path(root_a), Path(root_b)

    def snapshot(root: Path) -> dict[str, bytes]:
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in exclude
        }

    return snapshot(root_a) == snapshot(root_b)


def judge_run(
    run_root: str | Path,
    judge_backend: Backend,
    cells: list[str] | None = None,
    templates=None,
) -> dict[str, dict[str, list[DocJudgment]]]:
    """Judge every step of every cell; persist one judgment file per
    (cell, doc, step) for offline re-aggregation."""
    run_root = Path(run_root)
    corpus = load_corpus_snapshot(run_root)
    docs = {d.id: d for d in corpus.documents}
    templates = templates or load_templates()
    out: dict[str, dict[str, list[DocJudgment]]] = {}
    for cell_dir in sorted(run_root.iterdir()):
        if not (cell_dir / "cell.json").exists():
            continue
        if cells and cell_dir.name not in cells:
            continue
        judgments_dir = cell_dir / "judgments"
        judgments_dir.mkdir(exist_ok=True)
        cell_out: dict[str, list[DocJudgment]] = {}
        for doc_dir in sorted((cell_dir / "docs").iterdir()):
            doc = docs[doc_dir.name]
            step_files = sorted(
                doc_dir.glob("s*.merged.txt"),
                key=lambda p: int(p.stem.split(".")[0][1:]),
            )
            doc_judgments = []
            for step_file in step_files:
                step_idx = int(step_file.stem.split(".")[0][1:])
                hyp = step_file.read_text(encoding="utf-8")
                judgment = judge_document(
                    doc.full_text,
                    hyp,
                    split_units(hyp),
                    judge_backend,
                    pair=doc.pair,
                    doc_id=doc.id,
                    templates=templates,
                )
                (judgments_dir / f"{doc.id}.s{step_idx}.json").write_text(
                    _canonical_json(judgment.to_dict()) + "\n", encoding="utf-8"
                )
                doc_judgments.append(judgment)
            cell_out[doc.id] = doc_judgments
        out[cell_dir.name] = cell_out
    return out
