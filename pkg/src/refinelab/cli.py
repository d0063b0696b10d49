"""Command-line driver: chunk, run, judge, diagnose, report, human-eval.

Exit codes: 0 success, 2 config error, 3 I/O or corpus error, 4 backend
error, 5 partial failure (some grid cells failed or were incomplete).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .corpus import (
    CorpusError,
    LanguagePair,
    load_corpus,
    plan_to_dict,
    plan_units,
    write_plan_file,
)
from .experiment import (
    ConfigError,
    backend_from_config,
    judge_run,
    run_experiment,
)
from .gateway import BackendError, MockBackend
from .human_eval import PairwiseSession, build_pairwise_session, summarize_pairwise
from .pipeline import PipelineError
from .prompts import PromptError
from .reporting import (
    diagnostics_report,
    eval_refine_overlap_table,
    gain_table,
    metrics_table,
    render_csv,
    render_text_table,
)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_BACKEND = 4
EXIT_PARTIAL = 5


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exception classes onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, PipelineError, PromptError) as exc:
            _fail(EXIT_CONFIG, str(exc))
        except (CorpusError, FileNotFoundError, json.JSONDecodeError) as exc:
            _fail(EXIT_IO, str(exc))
        except BackendError as exc:
            _fail(EXIT_BACKEND, str(exc))

    wrapper.__name__ = fn.__name__
    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Document-level MT refinement lab."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.argument("corpus_path", type=click.Path())
@click.option("--format", "format_id", default="jsonl_segments", show_default=True)
@click.option("--pair", default=None, help="Language pair code, e.g. en-de.")
@click.option(
    "--granularity",
    type=click.Choice(["segment", "paragraph", "doc_chunk"]),
    default="doc_chunk",
    show_default=True,
)
@click.option("--target", "target_words", type=int, default=None)
@click.option("--tolerance", "tolerance_words", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_guard
def chunk(corpus_path, format_id, pair, granularity, target_words,
          tolerance_words, out_path):
    """Write a sidecar plan file of unit spans for every document."""
    pair_obj = LanguagePair.from_code(pair, allowed=None) if pair else None
    corpus = load_corpus(corpus_path, format_id, pair_obj)
    plans = [
        plan_to_dict(doc, plan_units(doc, granularity, target_words, tolerance_words))
        for doc in corpus.documents
    ]
    write_plan_file(out_path, plans)
    click.echo(f"wrote {len(plans)} plans to {out_path}")


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--out", "run_root", type=click.Path(), required=True)
@_guard
def run(config_path, run_root):
    """Execute the experiment grid described by a JSON config file."""
    config_file = Path(config_path)
    if not config_file.exists():
        raise FileNotFoundError(f"missing config: {config_file}")
    config = json.loads(config_file.read_text(encoding="utf-8"))
    experiment = run_experiment(config, run_root)
    failures = [c for c in experiment.manifest.cells if c["status"] != "ok"]
    click.echo(
        f"ran {len(experiment.manifest.cells)} cells, "
        f"{len(failures)} not ok, manifest at {experiment.root / 'manifest.json'}"
    )
    if failures:
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.argument("run_root", type=click.Path())
@click.option(
    "--backend",
    "backend_json",
    default='{"kind": "mock_judge"}',
    show_default=True,
    help="Judge backend config as JSON.",
)
@click.option("--cell", "cells", multiple=True, help="Restrict to these cells.")
@_guard
def judge(run_root, backend_json, cells):
    """Judge every persisted step with the MQM document-context protocol."""
    backend = backend_from_config(json.loads(backend_json))
    results = judge_run(run_root, backend, list(cells) or None)
    n = sum(len(docs) for docs in results.values())
    click.echo(f"judged {n} documents across {len(results)} cells")


@main.command()
@click.argument("run_root", type=click.Path())
@click.option("--scorer-seed", type=int, default=0, show_default=True)
@click.option("--no-scorer", is_flag=True, help="Skip confidence/likelihood passes.")
@_guard
def diagnose(run_root, scorer_seed, no_scorer):
    """Edit/confidence/likelihood diagnostics; writes diagnostics.json."""
    scorer = None if no_scorer else MockBackend(
        seed=scorer_seed, score_top_alternatives=3
    )
    report = diagnostics_report(run_root, scorer)
    out = Path(run_root) / "diagnostics.json"
    out.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {out}")


@main.command()
@click.argument("run_root", type=click.Path())
@click.option("--csv", "csv_dir", type=click.Path(), default=None,
              help="Also write CSV tables into this directory.")
@click.option("--tier-bounds", default="0,2,5", show_default=True,
              help="Gain-tier thresholds: negative/small/medium/large.")
@_guard
def report(run_root, csv_dir, tier_bounds):
    """Render gain, metrics and overlap tables from a judged run tree."""
    try:
        bounds = tuple(float(x) for x in tier_bounds.split(","))
        if len(bounds) != 3:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad --tier-bounds: {tier_bounds!r}") from None
    gains = gain_table(run_root, bounds)
    metrics = metrics_table(run_root)
    overlap = eval_refine_overlap_table(run_root)
    click.echo("== gain table ==")
    click.echo(render_text_table(gains))
    click.echo("== metrics ==")
    click.echo(render_text_table(metrics))
    if overlap:
        click.echo("== eval-refine diagnosis vs judge overlap ==")
        click.echo(render_text_table(overlap))
    if csv_dir:
        out = Path(csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gains.csv").write_text(render_csv(gains), encoding="utf-8")
        (out / "metrics.csv").write_text(render_csv(metrics), encoding="utf-8")
        (out / "overlap.csv").write_text(render_csv(overlap), encoding="utf-8")
        click.echo(f"CSV tables in {out}")


@main.group(name="human-eval")
def human_eval_group():
    """Build, serve and summarize human annotation sessions."""


@human_eval_group.command(name="build")
@click.argument("run_root", type=click.Path())
@click.option("--cell", "cell_name", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--step", type=int, default=None, help="Refined step (default last).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_guard
def human_eval_build(run_root, cell_name, seed, step, out_path):
    """Create a blind pairwise session comparing s0 against a later step."""
    from .experiment import load_corpus_snapshot

    from .human_eval import chunk_pairs_for_annotation

    root = Path(run_root)
    cell_dir = root / cell_name
    if not cell_dir.is_dir():
        raise FileNotFoundError(f"no such cell: {cell_dir}")
    corpus = load_corpus_snapshot(root)
    docs = {d.id: d for d in corpus.documents}
    pairs = []
    for doc_dir in sorted((cell_dir / "docs").iterdir()):
        doc = docs[doc_dir.name]
        steps = sorted(
            doc_dir.glob("s*.merged.txt"),
            key=lambda p: int(p.stem.split(".")[0][1:]),
        )
        if len(steps) < 2:
            continue
        refined_path = steps[step] if step is not None else steps[-1]
        pairs.extend(
            chunk_pairs_for_annotation(
                doc,
                steps[0].read_text(encoding="utf-8"),
                refined_path.read_text(encoding="utf-8"),
            )
        )
    session = build_pairwise_session(pairs, seed)
    session.save(out_path)
    click.echo(f"built session with {len(session.items)} items at {out_path}")


@human_eval_group.command(name="serve")
@click.argument("session_path", type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
@click.option("--admin-token", default=None)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Static annotation UI build to serve at /.")
@_guard
def human_eval_serve(session_path, host, port, admin_token, ui_dir):
    """Serve the annotation API (and UI when --ui-dir is given)."""
    import secrets

    from .server import serve

    if not Path(session_path).exists():
        raise FileNotFoundError(f"missing session: {session_path}")
    token = admin_token or secrets.token_hex(16)
    click.echo(f"serving on http://{host}:{port}  (admin token: {token})")
    serve(session_path, host, port, token, ui_dir)


@human_eval_group.command(name="summarize")
@click.argument("session_path", type=click.Path())
@_guard
def human_eval_summarize(session_path):
    """De-randomize and summarize a session export."""
    session = PairwiseSession.load(session_path)
    rows = []
    for dim, s in summarize_pairwise(session).items():
        rows.append(
            {
                "dimension": dim,
                "judged": s.n_judged,
                "initial_pct": round(s.pct_initial, 1),
                "tie_pct": round(s.pct_tie, 1),
                "refined_pct": round(s.pct_refined, 1),
                "win_rate": None
                if s.win_rate_no_ties is None
                else round(s.win_rate_no_ties, 1),
                "p_value": None if s.p_value is None else f"{s.p_value:.2e}",
            }
        )
    click.echo(render_text_table(rows))


if __name__ == "__main__":
    main()
