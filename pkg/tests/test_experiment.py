import json

import pytest

from refinelab.experiment import (
    ConfigError,
    backend_from_config,
    cell_id,
    corpus_digest,
    judge_run,
    load_corpus_snapshot,
    run_experiment,
    runs_identical,
)
from refinelab.corpus import load_corpus
from refinelab.judge import MockJudgeBackend
from refinelab.pipeline import Strategy


def base_config(fixture_corpus_path, **overrides):
    config = {
        "corpus": {"path": str(fixture_corpus_path)},
        "grid": {
            "g_mt": ["doc_chunk"],
            "g_refine": ["segment"],
            "strategies": ["general"],
        },
        "steps": 2,
        "translator": {"kind": "mock", "seed": 1},
        "max_output_tokens": 128,
    }
    config.update(overrides)
    return config


class TestBackendFromConfig:
    def test_mock(self):
        assert backend_from_config({"kind": "mock", "seed": 2}).backend_id == "mock"

    def test_mock_judge(self):
        assert backend_from_config({"kind": "mock_judge"}).backend_id == "mock-judge"

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            backend_from_config({"kind": "quantum"})

    def test_http_requires_endpoint(self):
        with pytest.raises(ConfigError):
            backend_from_config({"kind": "http", "model": "m"})


class TestRunExperiment:
    def test_run_writes_manifest_and_steps(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        experiment = run_experiment(config, tmp_path / "run")
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["tool_version"]
        assert manifest["backend_ids"] == {"translator": "mock", "refiner": "mock"}
        assert [c["status"] for c in manifest["cells"]] == ["ok"]
        cid = cell_id("doc_chunk", "segment", Strategy("general"))
        doc_dir = tmp_path / "run" / cid / "docs" / "alpha"
        assert (doc_dir / "s0.merged.txt").exists()
        assert (doc_dir / "s2.merged.txt").exists()
        assert experiment.runs[cid].doc_runs["alpha"].steps[2].index == 2

    def test_steps_zero_initial_only(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path, steps=0)
        run_experiment(config, tmp_path / "run")
        cid = cell_id("doc_chunk", "segment", Strategy("general"))
        doc_dir = tmp_path / "run" / cid / "docs" / "alpha"
        assert (doc_dir / "s0.merged.txt").exists()
        assert not (doc_dir / "s1.merged.txt").exists()

    def test_distinct_translator_refiner_recorded(self, fixture_corpus_path, tmp_path):
        config = base_config(
            fixture_corpus_path,
            translator={"kind": "mock", "seed": 1, "backend_id": "weak-translator"},
            refiner={"kind": "mock", "seed": 9, "backend_id": "strong-refiner"},
        )
        experiment = run_experiment(config, tmp_path / "run")
        assert experiment.manifest.backend_ids == {
            "translator": "weak-translator",
            "refiner": "strong-refiner",
        }
        cid = cell_id("doc_chunk", "segment", Strategy("general"))
        steps = experiment.runs[cid].doc_runs["alpha"].steps
        assert steps[0].provenance["backend_id"] == "weak-translator"
        assert steps[1].provenance["backend_id"] == "strong-refiner"

    def test_rerun_byte_identical(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        run_experiment(config, tmp_path / "a")
        run_experiment(config, tmp_path / "b")
        assert runs_identical(tmp_path / "a", tmp_path / "b")

    def test_timing_excluded_from_identity(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        run_experiment(config, tmp_path / "a")
        run_experiment(config, tmp_path / "b")
        timing_a = (tmp_path / "a" / "timing.json").read_text()
        timing_b = (tmp_path / "b" / "timing.json").read_text()
        assert json.loads(timing_a) != json.loads(timing_b) or timing_a == timing_b
        assert runs_identical(tmp_path / "a", tmp_path / "b")

    def test_bad_strategy_name_fails_fast(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        config["grid"]["strategies"] = ["brilliant"]
        with pytest.raises(Exception):
            run_experiment(config, tmp_path / "run")

    def test_step_by_step_cell(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        config["grid"]["strategies"] = ["step_by_step"]
        experiment = run_experiment(config, tmp_path / "run")
        cid = cell_id("doc_chunk", "segment", Strategy("step_by_step"))
        steps = experiment.runs[cid].doc_runs["alpha"].steps
        assert [s.provenance["stage"] for s in steps] == [
            "draft", "refine", "proofread",
        ]

    def test_corpus_snapshot_roundtrip(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path)
        run_experiment(config, tmp_path / "run")
        snapshot = load_corpus_snapshot(tmp_path / "run")
        original = load_corpus(fixture_corpus_path)
        assert corpus_digest(snapshot) == corpus_digest(original)
        assert len(snapshot.references) == len(original.references)

    def test_missing_corpus_path_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment({"grid": {"strategies": ["general"]}}, tmp_path)

    def test_sampled_cells_written_per_sample(self, fixture_corpus_path, tmp_path):
        config = base_config(
            fixture_corpus_path, steps=1, n_samples=3, temperature=0.8
        )
        experiment = run_experiment(config, tmp_path / "run")
        names = sorted(experiment.runs)
        assert names == [
            "doc_chunk__segment__general__sample00",
            "doc_chunk__segment__general__sample01",
            "doc_chunk__segment__general__sample02",
        ]
        merged = {
            experiment.runs[n].doc_runs["alpha"].steps[0].merged_text
            for n in names
        }
        assert len(merged) == 3  # samples differ
        assert [experiment.runs[n].sample_index for n in names] == [0, 1, 2]
        assert all(
            experiment.runs[n].sample_seed is not None for n in names
        )


class TestJudgeRun:
    def test_judgments_persisted_per_doc_step(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path, steps=1)
        run_experiment(config, tmp_path / "run")
        results = judge_run(tmp_path / "run", MockJudgeBackend(seed=2))
        cid = cell_id("doc_chunk", "segment", Strategy("general"))
        assert set(results[cid]) == {"alpha", "beta", "gamma"}
        judgment_files = sorted(
            p.name for p in (tmp_path / "run" / cid / "judgments").glob("*.json")
        )
        assert "alpha.s0.json" in judgment_files
        assert "alpha.s1.json" in judgment_files
        payload = json.loads(
            (tmp_path / "run" / cid / "judgments" / "gamma.s0.json").read_text()
        )
        assert payload["pair"] == "en-zh"
        assert payload["tokenization"] == "char"

    def test_judging_deterministic(self, fixture_corpus_path, tmp_path):
        config = base_config(fixture_corpus_path, steps=1)
        run_experiment(config, tmp_path / "a")
        run_experiment(config, tmp_path / "b")
        judge_run(tmp_path / "a", MockJudgeBackend(seed=2))
        judge_run(tmp_path / "b", MockJudgeBackend(seed=2))
        assert runs_identical(tmp_path / "a", tmp_path / "b")
