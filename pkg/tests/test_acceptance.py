"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Absolute quality numbers from large-scale runs with hosted models
are treated as reference points only (see refinelab.reference); this suite
substitutes oracle-equivalence and property checks that are decidable on a
desk machine.
"""

import json
import os
import random
import time

import pytest

from refinelab.corpus import count_words, merge_units, plan_units, span_text
from refinelab.diagnostics import (
    DiagnosticsError,
    edit_ratio,
    error_overlap,
    label_words,
    likelihood_deltas,
    roc_auc,
)
from refinelab.experiment import run_experiment, runs_identical
from refinelab.gateway import MockBackend, ScriptedBackend, mock_score_logprob
from refinelab.human_eval import build_pairwise_session, summarize_pairwise
from refinelab.judge import (
    MqmError,
    aggregate_scores,
    judge_document,
    normalized_score,
)
from refinelab.metrics import d_bleu, length_ratio_guard
from refinelab import reference

from conftest import FIXTURE_CORPUS, random_doc
from test_diagnostics import lcs_length_oracle
from test_human_eval import judge_all, make_pairs


def announce(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def mqm(severity, category="accuracy", span=None):
    return MqmError(
        error_category=category, error_type="t", severity=severity, error_span=span
    )


class TestScoreFormulaGoldenSuite:
    def test_normalized_score_golden(self):
        started = time.monotonic()
        minor, major, critical = mqm("minor"), mqm("major"), mqm("critical")
        cases = [
            # (errors, tokens, hand-computed score)
            ([], 1, 100.0),
            ([], 123456, 100.0),
            ([minor], 1000, 99.0),
            ([major], 100, 70.0),
            ([critical], 100, 50.0),
            ([minor, major, critical], 100, 10.0),  # 9/100*1000 = 90
            ([minor] * 10, 500, 80.0),  # 10/500*1000 = 20
            ([major] * 4, 400, 70.0),  # 12/400*1000 = 30
            ([critical] * 25, 1000, 0.0),  # exact floor: 125 -> clamp
            ([critical] * 26, 1000, 0.0),  # below floor stays clamped
            ([major], 30, 0.0),  # 100 exact: 3/30*1000 = 100 -> 0
            ([minor, minor], 2000, 99.0),
            ([critical], 50, 0.0),  # exactly at the zero clamp boundary
        ]
        assert len(cases) >= 10
        for errors, tokens, expected in cases:
            assert normalized_score(errors, tokens) == expected, (errors, tokens)
        elapsed = time.monotonic() - started
        assert elapsed < 1.0, f"golden suite took {elapsed:.2f}s"
        announce("score-formula-golden-suite")


class TestChunkingProperties:
    def test_thousand_random_documents(self):
        started = time.monotonic()
        rng = random.Random(20240)
        plans = (
            ("segment", None, None),
            ("paragraph", 250, 50),
            ("doc_chunk", 2048, 500),
        )
        for i in range(1000):
            doc = random_doc(rng, doc_id=f"doc{i}")
            for granularity, target, tolerance in plans:
                spans = plan_units(doc, granularity, target, tolerance)
                texts = [span_text(doc, span) for span in spans]
                # round-trip merge identity
                assert merge_units(texts) == doc.full_text
                # partition: contiguous, non-overlapping, covering; span
                # word counts sum to the document word count
                assert spans[0].start_seg == 0
                assert spans[-1].end_seg == len(doc.segments) - 1
                for prev, cur in zip(spans, spans[1:]):
                    assert cur.start_seg == prev.end_seg + 1
                assert (
                    sum(count_words(t, doc.lang) for t in texts)
                    == doc.word_count
                )
                # greedy bound: non-final spans within target+tolerance
                # (segment granularity: exactly one segment per span)
                if granularity == "segment":
                    assert all(s.start_seg == s.end_seg for s in spans)
                else:
                    cap = target + tolerance
                    for span, text in zip(spans[:-1], texts[:-1]):
                        words = count_words(text, doc.lang)
                        single = span.start_seg == span.end_seg
                        assert words <= cap or single
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"chunking properties took {elapsed:.2f}s"
        announce("chunking-properties")


class TestMockEndToEnd:
    def test_nine_cell_grid_reproducible(self, tmp_path):
        started = time.monotonic()
        config = {
            "corpus": {"path": str(FIXTURE_CORPUS)},
            "grid": {
                "g_mt": ["segment", "paragraph", "doc_chunk"],
                "g_refine": ["segment", "paragraph", "doc_chunk"],
                "strategies": ["general"],
            },
            "steps": 4,
            "translator": {"kind": "mock", "seed": 17},
            "max_output_tokens": 192,
        }
        first = run_experiment(config, tmp_path / "a")
        second = run_experiment(config, tmp_path / "b")
        assert len(first.manifest.cells) == 9
        assert all(c["status"] == "ok" for c in first.manifest.cells)
        assert (tmp_path / "a" / "manifest.json").exists()
        for run in first.runs.values():
            for doc_run in run.doc_runs.values():
                assert len(doc_run.steps) == 5  # s0 + 4 refinement steps
        assert runs_identical(tmp_path / "a", tmp_path / "b")
        assert second.manifest.config_digest == first.manifest.config_digest
        elapsed = time.monotonic() - started
        assert elapsed < 30.0, f"mock end-to-end took {elapsed:.2f}s"
        announce("mock-end-to-end")


class TestAucOracleEquivalence:
    def test_hundred_random_instances(self):
        rng = random.Random(88)

        def brute_force(scores, labels):
            pos = [s for s, l in zip(scores, labels) if l]
            neg = [s for s, l in zip(scores, labels) if not l]
            wins = sum(1 for p in pos for n in neg if p > n)
            ties = sum(1 for p in pos for n in neg if p == n)
            return (wins + 0.5 * ties) / (len(pos) * len(neg))

        for case in range(100):
            n = rng.randint(2, 200)
            if case % 2:
                scores = [float(rng.randint(0, 3)) for _ in range(n)]  # heavy ties
            else:
                scores = [rng.random() for _ in range(n)]
            labels = [rng.random() < 0.5 for _ in range(n)]
            if all(labels) or not any(labels):
                labels[0] = not labels[0]
            assert abs(roc_auc(scores, labels) - brute_force(scores, labels)) <= 1e-12
        with pytest.raises(DiagnosticsError, match="AUC undefined"):
            roc_auc([1.0, 2.0], [True, True])
        announce("auc-oracle-equivalence")


class TestDiffEditRatioOracle:
    def test_two_hundred_random_pairs(self):
        rng = random.Random(4242)
        for _ in range(200):
            n_a = rng.randint(1, 40)
            n_b = rng.randint(0, 40)
            a = tuple(f"t{rng.randint(0, 9)}" for _ in range(n_a))
            b = tuple(f"t{rng.randint(0, 9)}" for _ in range(n_b))
            initial, refined = " ".join(a), " ".join(b)
            expected_ratio = (n_a - lcs_length_oracle(a, b)) / n_a
            assert edit_ratio(initial, refined) == pytest.approx(
                expected_ratio, abs=1e-12
            )
            records = label_words(initial, refined)
            modified = sum(1 for r in records if r.label == "modified")
            # label consistency: ratio == modified / total
            assert edit_ratio(initial, refined) == pytest.approx(
                modified / len(records), abs=1e-12
            )
            # identity
            assert edit_ratio(initial, initial) == 0.0
        announce("diff-edit-ratio-oracle")


class TestLikelihoodDeltas:
    def test_identity_and_mock_oracle(self):
        scorer = MockBackend(seed=13)
        identity = likelihood_deltas("src doc", "same words", "same words", scorer)
        assert identity.delta_cond == 0.0 and identity.delta_uncond == 0.0

        import re

        def resum(context, text):
            tokens = re.findall(r"\S+\s*", text)
            lps = [mock_score_logprob(13, context, t) for t in tokens]
            return sum(lps) / len(lps)

        src = "the original document"
        y0 = "first version of the target text"
        yr = "second revision of that target text now"
        delta = likelihood_deltas(src, y0, yr, scorer)
        assert delta.delta_cond == pytest.approx(
            resum(src, yr) - resum(src, y0), abs=1e-9
        )
        assert delta.delta_uncond == pytest.approx(
            resum("", yr) - resum("", y0), abs=1e-9
        )
        # reference points from full-scale runs are documented, not asserted
        ref = reference.LIKELIHOOD_DELTA_REFERENCE["doc_chunk->segment"]["s1"]
        assert ref == (-0.151, 0.041)
        announce("likelihood-deltas")


class TestOverlapMetrics:
    def test_hand_fixtures_and_monotonicity(self):
        translation = "alpha beta gamma delta epsilon zeta"
        # 3 predicted vs 2 reference, one category-only match
        predicted = [mqm("minor", "accuracy"), mqm("minor", "style"), mqm("minor", "other")]
        ref_list = [mqm("major", "accuracy"), mqm("minor", "fluency")]
        rep = error_overlap(predicted, ref_list, "category")
        assert (rep.precision, rep.recall) == (1 / 3, 1 / 2)
        assert rep.f1 == pytest.approx(0.4)
        # identical lists: perfect in every mode
        same = [mqm("major", "accuracy", "alpha beta"), mqm("minor", "style", "zeta")]
        for mode in ("category", "category_severity", "category_severity_span"):
            rep = error_overlap(same, list(same), mode, translation)
            assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)
        # severity-tightened hand case
        rep = error_overlap(
            [mqm("minor", "accuracy")], [mqm("major", "accuracy")], "category_severity"
        )
        assert (rep.precision, rep.recall, rep.f1) == (0.0, 0.0, 0.0)
        # strictness monotonicity on random pairs
        rng = random.Random(55)
        categories = ["accuracy", "fluency", "style", "terminology", "other"]
        severities = ["minor", "major", "critical"]
        spans = ["alpha", "beta gamma", "delta", "epsilon zeta", None]
        for _ in range(100):
            def rand_errors():
                return [
                    mqm(rng.choice(severities), rng.choice(categories),
                        rng.choice(spans))
                    for _ in range(rng.randint(0, 7))
                ]

            p, r = rand_errors(), rand_errors()
            reports = [
                error_overlap(p, r, mode, translation)
                for mode in ("category", "category_severity",
                             "category_severity_span")
            ]
            for loose, strict in zip(reports, reports[1:]):
                assert strict.precision <= loose.precision + 1e-12
                assert strict.recall <= loose.recall + 1e-12
        announce("overlap-metrics")


class TestPairwiseAggregation:
    def test_published_count_arithmetic(self):
        # fluency: 32/33 (en-de) + 46/47 (en-es) -> 78/80 -> 97.5 %
        pairs = make_pairs(33, "en-de") + make_pairs(47, "en-es")
        session = build_pairwise_session(pairs, seed=6)
        judge_all(session, "fluency", refined_wins=32, ties=0, lp="en-de")
        judge_all(session, "fluency", refined_wins=46, ties=0, lp="en-es")
        fluency = summarize_pairwise(session)["fluency"]
        assert abs(fluency.win_rate_no_ties - 97.5) <= 0.1
        assert fluency.per_lp_wins == {"en-de": (32, 33), "en-es": (46, 47)}
        assert fluency.p_value < 1e-4

        # accuracy: 14/27 + 37/40 -> 51/67 -> 76.1 %
        pairs = make_pairs(27, "en-de") + make_pairs(40, "en-es")
        session = build_pairwise_session(pairs, seed=7)
        judge_all(session, "accuracy", refined_wins=14, ties=0, lp="en-de")
        judge_all(session, "accuracy", refined_wins=37, ties=0, lp="en-es")
        accuracy = summarize_pairwise(session)["accuracy"]
        assert abs(accuracy.win_rate_no_ties - 76.1) <= 0.1

        # style+term: 25/28 + 42/44 -> 67/72 -> 93.1 %
        pairs = make_pairs(28, "en-de") + make_pairs(44, "en-es")
        session = build_pairwise_session(pairs, seed=8)
        judge_all(session, "style_term", refined_wins=25, ties=0, lp="en-de")
        judge_all(session, "style_term", refined_wins=42, ties=0, lp="en-es")
        style = summarize_pairwise(session)["style_term"]
        assert abs(style.win_rate_no_ties - 93.1) <= 0.1
        announce("pairwise-aggregation")


class TestJudgeIntegration:
    def test_canned_three_doc_fixture(self):
        from refinelab.corpus import LanguagePair

        def reply(errors):
            return json.dumps(
                {"quality_explanation": "-", "quality_score": 80, "errors": errors}
            )

        def error(severity, category):
            return {
                "explanation": "-", "error_span": "x",
                "error_category": category, "error_type": "t",
                "severity": severity,
            }

        # d1 (en-de): 40 tokens, one minor accuracy -> 100 - 1/40*1000 = 75
        d1_segments = [" ".join(f"a{i}" for i in range(40))]
        # d2 (en-de): 200 tokens over 2 segments, one major -> 100 - 15 = 85
        d2_segments = [
            " ".join(f"b{i}" for i in range(100)),
            " ".join(f"c{i}" for i in range(100)),
        ]
        # d3 (en-zh): 100 chars over 2 segments, one minor -> 90
        d3_segments = ["字" * 50, "词" * 50]
        canned = {
            d1_segments[0]: reply([error("minor", "accuracy")]),
            d2_segments[0]: reply([error("major", "accuracy")]),
            d2_segments[1]: reply([]),
            d3_segments[0]: reply([error("minor", "fluency")]),
            d3_segments[1]: reply([]),
        }

        def script(req):
            user = req.turns[-1][1]
            for segment, response in canned.items():
                if f"<target_segment>{segment}</target_segment>" in user:
                    return response
            raise AssertionError("unexpected judge request")

        backend = ScriptedBackend(script)
        ende = LanguagePair("en", "de")
        enzh = LanguagePair("en", "zh")
        j1 = judge_document("s", "\n\n".join(d1_segments), d1_segments,
                            backend, ende, "d1")
        j2 = judge_document("s", "\n\n".join(d2_segments), d2_segments,
                            backend, ende, "d2")
        j3 = judge_document("s", "\n\n".join(d3_segments), d3_segments,
                            backend, enzh, "d3")
        assert j1.normalized_overall == 75.0
        assert j1.dimension_scores == {
            "accuracy": 75.0, "fluency": 100.0, "style_term": 100.0, "other": 100.0,
        }
        assert j2.normalized_overall == 85.0
        assert j2.dimension_scores == {
            "accuracy": 85.0, "fluency": 100.0, "style_term": 100.0, "other": 100.0,
        }
        assert j3.doc_len_tokens == 100
        assert j3.normalized_overall == 90.0
        assert j3.dimension_scores == {
            "accuracy": 100.0, "fluency": 90.0, "style_term": 100.0, "other": 100.0,
        }
        # two-level aggregation: en-de mean 80, en-zh mean 90 -> system 85
        aggregate = aggregate_scores({"en-de": [j1, j2], "en-zh": [j3]})
        assert aggregate.per_lp == {"en-de": 80.0, "en-zh": 90.0}
        assert aggregate.system == 85.0
        announce("judge-integration")


class TestMetricsAcceptance:
    def test_d_bleu_and_length_guard(self):
        text = "the quick brown fox jumps over the lazy dog tonight"
        assert d_bleu(text, text) == pytest.approx(100.0, abs=1e-9)
        assert d_bleu("", text) == 0.0
        hand_value = 100.0 * (0.8 * 0.8 * 0.75 * (2.0 / 3.0)) ** 0.25
        assert d_bleu("a b c d e", "a b c d f") == pytest.approx(
            hand_value, abs=1e-9
        )
        # guard flags exactly outside the closed interval [0.8, 1.2]
        src5 = "s1 s2 s3 s4 s5"
        cases = [
            (4, False),   # 0.8 passes
            (6, False),   # 1.2 passes
            (3, True),    # 0.6 flagged
            (7, True),    # 1.4 flagged
            (5, False),   # 1.0 passes
        ]
        for n_tokens, expect_flag in cases:
            tgt = " ".join(f"t{i}" for i in range(n_tokens))
            ratio, flagged = length_ratio_guard(src5, tgt)
            assert flagged == expect_flag, (n_tokens, ratio)
        announce("metrics")


class TestFullScaleCaveat:
    def test_reference_points_documented_not_asserted(self):
        # Full-scale gains, strength-swap numbers and the near-chance
        # confidence AUC require hosted models and a hosted judge; they are
        # recorded as reference constants for report readers.
        assert reference.CONFIDENCE_EDIT_AUC_REFERENCE["logprob"] == 0.503
        assert reference.CONFIDENCE_EDIT_AUC_REFERENCE["entropy"] == 0.504
        swap = reference.STRENGTH_SWAP_REFERENCE
        assert swap["weak->strong_s4"] > swap["weak->weak_s4"]
        assert swap["strong->weak_s4"] < swap["strong->strong_s4"]
        deltas = reference.LIKELIHOOD_DELTA_REFERENCE
        assert set(deltas) == {
            "doc_chunk->segment", "doc_chunk->paragraph", "doc_chunk->doc_chunk",
        }
        announce("full-scale-results-caveat")

    @pytest.mark.skipif(
        "REFINELAB_SMOKE_ENDPOINT" not in os.environ,
        reason="set REFINELAB_SMOKE_ENDPOINT (and optionally "
        "REFINELAB_SMOKE_MODEL) to run the live smoke profile",
    )
    def test_smoke_profile_live_endpoint(self, tmp_path):
        config = {
            "corpus": {"path": str(FIXTURE_CORPUS), "pair": "en-de"},
            "grid": [
                {"g_mt": "doc_chunk", "g_refine": "segment", "strategy": "general"}
            ],
            "steps": 1,
            "translator": {
                "kind": "http",
                "endpoint": os.environ["REFINELAB_SMOKE_ENDPOINT"],
                "model": os.environ.get("REFINELAB_SMOKE_MODEL", "default"),
            },
        }
        experiment = run_experiment(config, tmp_path / "smoke")
        # structural postconditions only: no quality assertions
        assert (tmp_path / "smoke" / "manifest.json").exists()
        cell = next(iter(experiment.runs.values()))
        for doc_run in cell.doc_runs.values():
            assert len(doc_run.steps) == 2
            for step in doc_run.steps:
                assert step.merged_text.strip()
        announce("smoke-profile")
