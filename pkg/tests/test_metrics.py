import pytest

from refinelab.metrics import BleuConfig, MetricError, d_bleu, length_ratio_guard

# Hand-counted fixture: hyp "a b c d e" vs ref "a b c d f", add-1 smoothing
# on orders >= 2:
#   p1 = 4/5, p2 = (3+1)/(4+1), p3 = (2+1)/(3+1), p4 = (1+1)/(2+1)
#   BLEU = 100 * (0.8 * 0.8 * 0.75 * 2/3) ** 0.25, BP = 1
HAND_BLEU = 100.0 * (0.8 * 0.8 * 0.75 * (2.0 / 3.0)) ** 0.25


class TestDBleu:
    def test_identity_is_hundred(self):
        text = "the quick brown fox jumps over the lazy dog"
        assert d_bleu(text, text) == pytest.approx(100.0)

    def test_identity_short_text(self):
        assert d_bleu("ab", "ab", BleuConfig(tokenization="char")) == pytest.approx(
            100.0
        )
        assert d_bleu("a", "a") == pytest.approx(100.0)

    def test_empty_hypothesis_zero(self):
        assert d_bleu("", "a b c") == 0.0

    def test_empty_reference_error(self):
        with pytest.raises(MetricError):
            d_bleu("a", "")

    def test_hand_counted_fixture(self):
        assert d_bleu("a b c d e", "a b c d f") == pytest.approx(
            HAND_BLEU, abs=1e-9
        )

    def test_no_smoothing_zero_precision(self):
        cfg = BleuConfig(smoothing="none")
        assert d_bleu("x y z w", "a b c d", cfg) == 0.0

    def test_brevity_penalty(self):
        import math

        # 2 hyp tokens vs 4 ref tokens, p1 = 1, higher orders smoothed.
        cfg = BleuConfig(max_n=1, smoothing="none")
        value = d_bleu("a b", "a b c d", cfg)
        assert value == pytest.approx(100.0 * math.exp(1 - 4 / 2))

    def test_shuffle_never_beats_identity(self):
        text = "one two three four five six seven eight"
        shuffled = "eight one three two five four seven six"
        assert d_bleu(shuffled, text) < 100.0

    def test_char_tokenization(self):
        assert d_bleu("你好世界", "你好世界", BleuConfig(tokenization="char")) == (
            pytest.approx(100.0)
        )


class TestLengthRatioGuard:
    def test_equal_counts_pass(self):
        ratio, flagged = length_ratio_guard("a b c", "x y z")
        assert ratio == 1.0
        assert not flagged

    def test_half_ratio_flagged(self):
        ratio, flagged = length_ratio_guard("a b c d", "x y")
        assert ratio == 0.5
        assert flagged

    def test_boundaries_inclusive_pass(self):
        ratio, flagged = length_ratio_guard("a b c d e", "v w x y z u")
        assert ratio == pytest.approx(1.2)
        assert not flagged
        ratio, flagged = length_ratio_guard("a b c d e", "w x y z")
        assert ratio == pytest.approx(0.8)
        assert not flagged

    def test_above_upper_bound_flagged(self):
        _, flagged = length_ratio_guard("a b", "u v w x y")
        assert flagged

    def test_empty_source_error(self):
        with pytest.raises(MetricError):
            length_ratio_guard("", "x")

    def test_uses_only_token_counts(self):
        ratio_a = length_ratio_guard("a b c", "completely different words")[0]
        ratio_b = length_ratio_guard("x y z", "some unrelated tokens")[0]
        assert ratio_a == ratio_b == 1.0
