import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimcheck.textmetrics import (
    agreement,
    bleu,
    cosine,
    lcs_length,
    meteor_lite,
    rouge_l,
    score_pair,
    summarize,
    tokenize,
)

tokens = st.lists(st.sampled_from(["a", "b", "c"]), max_size=8)


class TestCosine:
    def test_identity(self):
        assert cosine([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_hand_value(self):
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1 / math.sqrt(2))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1.0], [1.0, 2.0])

    def test_scale_invariance(self):
        import random
        rng = random.Random(42)
        for _ in range(50):
            u = [rng.uniform(-5, 5) for _ in range(6)]
            v = [rng.uniform(-5, 5) for _ in range(6)]
            if not any(u) or not any(v):
                continue
            base = cosine(u, v)
            for alpha in (0.5, 2.0, 10.0):
                scaled = cosine([alpha * x for x in u], v)
                assert abs(scaled - base) < 1e-12


class TestRougeL:
    def test_identity(self):
        assert rouge_l(["x", "y"], ["x", "y"])["f1"] == 1.0

    def test_hand_example(self):
        scores = rouge_l(["a", "b", "c"], ["a", "c"])
        assert scores["precision"] == pytest.approx(2 / 3)
        assert scores["recall"] == pytest.approx(1.0)
        assert scores["f1"] == pytest.approx(0.8)

    def test_disjoint(self):
        assert rouge_l(["a"], ["b"])["f1"] == 0.0

    def test_both_empty(self):
        assert rouge_l([], []) == {"precision": 1.0, "recall": 1.0, "f1": 1.0}

    def test_one_empty(self):
        assert rouge_l([], ["a"]) == {"precision": 0.0, "recall": 0.0, "f1": 0.0}

    def test_corruption_strictly_decreases_f1(self):
        reference = ["a", "b", "c", "a", "b"]
        perfect = rouge_l(reference, reference)["f1"]
        corrupted = list(reference)
        corrupted[2] = "z"
        assert rouge_l(corrupted, reference)["f1"] < perfect


class TestBleu:
    def test_identity(self):
        assert bleu(["a", "b", "c"], [["a", "b", "c"]]) == pytest.approx(1.0)

    def test_brevity_penalty_hand_example(self):
        # candidate "a b" vs reference "a b c d": precisions 1, BP = e^-1
        assert bleu(["a", "b"], [["a", "b", "c", "d"]]) == pytest.approx(math.exp(-1))

    def test_disjoint_smoothed_floor(self):
        # add-1 smoothing keeps the score positive but it shrinks with length
        short = bleu(["a", "a"], [["b", "b"]])
        long = bleu(["a"] * 8, [["b"] * 8])
        assert 0.0 < long < short < 0.5
        assert long < 0.2

    def test_empty_candidate(self):
        assert bleu([], [["a"]]) == 0.0

    def test_multiple_references_clip(self):
        score = bleu(["a", "a"], [["a"], ["a", "a"]])
        assert score == pytest.approx(1.0)


class TestMeteorLite:
    def test_identity_scores_one(self):
        assert meteor_lite(["x", "y", "z"], ["x", "y", "z"]) == 1.0
        assert meteor_lite(["x"], ["x"]) == 1.0

    def test_disjoint(self):
        assert meteor_lite(["a"], ["b"]) == 0.0

    def test_fragmentation_penalty(self):
        # same multiset, crossed order: m=2, chunks=2, P=R=1 -> 1 - 0.5 = 0.5
        assert meteor_lite(["a", "b"], ["b", "a"]) == pytest.approx(0.5)

    def test_partial_match(self):
        # cand "a b x", ref "a b y": m=2, P=2/3, R=2/3, one chunk
        p = r = 2 / 3
        f = 10 * p * r / (r + 9 * p)
        expected = f * (1 - 0.5 * (1 / 2) ** 3)
        assert meteor_lite(["a", "b", "x"], ["a", "b", "y"]) == pytest.approx(expected)

    @given(tokens, tokens)
    @settings(max_examples=200)
    def test_bounded(self, cand, ref):
        assert 0.0 <= meteor_lite(cand, ref) <= 1.0


class TestAgreement:
    def test_identity(self):
        labels = ["marketing", "organizational", "rejected"]
        assert agreement(labels, labels).agreement_rate == 1.0

    def test_seven_of_ten(self):
        a = ["marketing"] * 10
        b = ["marketing"] * 7 + ["organizational"] * 3
        assert agreement(a, b).agreement_rate == pytest.approx(0.70)

    def test_acceptance_rates(self):
        a = ["rejected", "rejected"]
        b = ["marketing", "rejected"]
        result = agreement(a, b)
        assert result.acceptance_rate_a == 0.0
        assert result.acceptance_rate_b == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            agreement(["marketing"], [])

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            agreement(["chaotic"], ["marketing"])


class TestSmallExhaustiveOracle:
    """Exhaustive cross-check on short sequences; the acceptance suite
    runs the full length-6 sweep."""

    def brute_force_lcs(self, a, b):
        best = 0
        for mask in range(1 << len(a)):
            sub = [a[i] for i in range(len(a)) if mask >> i & 1]
            it = iter(b)
            if all(tok in it for tok in sub):
                best = max(best, len(sub))
        return best

    def test_lcs_matches_brute_force(self):
        seqs = [list(p) for length in range(4)
                for p in itertools.product("ab", repeat=length)]
        for a in seqs:
            for b in seqs:
                assert lcs_length(a, b) == self.brute_force_lcs(a, b)

    @given(tokens, tokens)
    @settings(max_examples=150)
    def test_scores_bounded(self, cand, ref):
        assert 0.0 <= rouge_l(cand, ref)["f1"] <= 1.0
        assert 0.0 <= bleu(cand, [ref]) <= 1.0


class TestBatchScoring:
    def test_score_pair_with_vectors(self):
        scores = score_pair("p1", "the cat sat", "the cat sat",
                            [1.0, 0.0], [2.0, 0.0])
        assert scores.rouge_f1 == 1.0
        assert scores.bleu == pytest.approx(1.0)
        assert scores.cosine == pytest.approx(1.0)

    def test_summarize_mean_and_pooled(self):
        pairs_text = [("a b", "a b"), ("c", "d")]
        scores = [score_pair(str(i), c, r) for i, (c, r) in enumerate(pairs_text)]
        pairs = [(tokenize(c), tokenize(r)) for c, r in pairs_text]
        summary = summarize(scores, pairs)
        assert summary["mean"]["rouge_f1"] == pytest.approx(0.5)
        assert 0.0 <= summary["pooled"]["rouge_f1"] <= 1.0
        assert set(summary) == {"mean", "pooled"}

    def test_tokenize(self):
        assert tokenize("The  CAT sat") == ["the", "cat", "sat"]
        assert tokenize("The CAT", lowercase=False) == ["The", "CAT"]
