import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ap_by_threshold_sweep, pooled_map_by_sweep
from pvad_lab.evaluation import (
    SimilarityStudy,
    average_precision,
    metrics_from_scores,
    pooled_average_precision,
    precision_recall_rows,
)


class TestAveragePrecision:
    def test_worked_example(self):
        assert average_precision([0.9, 0.8, 0.4], [1, 0, 1]) == pytest.approx(5.0 / 6.0, abs=1e-15)

    def test_perfect_ranking(self):
        assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_equal_scores_follow_stable_tie_rule(self):
        scores = [0.5] * 6
        labels = [0, 1, 0, 1, 0, 0]
        got = average_precision(scores, labels)
        assert got == pytest.approx(ap_by_threshold_sweep(scores, labels), abs=1e-15)

    def test_no_positives_rejected(self):
        with pytest.raises(ValueError, match="AP undefined"):
            average_precision([0.3, 0.2], [0, 0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            average_precision([0.3], [0, 1])

    def test_200_random_instances_match_oracle_exactly(self):
        rng = np.random.default_rng(0)
        for trial in range(200):
            n = int(rng.integers(2, 201))
            scores = rng.choice([0.1, 0.25, 0.5, 0.75, 0.9], size=n)  # force ties
            labels = rng.integers(0, 2, size=n)
            if labels.sum() == 0:
                labels[int(rng.integers(n))] = 1
            got = average_precision(scores, labels)
            want = ap_by_threshold_sweep(scores, labels)
            assert abs(got - want) < 1e-12, f"trial {trial}"

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 60))
        scores = rng.normal(size=n)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[0] = 1
        base = average_precision(scores, labels)
        assert average_precision(3.0 * scores + 1.0, labels) == pytest.approx(base, abs=1e-12)
        assert average_precision(np.tanh(scores), labels) == pytest.approx(base, abs=1e-9)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_bounded_by_prevalence_and_one(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 120))
        scores = rng.choice([0.2, 0.5, 0.8], size=n)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[int(rng.integers(n))] = 1
        ap = average_precision(scores, labels)
        prevalence = labels.sum() / n
        assert prevalence - 1e-12 <= ap <= 1.0 + 1e-12


class TestPooledMap:
    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(1)
        for trial in range(100):
            n = int(rng.integers(2, 201))
            p1 = rng.uniform(0.0, 1.0, size=n)
            post = np.stack([1.0 - p1, p1], axis=1)
            labels = rng.integers(0, 2, size=n)
            got = pooled_average_precision(post, labels)
            want = pooled_map_by_sweep(post, labels)
            assert abs(got - want) < 1e-12, f"trial {trial}"

    def test_perfect_model_scores_one(self):
        labels = np.array([0, 1, 1, 0, 1])
        post = np.eye(2)[labels]
        m = metrics_from_scores(post, labels)
        assert m["ap_ns_nts"] == 1.0
        assert m["ap_ts"] == 1.0
        assert m["map"] == 1.0
        assert m["n_frames"] == 5

    def test_constant_model_equals_tie_rule_oracle(self):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 2, size=50)
        post = np.full((50, 2), 0.5)
        got = pooled_average_precision(post, labels)
        want = pooled_map_by_sweep(post, labels)
        assert got == pytest.approx(want, abs=1e-15)

    def test_metrics_keys_mirror_table_columns(self):
        labels = np.array([0, 1])
        post = np.array([[0.8, 0.2], [0.3, 0.7]])
        assert set(metrics_from_scores(post, labels)) == {
            "ap_ns_nts", "ap_ts", "map", "n_frames",
        }


class TestPrecisionRecall:
    def test_monotone_recall(self):
        rng = np.random.default_rng(3)
        scores = rng.uniform(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[0] = 1
        rows = precision_recall_rows(scores, labels)
        recalls = [r for _, _, r in rows]
        assert recalls == sorted(recalls)
        assert recalls[-1] == pytest.approx(1.0)


class TestSimilarityHistogram:
    def test_bins_cover_minus_one_to_one(self):
        study = SimilarityStudy(panels={("b", "same_utterance"): np.array([1.0, 1.0])})
        rows = study.histogram_rows()
        assert len(rows) == 40
        lefts = [r[2] for r in rows]
        assert lefts[0] == pytest.approx(-1.0)
        assert lefts[-1] == pytest.approx(0.95)
        total = sum(r[3] for r in rows)
        assert total == 2
        # the mass sits in the bin containing 1.0 (the last bin)
        assert rows[-1][3] == 2
