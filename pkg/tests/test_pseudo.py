import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from spml_lab.errors import ConsistencyError, DomainError
from spml_lab.pseudo import (CooccurrenceTable, PseudoLabelSet,
                             assign_class_pseudo_labels, build_index,
                             class_pseudo_labels, ideal_pseudo_labels,
                             instance_pseudo_labels, knn, load_pseudo_labels,
                             save_pseudo_labels)


class TestIndex:
    def test_identical_rows_are_mutual_top_neighbors(self):
        feats = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        index = build_index(feats, "cosine")
        assert knn(index, 0, 1)[0] == 1
        assert knn(index, 1, 1)[0] == 0

    def test_orthogonal_similarity_zero(self):
        feats = np.array([[1.0, 0.0], [0.0, 1.0]])
        index = build_index(feats, "cosine")
        assert index.similarities(0)[1] == pytest.approx(0.0)

    def test_zero_norm_row_rejected(self):
        feats = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DomainError, match="row 1"):
            build_index(feats, "cosine")

    def test_zero_row_fine_in_euclidean(self):
        feats = np.array([[1.0, 0.0], [0.0, 0.0]])
        build_index(feats, "euclidean")

    def test_self_excluded(self, np_rng):
        feats = np_rng.normal(size=(10, 4))
        index = build_index(feats)
        for q in range(10):
            assert q not in knn(index, q, 5)

    def test_k_too_large(self):
        index = build_index(np.eye(3))
        with pytest.raises(DomainError):
            knn(index, 0, 3)

    def test_coincident_pair_is_nearest(self):
        feats = np.array([[2.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        index = build_index(feats, "euclidean")
        assert knn(index, 0, 1)[0] == 1

    @pytest.mark.parametrize("similarity", ["cosine", "euclidean"])
    @given(st.integers(0, 100_000))
    @settings(max_examples=20, deadline=None)
    def test_matches_exhaustive_oracle(self, similarity, seed):
        rng = np.random.default_rng(seed)
        feats = rng.normal(size=(30, 5))
        index = build_index(feats, similarity)
        k = int(rng.integers(1, 10))
        for q in range(0, 30, 7):
            got = knn(index, q, k).tolist()
            want = oracles.oracle_knn(feats, q, k, similarity)
            assert got == want

    def test_oracle_agreement_200_points(self):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(200, 8))
        index = build_index(feats, "cosine")
        for q in range(0, 200, 13):
            assert knn(index, q, 10).tolist() == \
                oracles.oracle_knn(feats, q, 10, "cosine")


class TestInstancePseudoLabels:
    def make_neighborhood_fixture(self):
        """16 points: a tight query cluster engineered so the query's 15
        neighbours carry labels {3: x8, 7: x4, 2: x2, 9: x1}."""
        rng = np.random.default_rng(5)
        base = rng.normal(size=4)
        base /= np.linalg.norm(base)
        feats = [base]
        labels = [3]
        neighbor_labels = [3] * 8 + [7] * 4 + [2] * 2 + [9]
        for j, lab in enumerate(neighbor_labels):
            feats.append(base + 1e-3 * rng.normal(size=4))
            labels.append(lab)
        return np.array(feats), np.array(labels)

    def test_worked_frequency_example(self):
        feats, labels = self.make_neighborhood_fixture()
        index = build_index(feats, "cosine")
        sets = instance_pseudo_labels(index, labels, k=15, tau=0.1)
        assert sets[0].labels == {7, 2}
        assert sets[0].frequencies[7] == pytest.approx(4 / 15)
        assert sets[0].frequencies[2] == pytest.approx(2 / 15)

    def test_all_neighbors_same_label_gives_empty_set(self):
        feats = np.random.default_rng(1).normal(size=(6, 3))
        labels = np.full(6, 2)
        index = build_index(feats)
        sets = instance_pseudo_labels(index, labels, k=5, tau=0.1)
        assert all(s.labels == set() for s in sets)

    def test_high_tau_keeps_only_dominant_foreign_label(self):
        feats = np.random.default_rng(2).normal(size=(6, 3))
        labels = np.array([0, 1, 1, 1, 1, 1])
        index = build_index(feats)
        sets = instance_pseudo_labels(index, labels, k=5, tau=0.99)
        # instance 0's 5 neighbours all carry label 1: omega = 1 > 0.99
        assert sets[0].labels == {1}

    def test_tau_monotonicity(self, np_rng):
        feats = np_rng.normal(size=(40, 4))
        labels = np_rng.integers(0, 6, size=40)
        index = build_index(feats)
        low = instance_pseudo_labels(index, labels, k=10, tau=0.05)
        high = instance_pseudo_labels(index, labels, k=10, tau=0.3)
        for lo, hi in zip(low, high):
            assert hi.labels <= lo.labels

    def test_set_size_bound(self, np_rng):
        k, tau, c = 15, 0.1, 8
        feats = np_rng.normal(size=(50, 4))
        labels = np_rng.integers(0, c, size=50)
        index = build_index(feats)
        bound = min(k // (int(tau * k) + 1), c - 1)
        for ps in instance_pseudo_labels(index, labels, k, tau):
            assert len(ps.labels) <= bound

    def test_bad_tau(self, np_rng):
        feats = np_rng.normal(size=(5, 3))
        index = build_index(feats)
        with pytest.raises(DomainError):
            instance_pseudo_labels(index, np.zeros(5, dtype=int), 2, 1.0)

    @given(st.integers(0, 100_000))
    @settings(max_examples=50, deadline=None)
    def test_matches_from_scratch_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 25))
        c = int(rng.integers(2, 8))
        k = int(rng.integers(1, n))
        tau = float(rng.uniform(0, 0.9))
        feats = rng.normal(size=(n, 4))
        labels = rng.integers(0, c, size=n)
        index = build_index(feats, "cosine")
        got = [ps.labels
               for ps in instance_pseudo_labels(index, labels, k, tau)]
        want = oracles.oracle_instance_pseudo(feats, labels.tolist(), k, tau)
        assert got == want


class TestClassPseudoLabels:
    def test_always_cooccurring_pair(self):
        sets = [{0, 1}, {0, 1}, {0, 1, 2}]
        table = CooccurrenceTable.from_label_sets(sets, 3)
        per_class = class_pseudo_labels(table)
        assert 1 in per_class[0] and 0 in per_class[1]

    def test_diagonal_is_one(self):
        table = CooccurrenceTable.from_label_sets([{0}, {1, 2}], 3)
        assert np.allclose(np.diag(table.ratios), 1.0)

    def test_below_threshold_excluded(self):
        # class 1 joins class 0 in 2 of 5 occurrences: ratio 0.4 < 0.5
        sets = [{0, 1}, {0, 1}, {0}, {0}, {0}]
        table = CooccurrenceTable.from_label_sets(sets, 2)
        assert table.ratios[0, 1] == pytest.approx(0.4)
        assert class_pseudo_labels(table, 0.5)[0] == set()

    def test_hand_computed_four_class_table(self):
        sets = [{0, 1}, {0, 1}, {0, 2}, {1, 3}, {2, 3}, {3}]
        table = CooccurrenceTable.from_label_sets(sets, 4)
        per_class = class_pseudo_labels(table, 0.5)
        # class 0 occurs 3x, with 1 twice (2/3) and 2 once (1/3)
        assert per_class[0] == {1}
        # class 1 occurs 3x, with 0 twice (2/3) and 3 once (1/3)
        assert per_class[1] == {0}
        # class 2 occurs 2x, with 0 once (1/2) and 3 once (1/2)
        assert per_class[2] == {0, 3}
        assert per_class[3] == set()

    def test_assignment_drops_own_label(self):
        per_class = [{1}, {0}]
        sets = assign_class_pseudo_labels(per_class, [0, 1, 0])
        assert [s.labels for s in sets] == [{1}, {0}, {1}]
        assert all(s.single_label not in s.labels for s in sets)


class TestIdealPseudoLabels:
    def test_set_difference(self):
        sets = ideal_pseudo_labels([{4, 7}], [4])
        assert sets[0].labels == {7}

    def test_singleton(self):
        sets = ideal_pseudo_labels([{3}], [3])
        assert sets[0].labels == set()

    def test_inconsistent_label_rejected(self):
        with pytest.raises(ConsistencyError):
            ideal_pseudo_labels([{1, 2}], [0])


class TestSerialization:
    def test_jsonl_round_trip(self, tmp_path):
        sets = [
            PseudoLabelSet(0, 3, {1, 5}, {1: 0.4, 5: 0.2}),
            PseudoLabelSet(1, 2, set(), {}),
            PseudoLabelSet(2, 0, {4}),
        ]
        path = tmp_path / "pseudo.jsonl"
        save_pseudo_labels(sets, path)
        loaded = load_pseudo_labels(path)
        assert [s.labels for s in loaded] == [s.labels for s in sets]
        assert [s.single_label for s in loaded] == [3, 2, 0]
        assert loaded[0].frequencies == {1: 0.4, 5: 0.2}
        assert loaded[2].frequencies == {}
