import numpy as np
import pytest

from cycauc.data import (
    ClientDataset,
    DataError,
    Example,
    FederationLayout,
    class_prior,
    dirichlet_partition,
    flip_labels,
    load_csv,
    make_synthetic,
)
from cycauc.rng import RngStream

from oracles import brute_force_auc


def _pool(gen, n_pos, n_neg, dim=3):
    return ([Example(gen.normal(size=dim), 1) for _ in range(n_pos)]
            + [Example(gen.normal(size=dim), -1) for _ in range(n_neg)])


class TestDirichletPartition:
    def test_single_client_gets_everything(self):
        examples = _pool(np.random.default_rng(0), 10, 15)
        clients = dirichlet_partition(examples, 1, 0.3, RngStream(0))
        assert len(clients) == 1
        assert len(clients[0].pos) == 10
        assert len(clients[0].neg) == 15

    def test_partition_property_counts(self):
        examples = _pool(np.random.default_rng(1), 37, 63)
        clients = dirichlet_partition(examples, 5, 0.5, RngStream(1))
        assert sum(len(c.pos) for c in clients) == 37
        assert sum(len(c.neg) for c in clients) == 63

    def test_partition_property_multiset(self):
        # The union of client pools is exactly the input multiset.
        examples = _pool(np.random.default_rng(2), 20, 20)
        clients = dirichlet_partition(examples, 4, 1.0, RngStream(2))
        seen = sorted(
            tuple(e.features) for c in clients for e in c.pos + c.neg
        )
        expected = sorted(tuple(e.features) for e in examples)
        assert seen == expected

    def test_rerun_identical(self):
        examples = _pool(np.random.default_rng(3), 50, 50)
        a = dirichlet_partition(examples, 4, 0.5, RngStream(42))
        b = dirichlet_partition(examples, 4, 0.5, RngStream(42))
        for ca, cb in zip(a, b):
            assert [tuple(e.features) for e in ca.pos] == [tuple(e.features) for e in cb.pos]
            assert [tuple(e.features) for e in ca.neg] == [tuple(e.features) for e in cb.neg]

    def test_low_concentration_more_skewed(self):
        # Chi-square of client counts vs uniform, medians over 20 seeds.
        examples = _pool(np.random.default_rng(4), 200, 200)

        def chi2(dir_value, seed):
            clients = dirichlet_partition(examples, 4, dir_value, RngStream(seed))
            counts = np.array([c.n_examples for c in clients], dtype=float)
            expected = counts.sum() / len(counts)
            return float(((counts - expected) ** 2 / expected).sum())

        skewed = np.median([chi2(0.5, s) for s in range(20)])
        uniform = np.median([chi2(100.0, s) for s in range(20)])
        assert skewed > uniform

    def test_rejects_bad_args(self):
        examples = _pool(np.random.default_rng(5), 2, 2)
        with pytest.raises(DataError):
            dirichlet_partition([], 2, 0.5, RngStream(0))
        with pytest.raises(DataError):
            dirichlet_partition(examples, 2, 0.0, RngStream(0))
        with pytest.raises(DataError):
            dirichlet_partition(examples, 0, 0.5, RngStream(0))


class TestFlipLabels:
    def _clients(self, n_pos=10, n_neg=10):
        examples = _pool(np.random.default_rng(6), n_pos, n_neg)
        return dirichlet_partition(examples, 3, 10.0, RngStream(9))

    def test_zero_ratio_identity(self):
        clients = self._clients()
        flipped = flip_labels(clients, 0.0, RngStream(0))
        for before, after in zip(clients, flipped):
            assert len(before.pos) == len(after.pos)
            assert len(before.neg) == len(after.neg)

    def test_full_flip_empties_pos(self):
        flipped = flip_labels(self._clients(), 1.0, RngStream(0))
        assert all(len(c.pos) == 0 for c in flipped)

    def test_exact_count_and_conservation(self):
        examples = _pool(np.random.default_rng(7), 100, 40)
        clients = dirichlet_partition(examples, 4, 1.0, RngStream(3))
        flipped = flip_labels(clients, 0.2, RngStream(4))
        assert sum(len(c.pos) for c in flipped) == 80
        assert sum(len(c.neg) for c in flipped) == 60
        assert sum(c.n_examples for c in flipped) == 140

    def test_moved_examples_stay_on_their_client(self):
        clients = self._clients(20, 5)
        flipped = flip_labels(clients, 0.5, RngStream(5))
        for before, after in zip(clients, flipped):
            assert before.n_examples == after.n_examples

    def test_flipped_examples_relabeled(self):
        flipped = flip_labels(self._clients(), 0.5, RngStream(6))
        for c in flipped:
            assert all(e.label == -1 for e in c.neg)

    def test_rejects_bad_ratio(self):
        with pytest.raises(DataError):
            flip_labels(self._clients(), 1.5, RngStream(0))


class TestMakeSynthetic:
    def test_zero_margin_symmetric(self):
        examples = make_synthetic(4000, 5, 0.5, 0.0, RngStream(0))
        pos = np.stack([e.features for e in examples if e.label == 1])
        neg = np.stack([e.features for e in examples if e.label == -1])
        # Same distribution: mean gap is noise-level, far below 1 sigma.
        assert np.linalg.norm(pos.mean(axis=0) - neg.mean(axis=0)) < 0.25

    def test_exact_positive_count(self):
        examples = make_synthetic(2000, 4, 0.01, 1.0, RngStream(1))
        assert sum(1 for e in examples if e.label == 1) == 20

    def test_oracle_scorer_separates_wide_margin(self):
        examples = make_synthetic(2000, 10, 0.3, 6.0, RngStream(2))
        pos = np.stack([e.features for e in examples if e.label == 1])
        neg = np.stack([e.features for e in examples if e.label == -1])
        w = pos.mean(axis=0) - neg.mean(axis=0)
        assert brute_force_auc(pos @ w, neg @ w) >= 0.99

    def test_rejects_degenerate(self):
        with pytest.raises(DataError):
            make_synthetic(1, 2, 0.5, 1.0, RngStream(0))
        with pytest.raises(DataError):
            make_synthetic(10, 2, 0.001, 1.0, RngStream(0))  # zero positives


class TestLoadCsv:
    def test_label_first_parse(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1,0.5,0.25\n")
        examples = load_csv(str(path))
        assert examples[0].label == 1
        assert np.array_equal(examples[0].features, [0.5, 0.25])

    def test_zero_and_minus_one_map_to_negative(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("0,1.0\n-1,2.0\n1,3.0\n")
        labels = [e.label for e in load_csv(str(path))]
        assert labels == [-1, -1, 1]

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError):
            load_csv(str(path))

    def test_dimension_error_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,1.0,2.0\n-1,3.0,4.0\n1,5.0,6.0,7.0\n")
        with pytest.raises(DataError, match=":3"):
            load_csv(str(path))

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,1.0\n-1,oops\n")
        with pytest.raises(DataError, match=":2"):
            load_csv(str(path))

    def test_unknown_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,1.0\n")
        with pytest.raises(DataError, match="label"):
            load_csv(str(path))

    def test_header_skip(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text("label,x\n1,0.5\n")
        assert len(load_csv(str(path), skip_header=True)) == 1


class TestClassPrior:
    def test_balanced(self):
        ds = [ClientDataset(0, [Example([0.0], 1)], [Example([0.0], -1)])]
        assert class_prior(ds).p == 0.5

    def test_rare_positives(self):
        gen = np.random.default_rng(8)
        ds = [ClientDataset(0, [Example(gen.normal(size=2), 1) for _ in range(20)],
                            [Example(gen.normal(size=2), -1) for _ in range(1980)])]
        assert class_prior(ds).p == pytest.approx(0.01)

    def test_single_class_errors(self):
        ds = [ClientDataset(0, [Example([0.0], 1)], [])]
        with pytest.raises(DataError):
            class_prior(ds)


class TestFederationLayout:
    def test_contiguous_default_assignment(self):
        layout = FederationLayout(8, 4, 2)
        assert layout.assignment == (0, 0, 1, 1, 2, 2, 3, 3)
        assert layout.group_members(2) == [4, 5]

    def test_rejects_small_groups(self):
        with pytest.raises(ValueError):
            FederationLayout(4, 2, 3)

    def test_custom_assignment_must_cover(self):
        with pytest.raises(ValueError):
            FederationLayout(4, 2, 1, assignment=(0, 0, 0, 0))


def test_example_rejects_bad_label():
    with pytest.raises(DataError):
        Example([1.0], 2)


def test_client_dataset_checks_pools():
    with pytest.raises(DataError):
        ClientDataset(0, pos=[Example([0.0], -1)])
