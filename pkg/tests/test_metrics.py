import io
import json

import numpy as np
import pytest

from cycauc.data import Example
from cycauc.metrics import NumericError, RoundRecorder, auc, evaluate
from cycauc.models import LinearModel, linear_model

from oracles import brute_force_auc


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8], [0.1, 0.2]) == 1.0

    def test_single_tie_half_credit(self):
        assert auc([0.5], [0.5]) == 0.5

    def test_two_pair_hand_count(self):
        assert auc([0.3, 0.9], [0.5]) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            auc([], [0.1])

    def test_matches_brute_force_with_ties(self):
        gen = np.random.default_rng(0)
        for trial in range(200):
            n_pos = int(gen.integers(1, 201))
            n_neg = int(gen.integers(1, 201))
            if trial % 2 == 0:
                # Coarse grid forces plenty of ties.
                pos = gen.integers(0, 6, size=n_pos).astype(float)
                neg = gen.integers(0, 6, size=n_neg).astype(float)
            else:
                pos = gen.normal(size=n_pos)
                neg = gen.normal(size=n_neg)
            assert abs(auc(pos, neg) - brute_force_auc(pos, neg)) <= 1e-12

    def test_complement_identity(self):
        gen = np.random.default_rng(1)
        for _ in range(20):
            pos = gen.normal(size=31)
            neg = gen.normal(size=17)
            assert auc(pos, neg) + auc(neg, pos) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_transform_invariance(self):
        gen = np.random.default_rng(2)
        for _ in range(50):
            pos = gen.normal(size=25)
            neg = gen.normal(size=40)
            base = auc(pos, neg)
            for scale, shift in ((2.0, 1.0), (0.1, -3.0), (1e3, 0.0)):
                assert auc(scale * pos + shift, scale * neg + shift) == base


class TestEvaluate:
    def _split(self, gen, n=20, dim=3):
        pos = [Example(gen.normal(size=dim) + 1.0, 1) for _ in range(n)]
        neg = [Example(gen.normal(size=dim) - 1.0, -1) for _ in range(n)]
        return pos, neg

    def test_constant_model_is_chance(self):
        gen = np.random.default_rng(3)
        pos, neg = self._split(gen)
        assert evaluate(linear_model(3), pos, neg) == 0.5

    def test_separating_model(self):
        gen = np.random.default_rng(4)
        pos, neg = self._split(gen, n=50)
        model = linear_model(3, weights=[1.0, 1.0, 1.0])
        assert evaluate(model, pos, neg) > 0.8

    def test_affine_score_invariance(self):
        gen = np.random.default_rng(5)
        pos, neg = self._split(gen)
        w = gen.normal(size=3)
        base = evaluate(LinearModel(np.append(w, 0.0), 3), pos, neg)
        scaled = evaluate(LinearModel(np.append(3.0 * w, 0.7), 3), pos, neg)
        assert scaled == base


class TestRoundRecorder:
    def _recorder(self, cadence=1, sink=None, objective_fn=None):
        gen = np.random.default_rng(6)
        pos = [Example(gen.normal(size=2) + 1, 1) for _ in range(5)]
        neg = [Example(gen.normal(size=2) - 1, -1) for _ in range(5)]
        return RoundRecorder(pos, neg, objective_fn=objective_fn, cadence=cadence, sink=sink)

    def test_cadence_filters_rows(self):
        rec = self._recorder(cadence=3)
        model = linear_model(2, weights=[1.0, 0.0])
        for _ in range(9):
            rec.on_round(1, 1, 0, 0.1, 4, model)
        assert [r.round_index for r in rec.rows] == [3, 6, 9]
        assert rec.total_local_steps == 36

    def test_final_flag_forces_emission(self):
        rec = self._recorder(cadence=100)
        model = linear_model(2)
        rec.on_round(1, 1, 0, 0.1, 4, model, final=True)
        assert len(rec.rows) == 1

    def test_jsonl_line_excludes_wall_clock(self):
        sink = io.StringIO()
        rec = self._recorder(sink=sink)
        rec.on_round(1, 2, 3, 0.05, 8, linear_model(2))
        row = json.loads(sink.getvalue())
        assert set(row) == {"round", "stage", "epoch", "group", "eta",
                            "local_steps", "objective", "auc"}

    def test_non_finite_params_raise(self):
        rec = self._recorder()
        bad = LinearModel(np.array([np.inf, 0.0, 0.0]), 2)
        with pytest.raises(NumericError):
            rec.on_round(1, 1, 0, 0.1, 1, bad)

    def test_non_finite_objective_raises(self):
        rec = self._recorder(objective_fn=lambda m, s: float("nan"))
        with pytest.raises(NumericError):
            rec.on_round(1, 1, 0, 0.1, 1, linear_model(2))

    def test_client_steps_accumulate(self):
        rec = self._recorder()
        model = linear_model(2)
        rec.on_round(1, 1, 0, 0.1, 8, model, client_steps=16)
        rec.on_round(1, 1, 1, 0.1, 8, model, client_steps=16)
        assert rec.total_local_steps == 32
        assert rec.rows[-1].local_steps == 8
