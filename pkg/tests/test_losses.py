import numpy as np
import pytest

from cycauc.data import ClientDataset, Example
from cycauc.losses import (
    BarrierHingeLoss,
    LogisticLoss,
    MinimaxGrad,
    ProxTerm,
    QNormHingeLoss,
    SigmoidLoss,
    SquareLoss,
    SquaredHingeLoss,
    add_prox_grad,
    make_pairwise_loss,
    minimax_objective,
    minimax_stoch_grad,
    minimax_value,
    optimal_dual,
    pairwise_objective,
    psi_grad,
    psi_value,
)
from cycauc.models import LinearModel, init_mlp, linear_model
from cycauc.rng import RngStream

from oracles import brute_force_auc, central_diff, central_diff_vec, rel_max_err


def _example(x, label):
    return Example(np.asarray(x, dtype=float), label)


class TestMinimaxValue:
    def test_positive_hand_value(self):
        model = linear_model(1, weights=[1.0])
        z = _example([0.6], 1)
        assert minimax_value(model, 0.5, 0.0, 0.0, z, 0.5) == pytest.approx(-0.595)

    def test_negative_hand_value(self):
        model = linear_model(1, weights=[1.0])
        z = _example([0.2], -1)
        assert minimax_value(model, 0.0, 0.1, 1.0, z, 0.5) == pytest.approx(0.155)

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_matched_score_saturated_dual(self, p):
        # h == a and alpha == -1 leaves only the -p(1-p)alpha^2 term.
        model = linear_model(1, weights=[1.0])
        z = _example([0.3], 1)
        assert minimax_value(model, 0.3, 0.0, -1.0, z, p) == pytest.approx(-p * (1 - p))

    def test_rejects_bad_prior(self):
        model = linear_model(1)
        with pytest.raises(ValueError):
            minimax_value(model, 0, 0, 0, _example([1.0], 1), 0.0)


class TestMinimaxStochGrad:
    def test_positive_hand_partials(self):
        model = linear_model(1, weights=[1.0])
        z = _example([0.6], 1)
        g = minimax_stoch_grad(model, 0.5, 0.0, 0.0, z, 0.5)
        np.testing.assert_allclose(g.g_w, -0.9 * np.array([0.6, 1.0]))
        assert g.g_a == pytest.approx(-0.1)
        assert g.g_b == 0.0
        assert g.g_alpha == pytest.approx(-0.6)

    def test_negative_hand_partials(self):
        model = linear_model(1, weights=[1.0])
        z = _example([0.2], -1)
        g = minimax_stoch_grad(model, 0.0, 0.1, 1.0, z, 0.5)
        np.testing.assert_allclose(g.g_w, 2.1 * np.array([0.2, 1.0]))
        assert g.g_b == pytest.approx(-0.1)
        assert g.g_a == 0.0
        assert g.g_alpha == pytest.approx(-0.3)

    def test_zero_residual_and_saturated_dual(self):
        model = linear_model(1, weights=[1.0])
        z = _example([0.4], 1)
        g = minimax_stoch_grad(model, 0.4, 0.0, -1.0, z, 0.3)
        np.testing.assert_array_equal(g.g_w, 0.0)
        assert g.g_a == 0.0

    @pytest.mark.parametrize("variant", ["linear", "mlp"])
    def test_matches_finite_differences_of_value(self, variant):
        gen = np.random.default_rng(10)
        worst = 0.0
        for trial in range(100):
            if variant == "linear":
                model = LinearModel(gen.normal(size=5), 4)
            else:
                model = init_mlp(3, 4, RngStream(trial))
            z = _example(gen.normal(size=model.input_dim), 1 if gen.random() < 0.5 else -1)
            a, b, alpha = gen.normal(size=3)
            p = float(gen.uniform(0.05, 0.95))
            g = minimax_stoch_grad(model, a, b, alpha, z, p)

            fd_w = central_diff_vec(
                lambda v: minimax_value(model.with_params(v), a, b, alpha, z, p),
                model.params,
            )
            worst = max(worst, rel_max_err(g.g_w, fd_w))
            fd_a = central_diff(lambda t: minimax_value(model, t, b, alpha, z, p), a)
            fd_b = central_diff(lambda t: minimax_value(model, a, t, alpha, z, p), b)
            fd_alpha = central_diff(lambda t: minimax_value(model, a, b, t, z, p), alpha)
            worst = max(worst, rel_max_err(g.g_a, fd_a))
            worst = max(worst, rel_max_err(g.g_b, fd_b))
            worst = max(worst, rel_max_err(g.g_alpha, fd_alpha))
        assert worst <= 1e-5


class TestProx:
    def _grad(self, n):
        return MinimaxGrad(np.zeros(n), 0.0, 0.0, 0.0)

    def test_zero_gamma_noop(self):
        model = linear_model(2, weights=[1.0, 2.0])
        prox = ProxTerm(0.0, np.zeros(3), 0.0, 0.0)
        g = add_prox_grad(self._grad(3), model, 5.0, -5.0, prox)
        np.testing.assert_array_equal(g.g_w, 0.0)
        assert g.g_a == 0.0 and g.g_b == 0.0

    def test_at_anchor_noop(self):
        model = linear_model(2, weights=[1.0, 2.0])
        prox = ProxTerm(3.0, model.params.copy(), 0.5, -0.5)
        g = add_prox_grad(self._grad(3), model, 0.5, -0.5, prox)
        np.testing.assert_array_equal(g.g_w, 0.0)
        assert g.g_a == 0.0 and g.g_b == 0.0

    def test_pull_is_gamma_times_offset(self):
        model = linear_model(1, weights=[1.0], bias=0.5)
        anchor = model.params - 0.5
        prox = ProxTerm(2.0, anchor, 0.0, 0.0)
        g = add_prox_grad(self._grad(2), model, 0.25, -0.25, prox)
        np.testing.assert_allclose(g.g_w, [1.0, 1.0])
        assert g.g_a == pytest.approx(0.5)
        assert g.g_b == pytest.approx(-0.5)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            ProxTerm(-1.0, np.zeros(2), 0.0, 0.0)


class TestOptimalDual:
    def test_single_scores(self):
        assert optimal_dual([0.8], [0.3]) == (0.8, 0.3, pytest.approx(-0.5))

    def test_symmetric(self):
        a, b, alpha = optimal_dual([0.7], [0.7])
        assert (a, b, alpha) == (0.7, 0.7, 0.0)

    def test_means(self):
        a, b, alpha = optimal_dual([1.0, 0.0], [0.5, 0.5])
        assert (a, b, alpha) == (0.5, 0.5, 0.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            optimal_dual([], [0.1])


def _scores(model, examples):
    return np.array([model.score(e.features) for e in examples])


def _federation(gen, n_clients, n_pos, n_neg, dim):
    clients = [ClientDataset(i) for i in range(n_clients)]
    for i in range(n_pos):
        clients[i % n_clients].pos.append(_example(gen.normal(size=dim), 1))
    for i in range(n_neg):
        clients[i % n_clients].neg.append(_example(gen.normal(size=dim), -1))
    return clients


class TestMinimaxObjective:
    def test_hand_value_at_dual_optimum(self):
        model = linear_model(1, weights=[1.0])
        clients = [ClientDataset(0, [_example([0.8], 1)], [_example([0.3], -1)])]
        a, b, alpha = optimal_dual([0.8], [0.3])
        assert minimax_objective(model, clients, a, b, alpha, 0.5) == pytest.approx(-0.1875)

    def test_concave_quadratic_in_alpha(self):
        gen = np.random.default_rng(11)
        clients = _federation(gen, 2, 5, 7, 3)
        model = LinearModel(gen.normal(size=4), 3)
        p = 5 / 12
        f = lambda alpha: minimax_objective(model, clients, 0.1, -0.1, alpha, p)
        # Second difference recovers the curvature -2p(1-p) exactly.
        h = 0.5
        curvature = (f(1.0 + h) - 2 * f(1.0) + f(1.0 - h)) / h**2
        assert curvature == pytest.approx(-2 * p * (1 - p), rel=1e-9)

    @pytest.mark.parametrize("variant", ["linear", "mlp"])
    def test_equals_pairwise_square_oracle(self, variant):
        # Brute-force pairwise oracle: f at the closed-form dual equals
        # p(1-p) * (mean over pos x neg pairs of (1 - h+ + h-)^2 - 1).
        gen = np.random.default_rng(12)
        for trial in range(50):
            n_pos = int(gen.integers(1, 25))
            n_neg = int(gen.integers(1, 50 - n_pos + 1))
            clients = _federation(gen, int(gen.integers(1, 4)), n_pos, n_neg, 3)
            if variant == "linear":
                model = LinearModel(gen.normal(size=4), 3)
            else:
                model = init_mlp(3, 4, RngStream(trial))
            pos = [e for c in clients for e in c.pos]
            neg = [e for c in clients for e in c.neg]
            hp, hn = _scores(model, pos), _scores(model, neg)
            a, b, alpha = optimal_dual(hp, hn)
            p = n_pos / (n_pos + n_neg)
            lhs = minimax_objective(model, clients, a, b, alpha, p)
            pair_mean = float(np.mean((1.0 - hp[:, None] + hn[None, :]) ** 2))
            assert abs(lhs - p * (1 - p) * (pair_mean - 1.0)) <= 1e-10

    def test_dual_stationarity(self):
        # Full-batch gradient in (a, b, alpha) vanishes at the closed form.
        gen = np.random.default_rng(13)
        clients = _federation(gen, 3, 8, 12, 2)
        model = LinearModel(gen.normal(size=3), 2)
        pos = [e for c in clients for e in c.pos]
        neg = [e for c in clients for e in c.neg]
        a, b, alpha = optimal_dual(_scores(model, pos), _scores(model, neg))
        p = 0.4
        sums = np.zeros(3)
        for z in pos + neg:
            g = minimax_stoch_grad(model, a, b, alpha, z, p)
            sums += [g.g_a, g.g_b, g.g_alpha]
        np.testing.assert_array_less(np.abs(sums / len(pos + neg)), 1e-12)


class TestPsiFamily:
    def test_sigmoid_midpoint(self):
        assert psi_value(SigmoidLoss(1.0), 0.4, 0.4) == pytest.approx(0.5)

    def test_square_zero_at_margin(self):
        assert psi_value(SquareLoss(1.0), 1.2, 0.2) == pytest.approx(0.0)

    def test_barrier_hand_value(self):
        assert psi_value(BarrierHingeLoss(1.0, 1.0), 0.5, 0.5) == pytest.approx(1.0)

    def test_sigmoid_grad_midpoint(self):
        g1, g2 = psi_grad(SigmoidLoss(1.0), 0.0, 0.0)
        assert g1 == pytest.approx(-0.25)
        assert g2 == pytest.approx(0.25)

    def test_squared_hinge_inactive(self):
        assert psi_grad(SquaredHingeLoss(1.0), 2.5, 0.5) == (0.0, 0.0)

    def test_logistic_grad_at_zero(self):
        g1, _ = psi_grad(LogisticLoss(1.0), 0.3, 0.3)
        assert g1 == pytest.approx(-0.5)

    def test_qnorm_clamps_at_zero(self):
        loss = QNormHingeLoss(1.0, 3.0)
        assert psi_value(loss, 5.0, 0.0) == 0.0
        assert psi_grad(loss, 5.0, 0.0) == (0.0, 0.0)

    def test_hyperparameter_validation(self):
        with pytest.raises(ValueError):
            SigmoidLoss(0.0)
        with pytest.raises(ValueError):
            LogisticLoss(-1.0)
        with pytest.raises(ValueError):
            QNormHingeLoss(1.0, 1.0)

    def test_factory(self):
        assert isinstance(make_pairwise_loss("sigmoid", lam=0.1), SigmoidLoss)
        with pytest.raises(ValueError):
            make_pairwise_loss("absolute")

    def _family(self):
        return [
            SquareLoss(0.7),
            SquaredHingeLoss(1.3),
            LogisticLoss(2.0),
            SigmoidLoss(0.5),
            BarrierHingeLoss(1.0, 0.8),
            QNormHingeLoss(1.0, 2.5),
        ]

    def test_antisymmetry_everywhere(self):
        gen = np.random.default_rng(14)
        for loss in self._family():
            for _ in range(50):
                a, b = gen.normal(size=2)
                g1, g2 = psi_grad(loss, a, b)
                assert g2 == -g1

    def test_grads_match_finite_differences(self):
        gen = np.random.default_rng(15)
        worst = 0.0
        for loss in self._family():
            for _ in range(100):
                a, b = gen.normal(size=2) * 2.0
                t = a - b
                if isinstance(loss, (SquaredHingeLoss, QNormHingeLoss, BarrierHingeLoss)):
                    # Stay away from the hinge kinks where phi is nonsmooth.
                    kinks = [loss.m, -loss.m] if isinstance(loss, BarrierHingeLoss) else [loss.m]
                    if min(abs(t - k) for k in kinks) < 1e-4:
                        continue
                g1, _ = psi_grad(loss, a, b)
                fd = central_diff(lambda u: psi_value(loss, u, b), a)
                worst = max(worst, rel_max_err(np.array([g1]), np.array([fd])))
        assert worst <= 1e-5

    def test_barrier_left_limit_at_kinks(self):
        loss = BarrierHingeLoss(1.0, 1.0)
        # Just below t=1 the slope is -1; the kink keeps the left value.
        assert float(loss.dphi(np.float64(1.0))) == -1.0

    def test_sigmoid_sharp_limit_is_one_minus_auc(self):
        gen = np.random.default_rng(16)
        for _ in range(10):
            hp = gen.normal(size=8)
            hn = gen.normal(size=9)
            loss = SigmoidLoss(1e-4)
            value = float(loss.phi(hp[:, None] - hn[None, :]).mean())
            assert abs(value - (1.0 - brute_force_auc(hp, hn))) <= 1e-3


class TestPairwiseObjective:
    def test_all_equal_scores_sigmoid(self):
        model = linear_model(2)  # zero weights: constant score
        pos = [_example([1.0, 2.0], 1)]
        neg = [_example([3.0, 4.0], -1), _example([5.0, 6.0], -1)]
        assert pairwise_objective(model, pos, neg, SigmoidLoss(1.0)) == pytest.approx(0.5)

    def test_single_pair_equals_psi(self):
        model = linear_model(1, weights=[1.0])
        pos, neg = [_example([0.2], 1)], [_example([0.5], -1)]
        loss = SquareLoss(1.0)
        assert pairwise_objective(model, pos, neg, loss) == pytest.approx(
            psi_value(loss, 0.2, 0.5)
        )

    def test_square_hand_value(self):
        model = linear_model(1, weights=[1.0])
        pos, neg = [_example([0.2], 1)], [_example([0.5], -1)]
        assert pairwise_objective(model, pos, neg, SquareLoss(1.0)) == pytest.approx(1.69)

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError):
            pairwise_objective(linear_model(1), [], [_example([0.0], -1)], SquareLoss())
