"""Divergences, Lyapunov family, definiteness machinery, and batched frames."""

import numpy as np
import pytest

from reactivegames import (
    Definiteness,
    FieldKind,
    InfiniteDivergenceError,
    IntegratorConfig,
    JointState,
    MixedStrategy,
    ReactiveStrategy,
    classical_divergence,
    conditional_sum_divergence,
    default_probe_deltas,
    divergence_rate,
    exploitability,
    gda_divergence,
    gda_lyapunov_H,
    integrate,
    kl_divergence,
    log_odds_q,
    lyapunov_H,
    lyapunov_rate,
    mixed_payoff,
    reduce_for_zero_sum,
    trajectory_diagnostics,
    zero_sum_definiteness,
    zero_sum_vector,
)

from conftest import random_state

# Independently computed reference values (50-digit arithmetic, truncated).
KL_HALF_VS_055 = 0.005025167926750720591774428779273853
KL_PURE_VS_09 = 0.105360515657826301227500980839312798
COND_SUM_EXAMPLE = 0.310320244886598632116755433353169426
LOG_4 = 1.386294361119890618834464242916353136


class TestKlDivergence:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            p = rng.dirichlet(np.ones(4))
            assert kl_divergence(p, p) == 0.0

    def test_two_point_example(self):
        v = kl_divergence([0.5, 0.5], [0.55, 0.45])
        assert abs(v - KL_HALF_VS_055) < 1e-15

    def test_partial_support_example(self):
        v = kl_divergence([1.0, 0.0], [0.9, 0.1])
        assert abs(v - KL_PURE_VS_09) < 1e-15

    def test_zero_outside_support_contributes_nothing(self):
        assert kl_divergence([0.5, 0.5, 0.0], [0.25, 0.75, 0.0]) == pytest.approx(
            kl_divergence([0.5, 0.5], [0.25, 0.75])
        )

    def test_missing_mass_raises_typed_error(self):
        with pytest.raises(InfiniteDivergenceError):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_infinite_divergence_is_a_value_error(self):
        assert issubclass(InfiniteDivergenceError, ValueError)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([0.5, 0.5], [0.5, 0.25, 0.25])

    def test_nonnegative(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            p = rng.dirichlet(np.ones(3))
            q = rng.dirichlet(np.ones(3))
            assert kl_divergence(p, q) >= 0.0


class TestConditionalSumDivergence:
    def test_zero_at_equilibrium(self, mp_eq):
        X = np.repeat(mp_eq.x_star[:, None], 2, axis=1)
        assert conditional_sum_divergence(X, mp_eq.y_star, mp_eq) == 0.0

    def test_hand_example(self, mp_eq):
        X = np.array([[0.8, 0.3], [0.2, 0.7]])
        v = conditional_sum_divergence(X, np.array([0.5, 0.5]), mp_eq)
        assert abs(v - COND_SUM_EXAMPLE) < 1e-15

    def test_nonnegative(self, mp_eq):
        rng = np.random.default_rng(43)
        for _ in range(100):
            X, y = random_state(rng, 2, 2)
            assert conditional_sum_divergence(X, y, mp_eq) >= 0.0

    def test_equal_columns_relation_to_classical(self, mp_eq):
        # With all columns equal to x the conditional sum counts KL(x*||x)
        # once per column while the classical divergence counts it once.
        rng = np.random.default_rng(44)
        for _ in range(20):
            x = rng.dirichlet(np.ones(2))
            y = rng.dirichlet(np.ones(2))
            X = np.repeat(x[:, None], 2, axis=1)
            cond = conditional_sum_divergence(X, y, mp_eq)
            classical = classical_divergence(x, y, mp_eq)
            extra = (2 - 1) * kl_divergence(mp_eq.x_star, x)
            assert abs(cond - classical - extra) < 1e-13


class TestDivergenceRate:
    def test_zero_at_equilibrium_y(self, mp_game, mp_eq):
        rng = np.random.default_rng(45)
        X, _ = random_state(rng, 2, 2)
        assert divergence_rate(mp_game, X, mp_eq.y_star, mp_eq) == 0.0

    def test_mp_closed_form(self, mp_game, mp_eq):
        rng = np.random.default_rng(46)
        for _ in range(200):
            X, y = random_state(rng, 2, 2)
            expected = -4.0 * (y[0] - 0.5) ** 2 * (X[0, 0] - X[0, 1])
            assert abs(divergence_rate(mp_game, X, y, mp_eq) - expected) < 1e-12

    def test_equal_columns_rate_vanishes(self, mp_game, mp_eq):
        rng = np.random.default_rng(47)
        for _ in range(100):
            x = rng.dirichlet(np.ones(2))
            y = rng.dirichlet(np.ones(2))
            X = np.repeat(x[:, None], 2, axis=1)
            assert abs(divergence_rate(mp_game, X, y, mp_eq)) < 1e-14


class TestZeroSumVector:
    def test_accepts_valid(self):
        d = zero_sum_vector([1.0, -0.25, -0.75])
        assert d.sum() == 0.0

    def test_rejects_nonzero_sum(self):
        with pytest.raises(ValueError):
            zero_sum_vector([0.5, 0.25])

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            zero_sum_vector([0.0, 0.0])

    def test_rejects_scalar(self):
        with pytest.raises(ValueError):
            zero_sum_vector([1.0])


class TestLyapunovH:
    def test_mp_closed_form(self, mp_game):
        rng = np.random.default_rng(48)
        for _ in range(100):
            X, _ = random_state(rng, 2, 2)
            d = rng.uniform(-1.0, 1.0)
            delta = np.array([d, -d])
            q1, q2 = log_odds_q(X)
            expected = 2.0 * d * d * (q1 - q2)
            assert abs(lyapunov_H(mp_game, X, delta) - expected) < 1e-12

    def test_uniform_strategy_gives_zero(self, mp_game):
        delta = np.array([1.0, -1.0])
        assert lyapunov_H(mp_game, np.full((2, 2), 0.5), delta) == 0.0

    def test_even_in_delta(self, mp_game):
        rng = np.random.default_rng(49)
        X, _ = random_state(rng, 2, 2)
        delta = np.array([0.6, -0.6])
        assert lyapunov_H(mp_game, X, delta) == pytest.approx(
            lyapunov_H(mp_game, X, -delta), abs=1e-15
        )

    def test_zero_entry_raises(self, mp_game):
        X = np.array([[1.0, 0.5], [0.0, 0.5]])
        with pytest.raises(InfiniteDivergenceError):
            lyapunov_H(mp_game, X, np.array([1.0, -1.0]))

    def test_rejects_non_zero_sum_probe(self, mp_game):
        with pytest.raises(ValueError):
            lyapunov_H(mp_game, np.full((2, 2), 0.5), np.array([1.0, 1.0]))


class TestLyapunovRate:
    def test_zero_at_equilibrium_y(self, mp_game, mp_eq):
        assert lyapunov_rate(mp_game, mp_eq.y_star, np.array([1.0, -1.0]), mp_eq) == 0.0

    def test_mp_closed_form(self, mp_game, mp_eq):
        rng = np.random.default_rng(50)
        for _ in range(100):
            _, y = random_state(rng, 2, 2)
            d = rng.uniform(-1.0, 1.0)
            delta = np.array([d, -d])
            expected = 16.0 * d * d * (y[0] - 0.5) ** 2
            assert abs(lyapunov_rate(mp_game, y, delta, mp_eq) - expected) < 1e-12

    def test_nonnegative(self, interior_game, interior_eq):
        rng = np.random.default_rng(51)
        for _ in range(100):
            _, y = random_state(rng, 4, 4)
            for _, delta in default_probe_deltas(4):
                assert lyapunov_rate(interior_game, y, delta, interior_eq) >= 0.0

    def test_probe_identity_with_exploitability(self, mp_game, mp_eq,
                                                interior_game, interior_eq):
        rng = np.random.default_rng(52)
        for U, eq in ((mp_game, mp_eq), (interior_game, interior_eq)):
            for _ in range(50):
                x = rng.dirichlet(np.ones(U.rows))
                y = rng.dirichlet(np.ones(U.cols))
                lhs = lyapunov_rate(U, y, x - eq.x_star, eq)
                rhs = exploitability(U, x, y, eq)
                assert abs(lhs - rhs) < 1e-12


class TestExploitability:
    def test_zero_at_equilibrium(self, mp_game, mp_eq):
        X = np.repeat(mp_eq.x_star[:, None], 2, axis=1)
        assert exploitability(mp_game, X, mp_eq.y_star, mp_eq) == pytest.approx(
            0.0, abs=1e-15)

    def test_pure_strategies(self, mp_game, mp_eq):
        v = exploitability(mp_game, np.array([1.0, 0.0]), np.array([1.0, 0.0]), mp_eq)
        assert v == pytest.approx(1.0, abs=1e-12)

    def test_reactive_argument_uses_stationary_action(self, mp_game, mp_eq):
        rng = np.random.default_rng(53)
        X, y = random_state(rng, 2, 2)
        direct = exploitability(mp_game, X, y, mp_eq)
        via_mixed = exploitability(mp_game, X @ y, y, mp_eq)
        assert direct == pytest.approx(via_mixed, abs=1e-15)

    def test_matches_mixed_payoff_gap(self, mp_game, mp_eq):
        rng = np.random.default_rng(54)
        x = rng.dirichlet(np.ones(2))
        y = rng.dirichlet(np.ones(2))
        gap = mixed_payoff(mp_game, x, y) - mp_eq.value
        assert exploitability(mp_game, x, y, mp_eq) == pytest.approx(gap * gap)


class TestReduceForZeroSum:
    def test_mp_with_second_pivot(self, mp_game):
        reduced = reduce_for_zero_sum(mp_game, pivot_index=1)
        assert reduced.shape == (1, 1)
        assert reduced[0, 0] == 4.0

    def test_constant_matrix_reduces_to_zero(self):
        M = np.full((3, 3), 2.5)
        assert np.array_equal(reduce_for_zero_sum(M), np.zeros((2, 2)))

    def test_mp_gram_closed_form(self, mp_game):
        rng = np.random.default_rng(55)
        for _ in range(50):
            X, _ = random_state(rng, 2, 2)
            M = X.T @ mp_game.entries
            reduced = reduce_for_zero_sum(M, pivot_index=1)
            assert abs(reduced[0, 0] - 4.0 * (X[0, 0] - X[0, 1])) < 1e-12

    def test_reduction_preserves_the_quadratic_form(self):
        rng = np.random.default_rng(56)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            M = rng.normal(size=(n, n))
            k = int(rng.integers(0, n))
            reduced = reduce_for_zero_sum(M, pivot_index=k)
            d = rng.normal(size=n)
            d -= d.mean()
            dhat = np.delete(d, k)
            assert float(d @ M @ d) == pytest.approx(float(dhat @ reduced @ dhat),
                                                     abs=1e-10)

    def test_invalid_pivot(self):
        with pytest.raises(ValueError):
            reduce_for_zero_sum(np.eye(3), pivot_index=3)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            reduce_for_zero_sum(np.ones((2, 3)))


class TestZeroSumDefiniteness:
    def test_mp_matrix_positive_definite(self, mp_game):
        v = zero_sum_definiteness(mp_game)
        assert v.verdict is Definiteness.POSITIVE_DEFINITE
        assert v.reduced.shape == (1, 1) and v.reduced[0, 0] == 4.0

    def test_mp_gram_sign_tracks_x1_minus_x2(self, mp_game):
        X = np.array([[0.7, 0.2], [0.3, 0.8]])
        v = zero_sum_definiteness(X.T @ mp_game.entries)
        assert v.verdict is Definiteness.POSITIVE_DEFINITE
        X = np.array([[0.2, 0.7], [0.8, 0.3]])
        v = zero_sum_definiteness(X.T @ mp_game.entries)
        assert v.verdict is Definiteness.NEGATIVE_DEFINITE

    def test_equal_columns_semidefinite(self, mp_game):
        X = np.array([[0.4, 0.4], [0.6, 0.6]])
        v = zero_sum_definiteness(X.T @ mp_game.entries)
        assert v.verdict is Definiteness.SEMIDEFINITE

    def test_verdict_invariant_over_pivots(self):
        rng = np.random.default_rng(57)
        for _ in range(50):
            M = rng.normal(size=(4, 4))
            verdicts = {zero_sum_definiteness(M, pivot_index=k).verdict
                        for k in range(4)}
            assert len(verdicts) == 1

    def test_sampled_quadratic_forms_agree(self):
        rng = np.random.default_rng(58)
        for _ in range(30):
            M = rng.normal(size=(4, 4))
            res = zero_sum_definiteness(M)
            deltas = rng.normal(size=(200, 4))
            deltas -= deltas.mean(axis=1, keepdims=True)
            quad = np.einsum("ki,ij,kj->k", deltas, M, deltas)
            if res.verdict is Definiteness.POSITIVE_DEFINITE:
                assert np.all(quad > 0.0)
            elif res.verdict is Definiteness.NEGATIVE_DEFINITE:
                assert np.all(quad < 0.0)
            elif res.verdict is Definiteness.INDEFINITE:
                # random draws may miss a thin cone of one sign, so witness
                # both signs via eigenvectors of the reduced symmetric form
                S = 0.5 * (res.reduced + res.reduced.T)
                _, vecs = np.linalg.eigh(S)
                forms = []
                for v_hat in (vecs[:, 0], vecs[:, -1]):
                    delta = np.append(v_hat, -v_hat.sum())
                    forms.append(float(delta @ M @ delta))
                assert min(forms) < 0.0 < max(forms)

    def test_codes_are_stable(self, mp_game):
        assert zero_sum_definiteness(mp_game).code == 1
        assert zero_sum_definiteness(-mp_game.entries).code == -1


class TestLogOddsQ:
    def test_uniform_gives_zero(self):
        assert log_odds_q(np.full((2, 2), 0.5)) == (0.0, 0.0)

    def test_example_value(self):
        X = np.array([[0.8, 0.5], [0.2, 0.5]])
        q1, q2 = log_odds_q(X)
        assert abs(q1 - LOG_4) < 1e-15
        assert q2 == 0.0

    def test_sign_matches_probability_gap(self):
        rng = np.random.default_rng(59)
        for _ in range(100):
            X, _ = random_state(rng, 2, 2)
            q1, q2 = log_odds_q(X)
            assert np.sign(q1 - q2) == np.sign(X[0, 0] - X[0, 1])

    def test_rejects_larger_games(self):
        with pytest.raises(ValueError):
            log_odds_q(np.full((3, 2), 1.0 / 3.0))

    def test_rejects_boundary_entries(self):
        with pytest.raises(ValueError):
            log_odds_q(np.array([[1.0, 0.5], [0.0, 0.5]]))


class TestGdaDiagnostics:
    def test_divergence_zero_at_equilibrium(self, mp_eq):
        X = np.repeat(mp_eq.x_star[:, None], 2, axis=1)
        assert gda_divergence(X, mp_eq.y_star, mp_eq) == 0.0

    def test_divergence_formula(self, mp_eq):
        rng = np.random.default_rng(60)
        X, y = random_state(rng, 2, 2)
        manual = 0.5 * np.sum((X - mp_eq.x_star[:, None]) ** 2)
        manual += 0.5 * np.sum((y - mp_eq.y_star) ** 2)
        assert gda_divergence(X, y, mp_eq) == pytest.approx(manual, abs=1e-15)

    def test_bilinear_H_formula(self, mp_game):
        rng = np.random.default_rng(61)
        X, _ = random_state(rng, 2, 2)
        delta = np.array([0.4, -0.4])
        manual = float((delta @ mp_game.entries) @ (X.T @ delta))
        assert gda_lyapunov_H(mp_game, X, delta) == pytest.approx(manual, abs=1e-15)

    def test_rates_match_finite_differences_along_gda_flow(self, mp_game, mp_eq):
        from reactivegames import rk4_step

        rng = np.random.default_rng(62)
        dt = 1e-3
        for _ in range(10):
            X, y = random_state(rng, 2, 2)
            Xp, yp = rk4_step(mp_game, FieldKind.GDA, X, y, dt)
            Xm, ym = rk4_step(mp_game, FieldKind.GDA, X, y, -dt)
            fd_D = (gda_divergence(Xp, yp, mp_eq) - gda_divergence(Xm, ym, mp_eq)) / (2 * dt)
            rate_D = divergence_rate(mp_game, X, y, mp_eq)
            assert abs(fd_D - rate_D) < 1e-3 * max(abs(rate_D), 1e-8)
            delta = np.array([1.0, -1.0])
            fd_H = (gda_lyapunov_H(mp_game, Xp, delta)
                    - gda_lyapunov_H(mp_game, Xm, delta)) / (2 * dt)
            rate_H = lyapunov_rate(mp_game, y, delta, mp_eq)
            assert abs(fd_H - rate_H) < 1e-3 * max(abs(rate_H), 1e-8)


@pytest.fixture(scope="module")
def short_run(mp_game, mp_eq):
    state = JointState(
        X=ReactiveStrategy(np.array([[0.8, 0.3], [0.2, 0.7]])),
        y=MixedStrategy(np.array([0.3, 0.7])),
    )
    traj = integrate(mp_game, FieldKind.REPLICATOR, state,
                     IntegratorConfig(dt=0.01, horizon=2.0), record_every=10)
    frame = trajectory_diagnostics(mp_game, mp_eq, traj.t, traj.X, traj.y)
    return traj, frame


class TestTrajectoryDiagnostics:
    def test_matches_scalar_functions_sample_by_sample(self, mp_game, mp_eq, short_run):
        traj, frame = short_run
        probes = default_probe_deltas(2)
        for i in range(traj.n_samples):
            X, y = traj.X[i], traj.y[i]
            assert frame.D[i] == pytest.approx(
                conditional_sum_divergence(X, y, mp_eq), abs=1e-12)
            assert frame.D_rate[i] == pytest.approx(
                divergence_rate(mp_game, X, y, mp_eq), abs=1e-12)
            for p, (_, delta) in enumerate(probes):
                assert frame.H[i, p] == pytest.approx(
                    lyapunov_H(mp_game, X, delta), abs=1e-12)
                assert frame.H_rate[i, p] == pytest.approx(
                    lyapunov_rate(mp_game, y, delta, mp_eq), abs=1e-12)
            assert frame.exploitability[i] == pytest.approx(
                exploitability(mp_game, X, y, mp_eq), abs=1e-12)
            assert frame.definiteness_code[i] == zero_sum_definiteness(
                X.T @ mp_game.entries).code
            q1, q2 = log_odds_q(X)
            assert frame.q[i, 0] == pytest.approx(q1, abs=1e-12)
            assert frame.q[i, 1] == pytest.approx(q2, abs=1e-12)

    def test_sample_accessor_round_trips(self, short_run):
        _, frame = short_run
        s = frame.sample(0)
        assert s.t == frame.t[0]
        assert s.divergence == frame.D[0]
        assert set(s.lyapunov) == set(frame.probe_labels)

    def test_boundary_state_yields_inf_not_exception(self, mp_game, mp_eq):
        X_path = np.array([[[1.0, 0.5], [0.0, 0.5]]])
        y_path = np.array([[0.5, 0.5]])
        frame = trajectory_diagnostics(mp_game, mp_eq, [0.0], X_path, y_path)
        assert np.isinf(frame.D[0])

    def test_gda_kind_switches_divergence_family(self, mp_game, mp_eq):
        rng = np.random.default_rng(63)
        X, y = random_state(rng, 2, 2)
        frame = trajectory_diagnostics(
            mp_game, mp_eq, [0.0], X[None], y[None], kind=FieldKind.GDA)
        assert frame.D[0] == pytest.approx(gda_divergence(X, y, mp_eq), abs=1e-14)
        assert frame.H[0, 0] == pytest.approx(
            gda_lyapunov_H(mp_game, X, np.array([1.0, -1.0])), abs=1e-14)

    def test_custom_probes_are_labeled(self, mp_game, mp_eq):
        rng = np.random.default_rng(64)
        X, y = random_state(rng, 2, 2)
        frame = trajectory_diagnostics(
            mp_game, mp_eq, [0.0], X[None], y[None],
            probes=[("custom", np.array([0.25, -0.25]))],
        )
        assert frame.probe_labels == ("custom",)
        assert frame.H.shape == (1, 1)
