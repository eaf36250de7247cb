"""Self-contained invariant battery for the `check` CLI subcommand.

Each check re-derives an analytic property of the dynamics or diagnostics on
seeded random data and returns (name, ok, detail).  The battery is a smaller,
faster sibling of the test suite meant for installed-environment smoke runs.
"""

from __future__ import annotations

import numpy as np

from .diagnostics import (
    Definiteness,
    classical_divergence,
    conditional_sum_divergence,
    default_probe_deltas,
    divergence_rate,
    exploitability,
    gda_divergence,
    lyapunov_H,
    lyapunov_rate,
    log_odds_q,
    zero_sum_definiteness,
)
from .dynamics import (
    FieldKind,
    IntegratorConfig,
    gda_field,
    grad_x,
    grad_y,
    integrate,
    memoryless_replicator_field,
    replicator_field,
    rk4_step,
)
from .game import make_coupled_matching_pennies, make_matching_pennies, solve_nash
from .strategy import JointState, MixedStrategy, ReactiveStrategy

_SEED = 20240817


def _random_game(rng, mx, my):
    from .game import PayoffMatrix

    return PayoffMatrix(rng.uniform(-2.0, 2.0, size=(mx, my)))


def _random_state(rng, mx, my):
    X = rng.exponential(1.0, size=(mx, my))
    X /= X.sum(axis=0)
    y = rng.exponential(1.0, size=my)
    y /= y.sum()
    return X, y


def check_gradients_match_finite_differences() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED)
    step = 1e-5
    worst = 0.0
    for _ in range(25):
        mx, my = rng.integers(2, 5, size=2)
        U = _random_game(rng, mx, my)
        X, y = _random_state(rng, mx, my)
        gx = grad_x(U, X, y)
        gy = grad_y(U, X, y)
        for i in range(mx):
            for j in range(my):
                Xp, Xm = X.copy(), X.copy()
                Xp[i, j] += step
                Xm[i, j] -= step
                fd = ((Xp @ y) @ U.entries @ y - (Xm @ y) @ U.entries @ y) / (2 * step)
                rel = abs(fd - gx[i, j]) / max(abs(gx[i, j]), 1e-8)
                worst = max(worst, rel)
        for j in range(my):
            yp, ym = y.copy(), y.copy()
            yp[j] += step
            ym[j] -= step
            fd = ((X @ yp) @ U.entries @ yp - (X @ ym) @ U.entries @ ym) / (2 * step)
            rel = abs(fd - gy[j]) / max(abs(gy[j]), 1e-8)
            worst = max(worst, rel)
    return worst < 1e-5, f"max rel err {worst:.2e}"


def check_field_tangency() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 1)
    worst = 0.0
    for _ in range(50):
        mx, my = rng.integers(2, 5, size=2)
        U = _random_game(rng, mx, my)
        X, y = _random_state(rng, mx, my)
        for fld in (replicator_field, gda_field):
            dX, dy = fld(U, X, y)
            worst = max(worst, float(np.max(np.abs(dX.sum(axis=0)))),
                        abs(float(dy.sum())))
        dx, dy = memoryless_replicator_field(U, X[:, 0], y)
        worst = max(worst, abs(float(dx.sum())), abs(float(dy.sum())))
    return worst < 1e-13, f"max block-sum magnitude {worst:.2e}"


def check_equilibrium_fixed_point() -> tuple[bool, str]:
    U = make_matching_pennies()
    eq = solve_nash(U)
    X = np.repeat(eq.x_star[:, None], 2, axis=1)
    worst = 0.0
    for fld in (replicator_field, gda_field):
        dX, dy = fld(U, X, eq.y_star)
        worst = max(worst, float(np.max(np.abs(dX))), float(np.max(np.abs(dy))))
    return worst < 1e-12, f"field magnitude at equilibrium {worst:.2e}"


def check_matching_pennies_closed_forms() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 2)
    U = make_matching_pennies()
    eq = solve_nash(U)
    delta = np.array([1.0, -1.0])
    worst = 0.0
    for _ in range(200):
        X, y = _random_state(rng, 2, 2)
        q1, q2 = log_odds_q(X)
        dy1 = y[0] - eq.y_star[0]
        x1, x2 = X[0, 0], X[0, 1]
        worst = max(
            worst,
            abs(lyapunov_H(U, X, delta) - 2.0 * (q1 - q2)),
            abs(lyapunov_rate(U, y, delta, eq) - 16.0 * dy1 * dy1),
            abs(divergence_rate(U, X, y, eq) + 4.0 * dy1 * dy1 * (x1 - x2)),
        )
    return worst < 1e-12, f"max closed-form deviation {worst:.2e}"


def check_definiteness_equivalence() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 3)
    n_delta = 500
    deltas = rng.normal(size=(n_delta, 4))
    deltas -= deltas.mean(axis=1, keepdims=True)
    disagreements = 0
    for _ in range(20):
        M = rng.normal(size=(4, 4))
        quad = np.einsum("ki,ij,kj->k", deltas, M, deltas)
        verdicts = {zero_sum_definiteness(M, pivot_index=k).verdict for k in range(4)}
        if len(verdicts) != 1:
            disagreements += 1
            continue
        v = verdicts.pop()
        if v is Definiteness.POSITIVE_DEFINITE and not np.all(quad > 0):
            disagreements += 1
        elif v is Definiteness.NEGATIVE_DEFINITE and not np.all(quad < 0):
            disagreements += 1
        elif v is Definiteness.INDEFINITE and not (np.any(quad > 0) and np.any(quad < 0)):
            disagreements += 1
    return disagreements == 0, f"{disagreements} disagreements over 20 matrices"


def check_sign_of_divergence_rate() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 4)
    U = make_matching_pennies()
    eq = solve_nash(U)
    bad = 0
    n = 0
    while n < 200:
        X, y = _random_state(rng, 2, 2)
        if abs(y[0] - eq.y_star[0]) < 1e-9:
            continue
        verdict = zero_sum_definiteness(X.T @ U.entries).verdict
        rate = divergence_rate(U, X, y, eq)
        if verdict is Definiteness.POSITIVE_DEFINITE:
            n += 1
            bad += rate >= 0.0
        elif verdict is Definiteness.NEGATIVE_DEFINITE:
            n += 1
            bad += rate <= 0.0
    return bad == 0, f"{bad} sign violations over {n} definite states"


def check_lyapunov_rate_nonnegative() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 5)
    U = make_coupled_matching_pennies("interior", 9)
    eq = solve_nash(U)
    probes = default_probe_deltas(4)
    worst = 0.0
    for _ in range(200):
        X, y = _random_state(rng, 4, 4)
        for _, d in probes:
            worst = min(worst, lyapunov_rate(U, y, d, eq))
    at_eq = max(lyapunov_rate(U, eq.y_star, d, eq) for _, d in probes)
    ok = worst >= 0.0 and at_eq < 1e-12
    return ok, f"min rate {worst:.2e}, max rate at y* {at_eq:.2e}"


def check_probe_identity_exploitability() -> tuple[bool, str]:
    # The identity needs a full-support equilibrium (the payoff is pinned to
    # the game value on every action), so draw from games that have one.
    rng = np.random.default_rng(_SEED + 6)
    games = [make_matching_pennies(), make_coupled_matching_pennies("interior", 9)]
    worst = 0.0
    for k in range(100):
        U = games[k % len(games)]
        eq = solve_nash(U)
        mx, my = U.rows, U.cols
        _, y = _random_state(rng, mx, my)
        x_probe = rng.exponential(1.0, size=mx)
        x_probe /= x_probe.sum()
        lhs = lyapunov_rate(U, y, x_probe - eq.x_star, eq)
        rhs = exploitability(U, x_probe, y, eq)
        worst = max(worst, abs(lhs - rhs))
    return worst < 1e-12, f"max |H_rate - exploitability| {worst:.2e}"


def check_memoryless_conservation() -> tuple[bool, str]:
    U = make_matching_pennies()
    eq = solve_nash(U)
    state = JointState(
        X=ReactiveStrategy.constant(np.array([0.8, 0.2]), 2),
        y=MixedStrategy(np.array([0.35, 0.65])),
    )
    cfg = IntegratorConfig(dt=0.01, horizon=100.0)
    traj = integrate(U, FieldKind.MEMORYLESS, state, cfg, record_every=100)
    d0 = classical_divergence(traj.X[0][:, 0], traj.y[0], eq)
    dT = classical_divergence(traj.X[-1][:, 0], traj.y[-1], eq)
    drift = abs(dT - d0)
    rng = np.random.default_rng(_SEED + 7)
    worst_rate = 0.0
    for _ in range(100):
        x = rng.exponential(1.0, size=2)
        x /= x.sum()
        y = rng.exponential(1.0, size=2)
        y /= y.sum()
        X = np.repeat(x[:, None], 2, axis=1)
        worst_rate = max(worst_rate, abs(divergence_rate(U, X, y, eq)))
    ok = drift < 1e-5 and worst_rate < 1e-14
    return ok, f"divergence drift {drift:.2e}, max equal-column rate {worst_rate:.2e}"


def check_rk4_order() -> tuple[bool, str]:
    U = make_matching_pennies()
    state = JointState(
        X=ReactiveStrategy(np.array([[0.7, 0.4], [0.3, 0.6]])),
        y=MixedStrategy(np.array([0.3, 0.7])),
    )
    horizon = 20.0
    ends = {}
    for dt in (0.02, 0.01, 0.0025):
        cfg = IntegratorConfig(dt=dt, horizon=horizon)
        traj = integrate(U, FieldKind.REPLICATOR, state, cfg, record_every=cfg.n_steps)
        ends[dt] = np.concatenate([traj.X[-1].ravel(), traj.y[-1]])
    e_coarse = float(np.max(np.abs(ends[0.02] - ends[0.0025])))
    e_fine = float(np.max(np.abs(ends[0.01] - ends[0.0025])))
    ratio = e_coarse / e_fine if e_fine > 0 else np.inf
    return 12.0 <= ratio <= 20.0, f"halving-dt error ratio {ratio:.2f}"


def check_rate_identities_fd() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 8)
    dt = 1e-3
    worst = 0.0
    for game, kind in (
        (make_matching_pennies(), FieldKind.REPLICATOR),
        (make_matching_pennies(), FieldKind.GDA),
        (make_coupled_matching_pennies("interior", 9), FieldKind.REPLICATOR),
    ):
        eq = solve_nash(game)
        mx, my = game.rows, game.cols
        for _ in range(5):
            X, y = _random_state(rng, mx, my)
            Xp, yp = rk4_step(game, kind, X, y, dt)
            Xm, ym = rk4_step(game, kind, X, y, -dt)
            if kind is FieldKind.GDA:
                if np.min(Xp) < 0 or np.min(Xm) < 0:
                    continue
                d_plus = gda_divergence(Xp, yp, eq)
                d_minus = gda_divergence(Xm, ym, eq)
            else:
                d_plus = conditional_sum_divergence(Xp, yp, eq)
                d_minus = conditional_sum_divergence(Xm, ym, eq)
            fd = (d_plus - d_minus) / (2 * dt)
            rate = divergence_rate(game, X, y, eq)
            worst = max(worst, abs(fd - rate) / max(abs(rate), 1e-8))
    return worst < 1e-3, f"max rel err of dD/dt vs rate {worst:.2e}"


def check_determinism() -> tuple[bool, str]:
    import tempfile
    from pathlib import Path

    from .experiments import ExperimentConfig, run_experiment

    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for sub in ("a", "b"):
            cfg = ExperimentConfig(
                game=make_matching_pennies(),
                integrator=IntegratorConfig(dt=0.01, horizon=5.0),
                ic_count=2,
                ic_seed=99,
                record_stride=10,
                output_path=str(Path(tmp) / sub),
            )
            run_experiment(cfg)
            paths.append(Path(tmp) / sub)
        same = all(
            (paths[0] / f.name).read_bytes() == (paths[1] / f.name).read_bytes()
            for f in sorted(paths[0].iterdir())
            if f.suffix == ".csv"
        )
    return same, "identical seeds produced byte-identical CSVs" if same else "CSV mismatch"


CHECKS = [
    ("gradients-match-finite-differences", check_gradients_match_finite_differences),
    ("field-tangency", check_field_tangency),
    ("equilibrium-fixed-point", check_equilibrium_fixed_point),
    ("matching-pennies-closed-forms", check_matching_pennies_closed_forms),
    ("definiteness-equivalence", check_definiteness_equivalence),
    ("divergence-rate-sign", check_sign_of_divergence_rate),
    ("lyapunov-rate-nonnegative", check_lyapunov_rate_nonnegative),
    ("probe-identity-exploitability", check_probe_identity_exploitability),
    ("memoryless-conservation", check_memoryless_conservation),
    ("rk4-order", check_rk4_order),
    ("rate-identities-finite-difference", check_rate_identities_fd),
    ("determinism", check_determinism),
]


def run_checks(out=None) -> bool:
    """Run the battery, print one line per check, return overall success."""
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= ok
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line, file=out)
    return all_ok
