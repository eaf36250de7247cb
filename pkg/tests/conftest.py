"""Shared fixtures: canonical games/equilibria and a compiled-kernel warmup."""

import numpy as np
import pytest

from reactivegames import (
    FieldKind,
    IntegratorConfig,
    integrate_batch,
    make_coupled_matching_pennies,
    make_matching_pennies,
    solve_nash,
)


@pytest.fixture(scope="session")
def mp_game():
    return make_matching_pennies()


@pytest.fixture(scope="session")
def mp_eq(mp_game):
    return solve_nash(mp_game)


@pytest.fixture(scope="session")
def interior_game():
    return make_coupled_matching_pennies("interior", 9)


@pytest.fixture(scope="session")
def interior_eq(interior_game):
    return solve_nash(interior_game)


@pytest.fixture(scope="session")
def warm_kernel(mp_game):
    """Trigger JIT compilation of the integrator before any timed assertion."""
    X0 = np.full((1, 2, 2), 0.5)
    y0 = np.full((1, 2), 0.5)
    cfg = IntegratorConfig(dt=0.01, horizon=0.02)
    for kind in (FieldKind.REPLICATOR, FieldKind.GDA, FieldKind.MEMORYLESS):
        integrate_batch(mp_game, kind, X0, y0, cfg, track_q=(kind is not FieldKind.GDA))
    return True


def random_state(rng, mx, my):
    """Random interior strategy pair used across the test modules."""
    X = rng.exponential(1.0, size=(mx, my))
    X /= X.sum(axis=0)
    y = rng.exponential(1.0, size=my)
    y /= y.sum()
    return X, y
