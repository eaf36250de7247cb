"""Player strategies and the stationary quantities they induce.

The row player X conditions its mixed action on the column player's previous
action, so its strategy is a column-stochastic matrix: column j is the action
distribution used after observing opponent action j.  The column player Y is
memoryless and plays a single mixed strategy.  Against a fixed pair (X, y) the
repeated play has the product stationary distribution x_st (x) y with
x_st = X y, and all long-run payoffs reduce to that distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Column sums within _SUM_TOL of one are taken as exact; sums off by more than
# that but within _RENORM_TOL are renormalized; anything worse is rejected.
_SUM_TOL = 1e-9
_RENORM_TOL = 1e-6
_NEG_TOL = 1e-9

__all__ = [
    "ReactiveStrategy",
    "MixedStrategy",
    "JointState",
    "StationaryState",
    "stationary_strategy",
    "stationary_state",
    "expected_payoff",
    "mixed_payoff",
]


def _clean_columns(raw, what: str) -> np.ndarray:
    """Validate an array whose columns must be probability distributions."""
    p = np.array(raw, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(p < -_NEG_TOL):
        raise ValueError(f"{what} has negative entries")
    p = np.where(p < 0.0, 0.0, p)
    s = p.sum(axis=0)
    if np.any(np.abs(s - 1.0) > _RENORM_TOL):
        raise ValueError(f"{what} columns do not sum to 1 (sums {s})")
    off = np.abs(s - 1.0) > _SUM_TOL
    if np.any(off):
        p = np.where(off[None, :], p / s, p)
    return p


@dataclass(frozen=True, eq=False)
class ReactiveStrategy:
    """Conditional strategy of the row player.

    probs[i, j] is the probability of playing action i after observing
    opponent action j; every column lies on the action simplex.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] < 2 or p.shape[1] < 1:
            raise ValueError("reactive strategy must be a (m_X, m_Y) matrix with m_X >= 2")
        p = _clean_columns(p, "reactive strategy")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def n_actions(self) -> int:
        return self.probs.shape[0]

    @property
    def n_signals(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, n_actions: int, n_signals: int) -> "ReactiveStrategy":
        return cls(np.full((n_actions, n_signals), 1.0 / n_actions))

    @classmethod
    def constant(cls, x, n_signals: int) -> "ReactiveStrategy":
        """All columns equal to the mixed strategy x (a memoryless player in reactive form)."""
        xv = np.asarray(x, dtype=float)
        return cls(np.repeat(xv[:, None], n_signals, axis=1))


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """A single distribution over actions (the memoryless column player)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("mixed strategy must be a vector of length >= 2")
        p = _clean_columns(p[:, None], "mixed strategy")[:, 0]
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def n_actions(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n_actions: int) -> "MixedStrategy":
        return cls(np.full(n_actions, 1.0 / n_actions))


@dataclass(frozen=True, eq=False)
class JointState:
    """A strategy pair (X, y) with consistent dimensions."""

    X: ReactiveStrategy
    y: MixedStrategy

    def __post_init__(self):
        if self.X.n_signals != self.y.n_actions:
            raise ValueError(
                f"X conditions on {self.X.n_signals} opponent actions "
                f"but y has {self.y.n_actions}"
            )


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Stationary action distribution of X and the joint product distribution."""

    x: np.ndarray
    joint: np.ndarray

    def __post_init__(self):
        for name in ("x", "joint"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def _probs(obj) -> np.ndarray:
    return obj.probs if hasattr(obj, "probs") else np.asarray(obj, dtype=float)


def _entries(obj) -> np.ndarray:
    return obj.entries if hasattr(obj, "entries") else np.asarray(obj, dtype=float)


def stationary_strategy(X, y) -> np.ndarray:
    """Stationary mixed action of the reactive player: (X y)_i = sum_j probs[i,j] y_j."""
    P, yv = _probs(X), _probs(y)
    if P.shape[1] != yv.size:
        raise ValueError("dimension mismatch between X and y")
    return P @ yv

def stationary_state(X, y) -> StationaryState:
    """Product stationary distribution over joint actions under (X, y)."""
    x_st = stationary_strategy(X, y)
    return StationaryState(x=x_st, joint=np.outer(x_st, _probs(y)))


def expected_payoff(U, X, y) -> float:
    """Long-run average payoff of the row player under the stationary distribution."""
    Ue = _entries(U)
    x_st = stationary_strategy(X, y)
    yv = _probs(y)
    if Ue.shape != (x_st.size, yv.size):
        raise ValueError("payoff matrix shape does not match the strategies")
    return float(x_st @ Ue @ yv)


def mixed_payoff(U, x, y) -> float:
    """Expected payoff x^T U y for two memoryless strategies."""
    Ue, xv, yv = _entries(U), _probs(x), _probs(y)
    if Ue.shape != (xv.size, yv.size):
        raise ValueError("payoff matrix shape does not match the strategies")
    return float(xv @ Ue @ yv)
