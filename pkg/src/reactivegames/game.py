"""Zero-sum normal-form games, benchmark generators, and equilibrium computation.

A game is described by the row player's payoff matrix U; the column player
receives -U.  Equilibria are computed with the standard maximin linear
programs, and degenerate games (singular U) additionally expose a null-space
basis and, when possible, a line segment of interchangeable equilibria.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import linprog

from .strategy import _entries, _probs

__all__ = [
    "PayoffMatrix",
    "CouplingVariant",
    "EquilibriumInfo",
    "EquilibriumCheck",
    "EquilibriumSegmentParam",
    "make_matching_pennies",
    "make_coupled_matching_pennies",
    "solve_nash",
    "verify_equilibrium",
    "equilibrium_segment",
]


@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """Row player's payoff table; the column player's payoffs are the negation.

    variant/seed record how a generated matrix was built so a serialized game
    can be reproduced exactly; both are None for hand-built matrices.
    """

    entries: np.ndarray
    variant: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        U = np.array(self.entries, dtype=float)
        if U.ndim != 2:
            raise ValueError("payoff matrix must be two-dimensional")
        if U.shape[0] < 2 or U.shape[1] < 2:
            raise ValueError("each player needs at least two actions")
        if not np.all(np.isfinite(U)):
            raise ValueError("payoff entries must be finite")
        U.flags.writeable = False
        object.__setattr__(self, "entries", U)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "entries": [float(v) for v in self.entries.ravel()],
            "variant": self.variant,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PayoffMatrix":
        try:
            rows, cols = int(d["rows"]), int(d["cols"])
            entries = np.asarray(d["entries"], dtype=float).reshape(rows, cols)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed game description: {exc}") from exc
        return cls(entries, variant=d.get("variant"), seed=d.get("seed"))

    @classmethod
    def from_json(cls, text: str) -> "PayoffMatrix":
        return cls.from_dict(json.loads(text))


class CouplingVariant(str, Enum):
    """Off-pattern fill for the four-action coupled game."""

    INTERIOR = "interior"
    CONTINUOUS = "continuous"
    BOUNDARY = "boundary"


def make_matching_pennies() -> PayoffMatrix:
    """2x2 matching pennies: +1 on the diagonal for the row player, -1 off it."""
    return PayoffMatrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))


def make_coupled_matching_pennies(variant, seed: Optional[int] = None) -> PayoffMatrix:
    """Four-action game with a cyclic win pattern and a variant-dependent fill.

    Action k beats action k+1 (mod 4): u[i, j] = +2 when j = i+1 and -2 when
    i = j+1.  The remaining eight cells are the coupling fill:

      interior    i.i.d. Uniform(-1, 1) draws (seeded, filled row-major),
      continuous  zeros, which leaves a line segment of equilibria,
      boundary    zeros except u[0, 0] = -1, forcing a boundary equilibrium.
    """
    variant = CouplingVariant(variant)
    U = np.zeros((4, 4))
    nxt = [1, 2, 3, 0]
    for i in range(4):
        U[i, nxt[i]] = 2.0
        U[nxt[i], i] = -2.0
    pattern = {(i, nxt[i]) for i in range(4)} | {(nxt[i], i) for i in range(4)}
    if variant is CouplingVariant.INTERIOR:
        if seed is None:
            raise ValueError("the interior variant requires a seed")
        rng = np.random.default_rng(seed)
        off = [(i, j) for i in range(4) for j in range(4) if (i, j) not in pattern]
        for (i, j), v in zip(off, rng.uniform(-1.0, 1.0, size=len(off))):
            U[i, j] = v
    elif variant is CouplingVariant.BOUNDARY:
        U[0, 0] = -1.0
    return PayoffMatrix(
        U,
        variant=variant.value,
        seed=int(seed) if variant is CouplingVariant.INTERIOR else None,
    )


@dataclass(frozen=True, eq=False)
class EquilibriumInfo:
    """A maximin equilibrium plus degeneracy data.

    null_space_coeffs holds an orthonormal basis (from SVD) of the right null
    space of U; a nonempty basis sets the degenerate flag.  Degeneracy alone
    does not imply multiple equilibria: only null directions that also sum to
    zero can translate an equilibrium (see equilibrium_segment).
    """

    x_star: np.ndarray
    y_star: np.ndarray
    value: float
    support_x: tuple
    support_y: tuple
    degenerate: bool
    null_space_coeffs: tuple

    def __post_init__(self):
        for name in ("x_star", "y_star"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


class EquilibriumCheck(NamedTuple):
    is_equilibrium: bool
    value: float


@dataclass(frozen=True, eq=False)
class EquilibriumSegmentParam:
    """Line segment of equilibria for a degenerate game.

    Points are (r * base + (1 - r) * alt) for r in [0, 1], per player.  base is
    the lexicographically smaller endpoint so the parameterization is
    deterministic.  r_x / r_y locate the solved equilibrium on the segment
    (projection parameter, clamped to [0, 1]).
    """

    base_x: np.ndarray
    alt_x: np.ndarray
    base_y: np.ndarray
    alt_y: np.ndarray
    r_x: float
    r_y: float

    def __post_init__(self):
        for name in ("base_x", "alt_x", "base_y", "alt_y"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def point_x(self, r: float) -> np.ndarray:
        return r * self.base_x + (1.0 - r) * self.alt_x

    def point_y(self, r: float) -> np.ndarray:
        return r * self.base_y + (1.0 - r) * self.alt_y


def _maximin(A: np.ndarray):
    """Maximize min_j (p^T A)_j over the probability simplex via the usual LP."""
    m, n = A.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(n),
        A_eq=A_eq,
        b_eq=np.ones(1),
        bounds=[(0.0, None)] * m + [(None, None)],
        method="highs",
    )
    if res.status != 0:
        # A finite zero-sum matrix always has a maximin solution, so a solver
        # failure here is an internal bug, not a property of the game.
        raise RuntimeError(
            f"maximin LP unexpectedly failed (status {res.status}: {res.message})"
        )
    p = np.clip(res.x[:m], 0.0, None)
    return p / p.sum(), float(res.x[-1])


def _null_space_basis(U: np.ndarray, tol: float):
    """Rows: orthonormal basis of the right null space, thresholded at tol * s_max."""
    _, s, vt = np.linalg.svd(U)
    s_max = s[0] if s.size else 0.0
    full = np.zeros(vt.shape[0])
    full[: s.size] = s
    keep = full <= tol * s_max if s_max > 0.0 else np.ones_like(full, dtype=bool)
    return [vt[i].copy() for i in np.flatnonzero(keep)]


def solve_nash(U, tol: float = 1e-9) -> EquilibriumInfo:
    """Equilibrium of the zero-sum game with row payoffs U.

    Solves the maximin LP for each player, cleans entries below tol to zero,
    and reports supports, the game value (row player's payoff), and the right
    null-space basis of U used for degeneracy detection.
    """
    Ue = _entries(U)
    x, v_row = _maximin(Ue)
    y, v_col = _maximin(-Ue.T)
    value = 0.5 * (v_row - v_col)
    scale = max(1.0, float(np.abs(Ue).max()))
    if abs(v_row + v_col) > 1e-6 * scale:
        raise RuntimeError(
            f"maximin values disagree ({v_row} vs {-v_col}); LP tolerance bug"
        )
    for p in (x, y):
        p[p <= tol] = 0.0
        p /= p.sum()
    basis = _null_space_basis(Ue, tol)
    return EquilibriumInfo(
        x_star=x,
        y_star=y,
        value=value,
        support_x=tuple(int(i) for i in np.flatnonzero(x > tol)),
        support_y=tuple(int(j) for j in np.flatnonzero(y > tol)),
        degenerate=len(basis) > 0,
        null_space_coeffs=tuple(basis),
    )


def verify_equilibrium(U, x, y, tol: float = 1e-9) -> EquilibriumCheck:
    """Check the support conditions for (x, y) to be an equilibrium.

    On the support of x every payoff gradient component (U y)_i must equal a
    common constant, off-support components must not exceed it; for y the
    mirrored conditions hold with inequalities reversed, and both constants
    must agree.  Returns the flag and the expected payoff x^T U y.
    """
    Ue, xv, yv = _entries(U), _probs(x), _probs(y)
    if Ue.shape != (xv.size, yv.size):
        raise ValueError("payoff matrix shape does not match the strategies")
    for p, who in ((xv, "x"), (yv, "y")):
        if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError(f"{who} is not a probability distribution")
    value = float(xv @ Ue @ yv)

    row_pay = Ue @ yv
    col_pay = Ue.T @ xv
    supp_x = xv > tol
    supp_y = yv > tol
    c_x = float(row_pay[supp_x].mean())
    c_y = float(col_pay[supp_y].mean())
    ok = (
        np.all(np.abs(row_pay[supp_x] - c_x) <= tol)
        and np.all(row_pay[~supp_x] <= c_x + tol)
        and np.all(np.abs(col_pay[supp_y] - c_y) <= tol)
        and np.all(col_pay[~supp_y] >= c_y - tol)
        and abs(c_x - c_y) <= tol
    )
    return EquilibriumCheck(bool(ok), value)


def _zero_sum_direction(basis, tol: float = 1e-9):
    """The unique (up to sign) zero-sum direction in span(basis), if there is one."""
    if not basis:
        return None
    B = np.vstack(basis)
    sums = B.sum(axis=1)
    norm = np.linalg.norm(sums)
    if norm <= tol:
        coeff_basis = np.eye(len(basis))
    else:
        # null space of the 1-row constraint c . sums = 0 in coefficient space
        _, s, vt = np.linalg.svd(sums[None, :])
        coeff_basis = vt[1:]
    if coeff_basis.shape[0] != 1:
        return None
    d = coeff_basis[0] @ B
    nd = np.linalg.norm(d)
    if nd <= tol:
        return None
    d = d / nd
    lead = d[np.flatnonzero(np.abs(d) > tol)[0]]
    return d if lead > 0 else -d


def _segment_endpoints(point: np.ndarray, d: np.ndarray, tol: float = 1e-9):
    """Endpoints of {point + t d : simplex-feasible t}; None if the segment is degenerate."""
    up = d > tol
    dn = d < -tol
    if not (np.any(up) and np.any(dn)):
        return None
    t_hi = float(np.min(point[dn] / -d[dn]))
    t_lo = float(-np.min(point[up] / d[up]))
    hi = np.clip(point + t_hi * d, 0.0, None)
    lo = np.clip(point + t_lo * d, 0.0, None)
    if np.max(np.abs(hi - lo)) <= tol:
        return None
    if tuple(hi) <= tuple(lo):
        return hi, lo
    return lo, hi


def equilibrium_segment(U, info: EquilibriumInfo, tol: float = 1e-9):
    """Segment of equilibria through (x_star, y_star), or None.

    Exists when both players have a one-dimensional family of zero-sum
    deviations in their null space (right null space of U for y, left for x);
    translating the solved equilibrium along those directions to the simplex
    boundary yields the endpoints.
    """
    if not info.degenerate:
        return None
    Ue = _entries(U)
    d_y = _zero_sum_direction(info.null_space_coeffs)
    d_x = _zero_sum_direction(_null_space_basis(Ue.T, tol))
    if d_y is None or d_x is None:
        return None
    seg_y = _segment_endpoints(info.y_star, d_y)
    seg_x = _segment_endpoints(info.x_star, d_x)
    if seg_y is None or seg_x is None:
        return None
    base_x, alt_x = seg_x
    base_y, alt_y = seg_y

    def _project(p, base, alt):
        span = base - alt
        r = float((p - alt) @ span / (span @ span))
        return min(1.0, max(0.0, r))

    return EquilibriumSegmentParam(
        base_x=base_x,
        alt_x=alt_x,
        base_y=base_y,
        alt_y=alt_y,
        r_x=_project(info.x_star, base_x, alt_x),
        r_y=_project(info.y_star, base_y, alt_y),
    )
