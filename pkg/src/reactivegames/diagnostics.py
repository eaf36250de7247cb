"""Divergences, Lyapunov functions, and definiteness tests for the dynamics.

For the replicator field the distance to an equilibrium (x*, y*) is measured
by a sum of conditional KL divergences,

    D(X, y) = sum_j KL(x* || X[:, j]) + KL(y* || y),

whose time derivative along the flow is D_rate = -dy^T X^T U dy with
dy = y - y*.  The sign of that quadratic form on zero-sum vectors is decided
by the matrix M = X^T U, reduced to ordinary definiteness by pivoting one
coordinate.  A matching family of Lyapunov functions

    H(X; delta) = delta^T U log(X)^T delta,   H_rate = (delta^T U dy)^2

grows monotonically for any zero-sum probe delta; with delta = x - x* the
rate equals the squared exploitability |u_st - u*|^2.  The gda field uses
squared-norm analogues of D and a bilinear H with the same rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .dynamics import FieldKind
from .game import EquilibriumInfo
from .strategy import _entries, _probs

__all__ = [
    "InfiniteDivergenceError",
    "Definiteness",
    "DefinitenessVerdict",
    "DEFINITENESS_CODES",
    "DiagnosticsSample",
    "DiagnosticsFrame",
    "kl_divergence",
    "conditional_sum_divergence",
    "classical_divergence",
    "divergence_rate",
    "gda_divergence",
    "lyapunov_H",
    "gda_lyapunov_H",
    "lyapunov_rate",
    "exploitability",
    "log_odds_q",
    "zero_sum_vector",
    "default_probe_deltas",
    "reduce_for_zero_sum",
    "zero_sum_definiteness",
    "trajectory_diagnostics",
]

_ZERO_SUM_TOL = 1e-12


class InfiniteDivergenceError(ValueError):
    """The requested divergence or Lyapunov value is infinite (zero where mass is needed)."""


class Definiteness(Enum):
    POSITIVE_DEFINITE = "positive-definite"
    NEGATIVE_DEFINITE = "negative-definite"
    INDEFINITE = "indefinite"
    SEMIDEFINITE = "semidefinite"


# stable integer codes used in CSV output
DEFINITENESS_CODES = {
    Definiteness.POSITIVE_DEFINITE: 1,
    Definiteness.NEGATIVE_DEFINITE: -1,
    Definiteness.INDEFINITE: 0,
    Definiteness.SEMIDEFINITE: 2,
}


@dataclass(frozen=True, eq=False)
class DefinitenessVerdict:
    """Classification of a quadratic form restricted to zero-sum vectors."""

    verdict: Definiteness
    reduced: np.ndarray
    pivot_index: int

    @property
    def code(self) -> int:
        return DEFINITENESS_CODES[self.verdict]


def kl_divergence(p_star, p) -> float:
    """KL(p_star || p) in nats; raises when p lacks mass where p_star has some."""
    ps, pv = np.asarray(_probs(p_star), dtype=float), np.asarray(_probs(p), dtype=float)
    if ps.shape != pv.shape:
        raise ValueError("distributions must have equal length")
    mask = ps > 0.0
    if np.any(pv[mask] <= 0.0):
        raise InfiniteDivergenceError(
            "KL divergence is infinite: second argument has zero mass on the "
            "support of the first"
        )
    val = float(np.sum(ps[mask] * (np.log(ps[mask]) - np.log(pv[mask]))))
    return max(val, 0.0)


def conditional_sum_divergence(X, y, eq: EquilibriumInfo) -> float:
    """Sum of KL(x* || X[:, j]) over conditions j, plus KL(y* || y)."""
    P, yv = _probs(X), _probs(y)
    total = sum(kl_divergence(eq.x_star, P[:, j]) for j in range(P.shape[1]))
    return total + kl_divergence(eq.y_star, yv)


def classical_divergence(x, y, eq: EquilibriumInfo) -> float:
    """KL(x* || x) + KL(y* || y) for a pair of memoryless strategies."""
    return kl_divergence(eq.x_star, x) + kl_divergence(eq.y_star, y)


def divergence_rate(U, X, y, eq: EquilibriumInfo) -> float:
    """Time derivative of the conditional-sum divergence: -dy^T X^T U dy."""
    Ue, P, yv = _entries(U), _probs(X), _probs(y)
    dy = yv - eq.y_star
    return float(-dy @ (P.T @ (Ue @ dy)))


def gda_divergence(X, y, eq: EquilibriumInfo) -> float:
    """Squared-norm distance used for the gda field: sum_j ||X[:,j]-x*||^2/2 + ||y-y*||^2/2."""
    P, yv = _probs(X), _probs(y)
    dX = P - eq.x_star[:, None]
    return float(0.5 * np.sum(dX * dX) + 0.5 * np.sum((yv - eq.y_star) ** 2))


def zero_sum_vector(delta) -> np.ndarray:
    """Validate a probe direction: nonzero with components summing to zero."""
    d = np.asarray(delta, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("probe must be a vector of length >= 2")
    if abs(float(d.sum())) > _ZERO_SUM_TOL:
        raise ValueError("probe components must sum to zero")
    if not np.any(d != 0.0):
        raise ValueError("probe must be nonzero")
    return d


def _check_probe(delta) -> np.ndarray:
    d = np.asarray(delta, dtype=float)
    if abs(float(d.sum())) > _ZERO_SUM_TOL:
        raise ValueError("probe components must sum to zero")
    return d


def lyapunov_H(U, X, delta) -> float:
    """Lyapunov value delta^T U log(X)^T delta for a zero-sum probe delta."""
    Ue, P, d = _entries(U), _probs(X), _check_probe(delta)
    if np.any(P <= 0.0):
        raise InfiniteDivergenceError(
            "Lyapunov value is infinite: X has a zero entry"
        )
    return float((d @ Ue) @ (d @ np.log(P)))


def gda_lyapunov_H(U, X, delta) -> float:
    """Bilinear Lyapunov value delta^T U X^T delta used for the gda field."""
    Ue, P, d = _entries(U), _probs(X), _check_probe(delta)
    return float((d @ Ue) @ (d @ P))


def lyapunov_rate(U, y, delta, eq: EquilibriumInfo) -> float:
    """Growth rate of H along either field: (delta^T U (y - y*))^2."""
    Ue, yv, d = _entries(U), _probs(y), _check_probe(delta)
    v = float((d @ Ue) @ (yv - eq.y_star))
    return v * v


def exploitability(U, X, y, eq: EquilibriumInfo) -> float:
    """Squared payoff gap |u_st - u*|^2 to the equilibrium value.

    X may be a mixed strategy (its own stationary action) or a reactive
    strategy, whose stationary action X y is used.  With a mixed probe x the
    gap equals lyapunov_rate(U, y, x - x*, eq) exactly.
    """
    Ue, P, yv = _entries(U), _probs(X), _probs(y)
    x_st = P if P.ndim == 1 else P @ yv
    u = float(x_st @ Ue @ yv)
    return (u - eq.value) ** 2


def log_odds_q(X) -> tuple:
    """Log-odds (q_1, q_2) of the two conditional distributions of a 2x2 strategy."""
    P = _probs(X)
    if P.shape != (2, 2):
        raise ValueError("log-odds monitor is defined for 2x2 strategies only")
    if np.any(P <= 0.0) or np.any(P >= 1.0):
        raise ValueError("log-odds require strictly interior entries")
    return (
        float(np.log(P[0, 0]) - np.log(P[1, 0])),
        float(np.log(P[0, 1]) - np.log(P[1, 1])),
    )


def default_probe_deltas(m: int):
    """Spanning probe family (e_i - e_{i+1}) with labels like 'e1-e2'."""
    probes = []
    for i in range(m - 1):
        d = np.zeros(m)
        d[i] = 1.0
        d[i + 1] = -1.0
        probes.append((f"e{i + 1}-e{i + 2}", d))
    return probes


def reduce_for_zero_sum(M, pivot_index: Optional[int] = None) -> np.ndarray:
    """Reduce a quadratic form on zero-sum vectors to an ordinary one.

    Eliminating coordinate k via delta_k = -sum of the others turns
    delta^T M delta into dhat^T Mtil dhat with
    Mtil[a,b] = M[a,b] - M[a,k] - M[k,b] + M[k,k] over the remaining indices.
    """
    Me = np.asarray(_entries(M), dtype=float)
    if Me.ndim != 2 or Me.shape[0] != Me.shape[1] or Me.shape[0] < 2:
        raise ValueError("expected a square matrix of size >= 2")
    n = Me.shape[0]
    k = n - 1 if pivot_index is None else int(pivot_index)
    if not 0 <= k < n:
        raise ValueError("pivot index out of range")
    Mt = Me - Me[:, [k]] - Me[[k], :] + Me[k, k]
    keep = [i for i in range(n) if i != k]
    return Mt[np.ix_(keep, keep)]


def zero_sum_definiteness(M, tol: float = 1e-9,
                          pivot_index: Optional[int] = None) -> DefinitenessVerdict:
    """Classify delta^T M delta over nonzero zero-sum delta.

    Works on the symmetric part of the reduced matrix; eigenvalues within
    tol * spectral_radius of zero count as zero.  The verdict does not depend
    on the pivot choice.
    """
    reduced = reduce_for_zero_sum(M, pivot_index)
    n = np.asarray(_entries(M)).shape[0]
    k = n - 1 if pivot_index is None else int(pivot_index)
    S = 0.5 * (reduced + reduced.T)
    w = np.linalg.eigvalsh(S)
    scale = float(np.max(np.abs(w)))
    thr = tol * (scale if scale > 0.0 else 1.0)
    pos = w > thr
    neg = w < -thr
    if np.all(pos):
        verdict = Definiteness.POSITIVE_DEFINITE
    elif np.all(neg):
        verdict = Definiteness.NEGATIVE_DEFINITE
    elif np.any(pos) and np.any(neg):
        verdict = Definiteness.INDEFINITE
    else:
        verdict = Definiteness.SEMIDEFINITE
    return DefinitenessVerdict(verdict=verdict, reduced=reduced, pivot_index=k)


@dataclass(frozen=True, eq=False)
class DiagnosticsSample:
    """Diagnostics at one recorded time point."""

    t: float
    payoff: float
    divergence: float
    divergence_rate: float
    lyapunov: dict
    lyapunov_rates: dict
    exploitability: float
    definiteness_code: int
    q: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class DiagnosticsFrame:
    """Vectorized diagnostics along a trajectory (arrays indexed by sample).

    H and H_rate have one column per probe, ordered like probe_labels.
    q is None unless the game is 2x2 with strictly interior X path.
    """

    t: np.ndarray
    x_st: np.ndarray
    payoff: np.ndarray
    D: np.ndarray
    D_rate: np.ndarray
    probe_labels: tuple
    H: np.ndarray
    H_rate: np.ndarray
    exploitability: np.ndarray
    definiteness_code: np.ndarray
    q: Optional[np.ndarray] = None

    def sample(self, i: int) -> DiagnosticsSample:
        return DiagnosticsSample(
            t=float(self.t[i]),
            payoff=float(self.payoff[i]),
            divergence=float(self.D[i]),
            divergence_rate=float(self.D_rate[i]),
            lyapunov=dict(zip(self.probe_labels, self.H[i])),
            lyapunov_rates=dict(zip(self.probe_labels, self.H_rate[i])),
            exploitability=float(self.exploitability[i]),
            definiteness_code=int(self.definiteness_code[i]),
            q=None if self.q is None else (float(self.q[i, 0]), float(self.q[i, 1])),
        )


def _definiteness_codes_batch(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorized zero_sum_definiteness codes for a (k, m, m) stack, last pivot."""
    R = M - M[:, :, -1:] - M[:, -1:, :] + M[:, -1:, -1:]
    R = R[:, :-1, :-1]
    S = 0.5 * (R + np.transpose(R, (0, 2, 1)))
    w = np.linalg.eigvalsh(S)
    scale = np.max(np.abs(w), axis=1)
    thr = tol * np.where(scale > 0.0, scale, 1.0)
    pos = w > thr[:, None]
    neg = w < -thr[:, None]
    allpos = pos.all(axis=1)
    allneg = neg.all(axis=1)
    codes = np.zeros(M.shape[0], dtype=np.int64)
    codes[allpos] = 1
    codes[allneg] = -1
    semi = ~allpos & ~allneg & ~(pos.any(axis=1) & neg.any(axis=1))
    codes[semi] = 2
    return codes


def trajectory_diagnostics(U, eq: EquilibriumInfo, t, X_path, y_path,
                           kind: FieldKind = FieldKind.REPLICATOR,
                           probes=None) -> DiagnosticsFrame:
    """Diagnostics for a recorded path X_path (k, m_X, m_Y), y_path (k, m_Y).

    The divergence / Lyapunov family follows the field kind: KL-based D and
    log-based H for the replicator and memoryless fields, squared-norm D and
    bilinear H for gda.  The rates are the same for both families.  Zero
    entries on the path yield +inf values here rather than exceptions so a
    partly clamped trajectory still produces a full frame.
    """
    Ue = np.asarray(_entries(U), dtype=float)
    kind = FieldKind(kind)
    X_path = np.asarray(X_path, dtype=float)
    y_path = np.asarray(y_path, dtype=float)
    k, mx, my = X_path.shape
    if probes is None:
        probes = default_probe_deltas(mx)
    labels = tuple(lbl for lbl, _ in probes)
    deltas = np.vstack([_check_probe(d) for _, d in probes]) if probes else np.zeros((0, mx))

    dy = y_path - eq.y_star[None, :]
    x_st = np.einsum("kij,kj->ki", X_path, y_path)
    payoff = np.einsum("ki,ij,kj->k", x_st, Ue, y_path)

    Udy = dy @ Ue.T
    D_rate = -np.einsum("kij,ki,kj->k", X_path, Udy, dy)

    if kind is FieldKind.GDA:
        dX = X_path - eq.x_star[None, :, None]
        D = 0.5 * np.einsum("kij,kij->k", dX, dX) + 0.5 * np.einsum("kj,kj->k", dy, dy)
        G = X_path
    else:
        sx = np.flatnonzero(eq.x_star > 0.0)
        sy = np.flatnonzero(eq.y_star > 0.0)
        xs, ys = eq.x_star[sx], eq.y_star[sy]
        with np.errstate(divide="ignore"):
            L = np.log(X_path)
            ly = np.log(y_path)
        ent = my * float(xs @ np.log(xs)) + float(ys @ np.log(ys))
        cross = np.einsum("i,kij->k", xs, L[:, sx, :]) + ly[:, sy] @ ys
        D = ent - cross
        G = L

    if deltas.shape[0]:
        a = deltas @ Ue                       # (p, my)
        b = np.einsum("pi,kij->kpj", deltas, G)
        H = np.einsum("kpj,pj->kp", b, a)
        H_rate = np.einsum("pj,kj->kp", a, dy) ** 2
    else:
        H = np.zeros((k, 0))
        H_rate = np.zeros((k, 0))

    expl = (payoff - eq.value) ** 2
    M = np.einsum("kji,jm->kim", X_path, Ue)  # X^T U per sample
    codes = _definiteness_codes_batch(M)

    q = None
    if mx == 2 and my == 2 and np.all(X_path > 0.0):
        q = np.stack(
            [
                np.log(X_path[:, 0, 0]) - np.log(X_path[:, 1, 0]),
                np.log(X_path[:, 0, 1]) - np.log(X_path[:, 1, 1]),
            ],
            axis=1,
        )
    return DiagnosticsFrame(
        t=np.asarray(t, dtype=float),
        x_st=x_st,
        payoff=payoff,
        D=D,
        D_rate=D_rate,
        probe_labels=labels,
        H=H,
        H_rate=H_rate,
        exploitability=expl,
        definiteness_code=codes,
        q=q,
    )
