"""Continuous-time learning dynamics and their fixed-step RK4 integration.

Three vector fields over strategy pairs (X, y):

  replicator   conditional replicator ascent for the reactive player against
               replicator descent for the memoryless player,
  gda          projected gradient ascent/descent (mean-centered gradients,
               no probability prefactor),
  memoryless   the classical two-sided replicator system, embedded by keeping
               every column of X equal.

Payoff gradients: the reactive player's is d u/d X[i,j] = (U y)_i y_j; the
memoryless player's is d u/d y_j = (U^T X y)_j + (X^T U y)_j, which carries an
extra term because y also moves the stationary distribution through X y.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import _integrator
from .strategy import _entries, _probs, JointState

__all__ = [
    "FieldKind",
    "IntegratorConfig",
    "Trajectory",
    "BatchTrajectory",
    "IntegrationDiverged",
    "grad_x",
    "grad_y",
    "replicator_field",
    "gda_field",
    "memoryless_replicator_field",
    "rk4_step",
    "integrate",
    "integrate_batch",
]


class FieldKind(Enum):
    REPLICATOR = "replicator"
    GDA = "gda"
    MEMORYLESS = "memoryless"

    @property
    def code(self) -> int:
        return {
            FieldKind.REPLICATOR: _integrator.FIELD_REPLICATOR,
            FieldKind.GDA: _integrator.FIELD_GDA,
            FieldKind.MEMORYLESS: _integrator.FIELD_MEMORYLESS,
        }[self]


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    horizon is realized as round(horizon / dt) steps of size dt.  After every
    step, entries below floor_eps are clamped up to it and each simplex block
    is renormalized (when renormalize is set), which keeps log-based
    diagnostics finite near the boundary.
    """

    dt: float = 0.01
    horizon: float = 100.0
    floor_eps: float = 1e-12
    renormalize: bool = True

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not (self.horizon >= self.dt and np.isfinite(self.horizon)):
            raise ValueError("horizon must be finite and at least dt")
        if not (0.0 <= self.floor_eps < 0.5):
            raise ValueError("floor_eps must lie in [0, 0.5)")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "horizon": self.horizon,
            "floor_eps": self.floor_eps,
            "renormalize": self.renormalize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        known = {k: d[k] for k in ("dt", "horizon", "floor_eps", "renormalize") if k in d}
        return cls(**known)

    @classmethod
    def from_json(cls, text: str) -> "IntegratorConfig":
        return cls.from_dict(json.loads(text))


class IntegrationDiverged(RuntimeError):
    """A state stopped being finite; carries the time and last finite state."""

    def __init__(self, t: float, X: np.ndarray, y: np.ndarray):
        super().__init__(
            f"integration diverged at t={t:g}; trajectory frozen at its last finite state"
        )
        self.t = t
        self.X = X
        self.y = y


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded samples of one integration run.

    t has shape (k,), X (k, m_X, m_Y), y (k, m_Y).  clamped[i] is True when
    the boundary clamp fired at least once since the previous record.
    observations collects observer outputs per sample when observers were
    passed to integrate().
    """

    t: np.ndarray
    X: np.ndarray
    y: np.ndarray
    clamped: np.ndarray
    observations: Optional[list] = None

    @property
    def n_samples(self) -> int:
        return self.t.size

    def stationary_path(self) -> np.ndarray:
        """Stationary mixed action X y at every sample, shape (k, m_X)."""
        return np.einsum("kij,kj->ki", self.X, self.y)


@dataclass(frozen=True, eq=False)
class BatchTrajectory:
    """Samples for a batch of trajectories sharing a game and a config.

    Shapes: t (k,), X (k, n, m_X, m_Y), y (k, n, m_Y), clamped (k, n).
    fail_step[t] is the failing step index for diverged trajectories and -1
    otherwise; their recorded samples repeat the last finite state from the
    failure on.  final_X / final_y are the working end states.  q_min_delta
    (2x2 games, on request) holds each trajectory's smallest one-step change
    of the log-odds gap q_1 - q_2.
    """

    t: np.ndarray
    X: np.ndarray
    y: np.ndarray
    clamped: np.ndarray
    fail_step: np.ndarray
    final_X: np.ndarray
    final_y: np.ndarray
    q_min_delta: Optional[np.ndarray] = None

    @property
    def n_trajectories(self) -> int:
        return self.X.shape[1]

    def single(self, t_idx: int) -> Trajectory:
        return Trajectory(
            t=self.t,
            X=self.X[:, t_idx],
            y=self.y[:, t_idx],
            clamped=self.clamped[:, t_idx],
        )


def grad_x(U, X, y) -> np.ndarray:
    """Payoff gradient of the reactive player: (U y)_i y_j."""
    Ue, yv = _entries(U), _probs(y)
    return np.outer(Ue @ yv, yv)


def grad_y(U, X, y) -> np.ndarray:
    """Payoff gradient felt by the memoryless player: U^T (X y) + X^T (U y)."""
    Ue, P, yv = _entries(U), _probs(X), _probs(y)
    return Ue.T @ (P @ yv) + P.T @ (Ue @ yv)


def replicator_field(U, X, y):
    """Conditional replicator ascent for X, replicator descent for y."""
    Ue, P, yv = _entries(U), _probs(X), _probs(y)
    g = np.outer(Ue @ yv, yv)
    gbar = (P * g).sum(axis=0)
    dX = P * (g - gbar[None, :])
    h = grad_y(Ue, P, yv)
    dy = -yv * (h - yv @ h)
    return dX, dy


def gda_field(U, X, y):
    """Simplex-projected gradient ascent for X against descent for y."""
    Ue, P, yv = _entries(U), _probs(X), _probs(y)
    g = np.outer(Ue @ yv, yv)
    dX = g - g.mean(axis=0)[None, :]
    h = grad_y(Ue, P, yv)
    dy = -(h - h.mean())
    return dX, dy


def memoryless_replicator_field(U, x, y):
    """Classical two-sided replicator field for memoryless strategies (x, y)."""
    Ue, xv, yv = _entries(U), _probs(x), _probs(y)
    a = Ue @ yv
    dx = xv * (a - xv @ a)
    c = Ue.T @ xv
    dy = -yv * (c - yv @ c)
    return dx, dy


_FIELDS = {
    FieldKind.REPLICATOR: replicator_field,
    FieldKind.GDA: gda_field,
}


def _field_arrays(kind: FieldKind, Ue, P, yv):
    if kind is FieldKind.MEMORYLESS:
        dx, dy = memoryless_replicator_field(Ue, P[:, 0], yv)
        return np.repeat(dx[:, None], P.shape[1], axis=1), dy
    return _FIELDS[kind](Ue, P, yv)


def rk4_step(U, kind: FieldKind, X, y, dt: float):
    """One classical RK4 step of the chosen field, no clamping or renormalization.

    Accepts raw arrays and returns raw arrays; integrate() applies the same
    update in compiled form plus the boundary treatment.
    """
    Ue, P, yv = _entries(U), np.asarray(_probs(X), dtype=float), np.asarray(_probs(y), dtype=float)
    k1X, k1y = _field_arrays(kind, Ue, P, yv)
    k2X, k2y = _field_arrays(kind, Ue, P + 0.5 * dt * k1X, yv + 0.5 * dt * k1y)
    k3X, k3y = _field_arrays(kind, Ue, P + 0.5 * dt * k2X, yv + 0.5 * dt * k2y)
    k4X, k4y = _field_arrays(kind, Ue, P + dt * k3X, yv + dt * k3y)
    Xn = P + dt / 6.0 * (k1X + 2.0 * k2X + 2.0 * k3X + k4X)
    yn = yv + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return Xn, yn


def _check_inputs(Ue, X0, y0, kind, cfg):
    n, mx, my = X0.shape
    if Ue.shape != (mx, my):
        raise ValueError("payoff matrix shape does not match the states")
    if y0.shape != (n, my):
        raise ValueError("y batch shape does not match the X batch")
    if cfg.floor_eps >= 1.0 / max(mx, my):
        raise ValueError("floor_eps too large for the simplex dimensions")
    if kind is FieldKind.MEMORYLESS:
        spread = np.max(np.abs(X0 - X0[:, :, :1])) if my > 1 else 0.0
        if spread > 1e-9:
            raise ValueError(
                "memoryless field needs all columns of X equal at the start"
            )


def integrate_batch(U, kind: FieldKind, X0, y0, cfg: IntegratorConfig,
                    record_every: int = 1, track_q: bool = False) -> BatchTrajectory:
    """Integrate a batch of initial conditions with one compiled kernel call.

    X0 has shape (n, m_X, m_Y) and y0 (n, m_Y).  Samples are recorded every
    record_every steps plus the final step.  track_q is only valid for 2x2
    games and enables the per-step log-odds monitor.
    """
    Ue = np.ascontiguousarray(_entries(U), dtype=float)
    X = np.ascontiguousarray(X0, dtype=float).copy()
    y = np.ascontiguousarray(y0, dtype=float).copy()
    if X.ndim != 3 or y.ndim != 2:
        raise ValueError("expected X0 (n, m_X, m_Y) and y0 (n, m_Y)")
    kind = FieldKind(kind)
    _check_inputs(Ue, X, y, kind, cfg)
    if track_q and (X.shape[1] != 2 or X.shape[2] != 2):
        raise ValueError("track_q requires a 2x2 game")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    n_steps = cfg.n_steps
    rec_steps = [s for s in range(0, n_steps + 1, record_every)]
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    k = len(rec_steps)
    n = X.shape[0]
    X_rec = np.empty((k, n) + X.shape[1:])
    y_rec = np.empty((k, n, y.shape[1]))
    clamp_rec = np.zeros((k, n), dtype=np.uint8)
    fail_step = np.full(n, -1, dtype=np.int64)
    q_min_delta = np.zeros(n)

    written = _integrator.run_batch(
        Ue, X, y, float(cfg.dt), n_steps, float(cfg.floor_eps),
        cfg.renormalize, int(record_every), kind.code, bool(track_q),
        X_rec, y_rec, clamp_rec, fail_step, q_min_delta,
    )
    assert written == k
    return BatchTrajectory(
        t=cfg.dt * np.asarray(rec_steps, dtype=float),
        X=X_rec,
        y=y_rec,
        clamped=clamp_rec.astype(bool),
        fail_step=fail_step,
        final_X=X,
        final_y=y,
        q_min_delta=q_min_delta if track_q else None,
    )


def integrate(U, kind: FieldKind, state0: JointState, cfg: IntegratorConfig,
              observers=(), record_every: int = 1) -> Trajectory:
    """Integrate one strategy pair and return the recorded trajectory.

    observers are callables f(t, X, y) evaluated on every recorded
    (post-clamp, post-renormalization) sample; their return values are
    collected per sample as a list of tuples in Trajectory.observations.
    Raises IntegrationDiverged when the state stops being finite.
    """
    batch = integrate_batch(
        U, kind, _probs(state0.X)[None, :, :], _probs(state0.y)[None, :],
        cfg, record_every=record_every,
    )
    if batch.fail_step[0] >= 0:
        raise IntegrationDiverged(
            t=float(batch.fail_step[0] * cfg.dt),
            X=batch.final_X[0],
            y=batch.final_y[0],
        )
    traj = batch.single(0)
    if not observers:
        return traj
    obs = [
        tuple(f(float(traj.t[i]), traj.X[i], traj.y[i]) for f in observers)
        for i in range(traj.n_samples)
    ]
    return Trajectory(t=traj.t, X=traj.X, y=traj.y, clamped=traj.clamped,
                      observations=obs)
