"""Experiment harness: seeded runs over batches of initial conditions.

A run solves the game's equilibrium, integrates every initial condition,
evaluates the diagnostics along each trajectory, writes one CSV per
trajectory plus a JSON summary, and reports convergence per trajectory.
Identical configs (including seeds) produce byte-identical output files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import (
    DiagnosticsFrame,
    default_probe_deltas,
    trajectory_diagnostics,
    zero_sum_vector,
)
from .dynamics import (
    FieldKind,
    IntegratorConfig,
    Trajectory,
    integrate_batch,
)
from .game import (
    EquilibriumInfo,
    EquilibriumSegmentParam,
    PayoffMatrix,
    equilibrium_segment,
    make_coupled_matching_pennies,
    make_matching_pennies,
    solve_nash,
)

__all__ = [
    "Probe",
    "ExperimentConfig",
    "ConvergenceReport",
    "ExperimentRun",
    "sample_interior_point",
    "sample_initial_conditions",
    "detect_convergence",
    "run_experiment",
    "write_trajectory_csv",
    "preset_config",
    "PRESET_NAMES",
]

# floor of the interior sampler: entries never start below this
_IC_EPS = 0.01


@dataclass(frozen=True, eq=False)
class Probe:
    """A labeled zero-sum direction; alternatively a probe strategy x whose
    deviation from x* becomes the direction at run time."""

    label: str
    delta: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.delta is None) == (self.x is None):
            raise ValueError("probe needs exactly one of delta or x")
        for name in ("delta", "x"):
            v = getattr(self, name)
            if v is not None:
                a = np.asarray(v, dtype=float)
                a.flags.writeable = False
                object.__setattr__(self, name, a)
        if self.delta is not None:
            zero_sum_vector(self.delta)

    def resolve(self, eq: EquilibriumInfo) -> np.ndarray:
        if self.delta is not None:
            return self.delta
        return self.x - eq.x_star

    def to_dict(self) -> dict:
        if self.delta is not None:
            return {"label": self.label, "delta": [float(v) for v in self.delta]}
        return {"label": self.label, "x": [float(v) for v in self.x]}

    @classmethod
    def from_dict(cls, d: dict) -> "Probe":
        return cls(
            label=str(d["label"]),
            delta=d.get("delta"),
            x=d.get("x"),
        )


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything needed to reproduce a run; serializes to/from JSON."""

    game: PayoffMatrix
    field_kind: FieldKind = FieldKind.REPLICATOR
    integrator: IntegratorConfig = IntegratorConfig()
    ic_count: int = 10
    ic_seed: int = 0
    ic_states: Optional[tuple] = None  # ((X, y) array pairs); overrides count/seed
    probes: tuple = ()                 # extra probes beyond the spanning family
    record_stride: int = 1
    convergence_tol: float = 1e-3
    window_frac: float = 0.1
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.ic_states is not None:
            if len(self.ic_states) == 0:
                raise ValueError("need at least one initial condition")
        elif self.ic_count < 1:
            raise ValueError("need at least one initial condition")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0.0 < self.window_frac <= 1.0:
            raise ValueError("window_frac must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = {
            "game": self.game.to_dict(),
            "integrator": {**self.integrator.to_dict(), "field": self.field_kind.value},
            "record_stride": self.record_stride,
            "convergence_tol": self.convergence_tol,
            "window_frac": self.window_frac,
            "output_path": self.output_path,
            "probes": [p.to_dict() for p in self.probes],
        }
        if self.ic_states is not None:
            d["initial_conditions"] = {
                "states": [
                    {"X": [[float(v) for v in row] for row in X], "y": [float(v) for v in y]}
                    for X, y in self.ic_states
                ]
            }
        else:
            d["initial_conditions"] = {"count": self.ic_count, "seed": self.ic_seed}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            game = _parse_game(d["game"])
            integ = d.get("integrator", {})
            field_name = d.get("field", integ.get("field", "replicator"))
            kind = FieldKind(field_name)
            ic = d.get("initial_conditions", {"count": 10, "seed": 0})
            if "states" in ic:
                states = tuple(
                    (np.asarray(s["X"], dtype=float), np.asarray(s["y"], dtype=float))
                    for s in ic["states"]
                )
                count, seed = len(states), 0
            else:
                states = None
                count, seed = int(ic["count"]), int(ic.get("seed", 0))
            probes = tuple(Probe.from_dict(p) for p in d.get("probes", []))
            return cls(
                game=game,
                field_kind=kind,
                integrator=IntegratorConfig.from_dict(integ),
                ic_count=count,
                ic_seed=seed,
                ic_states=states,
                probes=probes,
                record_stride=int(d.get("record_stride", 1)),
                convergence_tol=float(d.get("convergence_tol", 1e-3)),
                window_frac=float(d.get("window_frac", 0.1)),
                output_path=d.get("output_path"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


def _parse_game(d: dict) -> PayoffMatrix:
    if "generator" in d:
        name = d["generator"]
        if name in ("matching-pennies", "mp"):
            return make_matching_pennies()
        if name in ("coupled-matching-pennies", "coupled"):
            return make_coupled_matching_pennies(d["variant"], d.get("seed"))
        raise ValueError(f"unknown game generator {name!r}")
    return PayoffMatrix.from_dict(d)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Where a trajectory ended up relative to the reference equilibrium."""

    converged_y: bool
    converged_x_st: bool
    final_dist_y: float
    final_dist_x_st: float
    dist_to_eq_set: Optional[float]
    osc_amplitude_y: float
    time_to_tol: Optional[float]
    aborted_at: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "converged_y": self.converged_y,
            "converged_x_st": self.converged_x_st,
            "final_dist_y": self.final_dist_y,
            "final_dist_x_st": self.final_dist_x_st,
            "dist_to_eq_set": self.dist_to_eq_set,
            "osc_amplitude_y": self.osc_amplitude_y,
            "time_to_tol": self.time_to_tol,
            "aborted_at": self.aborted_at,
        }


def sample_interior_point(rng: np.random.Generator, m: int, eps: float = _IC_EPS) -> np.ndarray:
    """Uniform draw from the simplex shrunk so every entry is >= eps."""
    w = rng.exponential(1.0, size=m)
    w /= w.sum()
    return eps + (1.0 - m * eps) * w


def sample_initial_conditions(game: PayoffMatrix, count: int, seed: int,
                              kind: FieldKind = FieldKind.REPLICATOR,
                              eps: float = _IC_EPS):
    """Seeded batch of interior starts; memoryless runs get equalized columns."""
    rng = np.random.default_rng(seed)
    mx, my = game.rows, game.cols
    X0 = np.empty((count, mx, my))
    y0 = np.empty((count, my))
    for t in range(count):
        if kind is FieldKind.MEMORYLESS:
            X0[t] = sample_interior_point(rng, mx, eps)[:, None]
        else:
            for j in range(my):
                X0[t, :, j] = sample_interior_point(rng, mx, eps)
        y0[t] = sample_interior_point(rng, my, eps)
    return X0, y0


def _segment_distance_y(y: np.ndarray, segment: EquilibriumSegmentParam) -> float:
    """min over r in [0,1] of the sup-distance from y to the segment, by
    coarse grid plus one local refinement."""

    def dist(rs):
        pts = rs[:, None] * segment.base_y[None, :] + (1.0 - rs[:, None]) * segment.alt_y[None, :]
        return np.max(np.abs(pts - y[None, :]), axis=1)

    rs = np.linspace(0.0, 1.0, 201)
    d = dist(rs)
    i = int(np.argmin(d))
    lo, hi = max(0.0, rs[i] - 0.005), min(1.0, rs[i] + 0.005)
    rs2 = np.linspace(lo, hi, 201)
    return float(min(d[i], np.min(dist(rs2))))


def detect_convergence(traj: Trajectory, eq: EquilibriumInfo,
                       segment: Optional[EquilibriumSegmentParam],
                       tol: float, window_frac: float = 0.1,
                       aborted_at: Optional[float] = None) -> ConvergenceReport:
    """Distances, trailing oscillation, and first-entry time for one trajectory."""
    y_path = traj.y
    x_st_path = traj.stationary_path()
    dist_y = np.max(np.abs(y_path - eq.y_star[None, :]), axis=1)
    dist_x = np.max(np.abs(x_st_path - eq.x_star[None, :]), axis=1)

    k = traj.n_samples
    w = max(2, int(np.ceil(window_frac * k)))
    tail_y = y_path[-w:]
    tail_x = x_st_path[-w:]
    osc_y = float(np.max(tail_y.max(axis=0) - tail_y.min(axis=0)))
    osc_x = float(np.max(tail_x.max(axis=0) - tail_x.min(axis=0)))

    final_dist_y = float(dist_y[-1])
    final_dist_x = float(dist_x[-1])
    if final_dist_y >= tol:
        time_to_tol = None
    else:
        above = np.flatnonzero(dist_y >= tol)
        time_to_tol = float(traj.t[0]) if above.size == 0 else float(traj.t[above[-1] + 1])

    return ConvergenceReport(
        converged_y=bool(final_dist_y < tol and osc_y < tol),
        converged_x_st=bool(final_dist_x < tol and osc_x < tol),
        final_dist_y=final_dist_y,
        final_dist_x_st=final_dist_x,
        dist_to_eq_set=None if segment is None else _segment_distance_y(y_path[-1], segment),
        osc_amplitude_y=osc_y,
        time_to_tol=time_to_tol,
        aborted_at=aborted_at,
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(path, traj: Trajectory, frame: DiagnosticsFrame) -> None:
    """One row per recorded sample; schema is self-describing via the header."""
    k, mx, my = traj.X.shape
    header = ["t"]
    header += [f"x_{i + 1}|{j + 1}" for j in range(my) for i in range(mx)]
    header += [f"y_{j + 1}" for j in range(my)]
    header += [f"xst_{i + 1}" for i in range(mx)]
    header += ["u_st", "D", "D_rate"]
    for lbl in frame.probe_labels:
        header += [f"H_{lbl}", f"Hrate_{lbl}"]
    header += ["exploitability", "q1", "q2", "definiteness", "clamped"]

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for s in range(k):
            row = [_fmt(traj.t[s])]
            row += [_fmt(v) for v in traj.X[s].T.ravel()]
            row += [_fmt(v) for v in traj.y[s]]
            row += [_fmt(v) for v in frame.x_st[s]]
            row += [_fmt(frame.payoff[s]), _fmt(frame.D[s]), _fmt(frame.D_rate[s])]
            for p in range(len(frame.probe_labels)):
                row += [_fmt(frame.H[s, p]), _fmt(frame.H_rate[s, p])]
            row.append(_fmt(frame.exploitability[s]))
            if frame.q is None:
                row += ["", ""]
            else:
                row += [_fmt(frame.q[s, 0]), _fmt(frame.q[s, 1])]
            row.append(str(int(frame.definiteness_code[s])))
            row.append(str(int(traj.clamped[s])))
            wr.writerow(row)


@dataclass(frozen=True, eq=False)
class ExperimentRun:
    """Full result of run_experiment (the list API plus context)."""

    config: ExperimentConfig
    eq: EquilibriumInfo
    segment: Optional[EquilibriumSegmentParam]
    results: list  # (Trajectory, ConvergenceReport) pairs
    frames: list   # DiagnosticsFrame per trajectory
    q_min_delta: Optional[np.ndarray]
    summary: dict


def run_experiment(cfg: ExperimentConfig, full: bool = False):
    """Integrate all initial conditions and write per-trajectory CSVs.

    Returns the list of (Trajectory, ConvergenceReport) pairs, or the whole
    ExperimentRun when full is set.  Diverged trajectories are kept (frozen at
    their last finite state) and marked by aborted_at in their report.
    """
    game = cfg.game
    eq = solve_nash(game)
    segment = equilibrium_segment(game, eq)
    probe_list = list(default_probe_deltas(game.rows))
    probe_list += [(p.label, p.resolve(eq)) for p in cfg.probes]

    if cfg.ic_states is not None:
        X0 = np.stack([np.asarray(X, dtype=float) for X, _ in cfg.ic_states])
        y0 = np.stack([np.asarray(y, dtype=float) for _, y in cfg.ic_states])
    else:
        X0, y0 = sample_initial_conditions(game, cfg.ic_count, cfg.ic_seed, cfg.field_kind)

    track_q = (
        game.rows == 2 and game.cols == 2
        and (cfg.integrator.floor_eps > 0.0 or cfg.field_kind is not FieldKind.GDA)
    )
    batch = integrate_batch(
        game, cfg.field_kind, X0, y0, cfg.integrator,
        record_every=cfg.record_stride, track_q=track_q,
    )

    outdir = None
    if cfg.output_path is not None:
        outdir = Path(cfg.output_path)
        outdir.mkdir(parents=True, exist_ok=True)

    results = []
    frames = []
    traj_meta = []
    for idx in range(batch.n_trajectories):
        traj = batch.single(idx)
        frame = trajectory_diagnostics(
            game, eq, traj.t, traj.X, traj.y, cfg.field_kind, probe_list
        )
        aborted = None
        if batch.fail_step[idx] >= 0:
            aborted = float(batch.fail_step[idx] * cfg.integrator.dt)
        report = detect_convergence(
            traj, eq, segment, cfg.convergence_tol, cfg.window_frac, aborted
        )
        csv_name = None
        if outdir is not None:
            csv_name = f"trajectory_{idx:03d}.csv"
            write_trajectory_csv(outdir / csv_name, traj, frame)
        meta = {"index": idx, "csv": csv_name, **report.to_dict()}
        if track_q:
            meta["q_min_step_delta"] = float(batch.q_min_delta[idx])
        traj_meta.append(meta)
        results.append((traj, report))
        frames.append(frame)

    summary = {
        "config": cfg.to_dict(),
        "equilibrium": {
            "x_star": [float(v) for v in eq.x_star],
            "y_star": [float(v) for v in eq.y_star],
            "value": eq.value,
            "degenerate": eq.degenerate,
        },
        "n_trajectories": batch.n_trajectories,
        "n_converged_y": sum(1 for _, r in results if r.converged_y),
        "n_converged_x_st": sum(1 for _, r in results if r.converged_x_st),
        "n_aborted": int(np.sum(batch.fail_step >= 0)),
        "trajectories": traj_meta,
    }
    if outdir is not None:
        with open(outdir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if full:
        return ExperimentRun(
            config=cfg, eq=eq, segment=segment, results=results,
            frames=frames,
            q_min_delta=batch.q_min_delta if track_q else None,
            summary=summary,
        )
    return results


# Preset experiments.  Horizons, counts, and seeds are choices of this
# artifact (recorded here and in each summary.json); the coupled-interior
# seed is pinned so the sampled game has a full-support equilibrium.
_PRESETS = {
    "mp": dict(
        game=("matching-pennies", None, None),
        field=FieldKind.REPLICATOR,
        dt=0.01, horizon=500.0, count=100, seed=2024,
        stride=100, tol=1e-3,
    ),
    "mp-gda": dict(
        game=("matching-pennies", None, None),
        field=FieldKind.GDA,
        dt=0.01, horizon=500.0, count=20, seed=2025,
        stride=100, tol=1e-3,
    ),
    "cmp-interior": dict(
        game=("coupled", "interior", 9),
        field=FieldKind.REPLICATOR,
        dt=0.01, horizon=1500.0, count=10, seed=2026,
        stride=100, tol=1e-2,
    ),
    "cmp-continuous": dict(
        game=("coupled", "continuous", None),
        field=FieldKind.REPLICATOR,
        dt=0.01, horizon=3000.0, count=10, seed=2027,
        stride=100, tol=1e-2,
    ),
    "cmp-boundary": dict(
        game=("coupled", "boundary", None),
        field=FieldKind.REPLICATOR,
        dt=0.01, horizon=500.0, count=10, seed=2028,
        stride=100, tol=1e-2,
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_config(name: str, output_path: Optional[str] = None,
                  **overrides) -> ExperimentConfig:
    """Named experiment configurations (seeds and horizons included).

    overrides may set seed, dt, horizon, field (name or FieldKind), count.
    """
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    p = _PRESETS[name]
    gen, variant, gseed = p["game"]
    game = make_matching_pennies() if gen == "matching-pennies" else \
        make_coupled_matching_pennies(variant, gseed)
    kind = overrides.get("field", p["field"])
    if not isinstance(kind, FieldKind):
        kind = FieldKind(kind)
    return ExperimentConfig(
        game=game,
        field_kind=kind,
        integrator=IntegratorConfig(
            dt=float(overrides.get("dt", p["dt"])),
            horizon=float(overrides.get("horizon", p["horizon"])),
        ),
        ic_count=int(overrides.get("count", p["count"])),
        ic_seed=int(overrides.get("seed", p["seed"])),
        record_stride=p["stride"],
        convergence_tol=p["tol"],
        output_path=output_path,
    )
