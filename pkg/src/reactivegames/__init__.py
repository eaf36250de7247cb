"""Learning dynamics, divergences, and Lyapunov diagnostics for zero-sum
games in which one player reacts to the opponent's previous action and the
other plays memorylessly."""

from .game import (
    CouplingVariant,
    EquilibriumCheck,
    EquilibriumInfo,
    EquilibriumSegmentParam,
    PayoffMatrix,
    equilibrium_segment,
    make_coupled_matching_pennies,
    make_matching_pennies,
    solve_nash,
    verify_equilibrium,
)
from .strategy import (
    JointState,
    MixedStrategy,
    ReactiveStrategy,
    StationaryState,
    expected_payoff,
    mixed_payoff,
    stationary_state,
    stationary_strategy,
)
from .dynamics import (
    BatchTrajectory,
    FieldKind,
    IntegrationDiverged,
    IntegratorConfig,
    Trajectory,
    gda_field,
    grad_x,
    grad_y,
    integrate,
    integrate_batch,
    memoryless_replicator_field,
    replicator_field,
    rk4_step,
)
from .diagnostics import (
    DEFINITENESS_CODES,
    Definiteness,
    DefinitenessVerdict,
    DiagnosticsFrame,
    DiagnosticsSample,
    InfiniteDivergenceError,
    classical_divergence,
    conditional_sum_divergence,
    default_probe_deltas,
    divergence_rate,
    exploitability,
    gda_divergence,
    gda_lyapunov_H,
    kl_divergence,
    log_odds_q,
    lyapunov_H,
    lyapunov_rate,
    reduce_for_zero_sum,
    trajectory_diagnostics,
    zero_sum_definiteness,
    zero_sum_vector,
)
from .experiments import (
    ConvergenceReport,
    ExperimentConfig,
    ExperimentRun,
    PRESET_NAMES,
    Probe,
    detect_convergence,
    preset_config,
    run_experiment,
    sample_initial_conditions,
    sample_interior_point,
    write_trajectory_csv,
)

__version__ = "0.1.0"
