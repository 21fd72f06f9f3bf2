"""Alternating optimization driver for the worst-case SCNR design.

Each outer iteration runs the transmit minorant loop, refreshes the
alignment unitaries and level variables, solves the combiner problem
globally via Dinkelbach, and records the penalized objective at a state
where alignment and levels are optimal for the current pair (u, w).  Both
the combiner step and the recorded objective are guarded so the trace is
nondecreasing by construction; a guard event means the candidate combiner
was rejected because it did not improve the penalized objective.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, PenaltyFailureError
from .forms import (
    ReceiveBeamformer,
    StackedBeamformer,
    build_forms,
    penalized_objective,
    sinr,
    worst_case_scnr,
)
from .arrays import rx_steering
from .receive import build_fractional, dinkelbach_solve
from .scenario import generate_channels
from .solvers import solve_sinr_power_min
from .transmit import optimal_alignment, transmit_inner_loop, update_levels

_FULL_POWER_RTOL = 1e-4


@dataclass(frozen=True)
class Solution:
    """Result of one alternating-optimization run."""

    u_star: StackedBeamformer
    w_star: ReceiveBeamformer
    objective_trace: np.ndarray
    scnr_trace: np.ndarray
    outer_iters: int
    status: str
    guard_events: tuple = ()
    sinr_db: np.ndarray = None
    output_indices: tuple = (0, 0)


def initialize_beamformers(channels, config):
    """Feasible full-power start from the classical power-minimization program.

    The minimum-power solution meets every SINR threshold with equality;
    scaling it uniformly up to the power budget preserves feasibility
    because each SINR is increasing in a common positive scale.
    """
    gammas = config.sinr_thresholds_linear()
    blocks, p_min = solve_sinr_power_min(channels.h, gammas, config.noise_w, config.solver)
    p_max = config.p_max_w
    if p_min > p_max * (1.0 + 1e-9):
        raise InfeasibleError(
            f"SINR thresholds need {p_min:.3e} W, above the budget {p_max:.3e} W")
    scale = math.sqrt(p_max / p_min)
    return StackedBeamformer(scale * blocks.ravel(), n_tx=config.geometry.n_tx)


def _refreshed_state(w, u, channels, config):
    """Forms, alignment, levels, and objective, all coherent at (u, w)."""
    eta = config.solver.penalty_eta
    forms = build_forms(w, channels, config)
    alignments = optimal_alignment(forms, u)
    levels = update_levels(forms, u, eta)
    objective = penalized_objective(u, w, alignments, levels, forms, eta)
    return forms, alignments, levels, objective


def run_alternating(config):
    """Run the full alternating optimization for one scenario.

    Returns a Solution whose objective trace is nondecreasing; status is
    ``converged`` when the change fell below ``solver.epsilon``,
    ``max-iters`` when the outer cap was reached, or ``penalty-failure``
    when the transmit step could not zero its power slack (the best
    iterate so far is still returned).
    """
    opts = config.solver
    channels = generate_channels(config)
    u = initialize_beamformers(channels, config)
    w = ReceiveBeamformer(
        rx_steering(config.geometry, config.target_angles[0]) / np.sqrt(config.geometry.n_rx))

    forms, alignments, levels, objective = _refreshed_state(w, u, channels, config)
    objective_trace = [objective]
    scnr_trace = [worst_case_scnr(u, w, channels, config)]
    guard_events = []
    status = "max-iters"
    outer = 0

    for outer in range(1, opts.outer_d_max + 1):
        try:
            inner = transmit_inner_loop(u, forms, alignments, levels, config, opts)
        except PenaltyFailureError:
            status = "penalty-failure"
            outer -= 1
            break
        u = inner.u

        # Refresh alignment and levels at (u, w); their updates are
        # globally optimal, so the objective cannot decrease.
        alignments = optimal_alignment(forms, u)
        levels = update_levels(forms, u, opts.penalty_eta)
        keep_objective = penalized_objective(u, w, alignments, levels, forms,
                                             opts.penalty_eta)

        instance = build_fractional(u, channels, config)
        dk = dinkelbach_solve(instance, opts, w_init=w)
        cand = _refreshed_state(dk.w, u, channels, config)
        if cand[3] >= keep_objective:
            forms, alignments, levels, objective = cand
            w = dk.w
        else:
            # Candidate combiner did not improve the penalized objective;
            # keep the previous one so the trace stays monotone.
            objective = keep_objective
            guard_events.append(outer)

        objective_trace.append(objective)
        scnr_trace.append(worst_case_scnr(u, w, channels, config))
        if abs(objective_trace[-1] - objective_trace[-2]) <= opts.epsilon:
            status = "converged"
            break

    sinr_db = np.array([
        10.0 * math.log10(sinr(k, u, channels, config))
        for k in range(config.k_users)
    ])
    return Solution(
        u_star=u, w_star=w,
        objective_trace=np.asarray(objective_trace), scnr_trace=np.asarray(scnr_trace),
        outer_iters=outer, status=status, guard_events=tuple(guard_events),
        sinr_db=sinr_db, output_indices=(max(outer - 1, 0), outer),
    )


def full_power_check(solution, config):
    """True when the final transmit power matches the budget to 1e-4 relative."""
    return abs(solution.u_star.power() - config.p_max_w) <= _FULL_POWER_RTOL * config.p_max_w
