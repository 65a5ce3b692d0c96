"""Ergodic constant and profile solvers.

Two approximation routes converge to the same limit and bracket it in
practice:

* state-constraint runs on boxes of increasing half-width R give constants
  that decrease toward the limit (upper route);
* periodic runs on tori large enough that the capped source min(f, cutoff)
  is only modified where f already exceeds the cutoff give constants that
  approach the limit from the other side (lower route; the monotonicity of
  this family is not guaranteed, so the bracket is labeled heuristic).

Constants are read off as the long-time slope of the window mean of the
monotone evolution started from zero; the profile is the evolution minus the
linear growth, normalized to vanish at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketInconsistencyError, ConfigError
from .grid import (
    Grid,
    GridFunction,
    grids_equal,
    make_grid,
    restrict,
    sample,
)
from .parabolic import default_window_half_width, evolve
from .problem import InitialSpec, ProblemSpec, torus_half_width
from .scheme import SchemeConfig, residual_ergodic, residual_scaled_super

#: stopping rule defaults: slope Cauchy within this tolerance over this many
#: consecutive slope-window samples, capped at max_time_factor slope windows
SLOPE_TOL = 1e-3
SLOPE_CONSECUTIVE = 5
MAX_TIME_FACTOR = 50.0


@dataclass
class ErgodicApprox:
    kind: str  # "state_constraint" or "periodic"
    half_width: float  # box half-width, or the torus cell half-width
    constant: float
    profile: GridFunction  # normalized: zero at the origin
    residual_norm: float
    converged: bool
    stop_info: dict = field(default_factory=dict)
    cutoff: float | None = None  # periodic runs: the source cap

    def __post_init__(self):
        if abs(self.profile.value_at_origin()) > 1e-12:
            raise ConfigError("profile must vanish at the origin")


@dataclass
class ErgodicConstantEstimate:
    value: float
    upper_bracket: float  # smallest state-constraint constant
    lower_bracket: float  # largest periodic constant (heuristic side)
    gap: float
    sources: list  # (kind, half_width, constant) per contributing run
    lower_is_heuristic: bool = True
    notes: list = field(default_factory=list)


def _slope_ladder(trace, slope_window):
    """Slopes at whole multiples of the slope window, oldest first."""
    out = []
    for s in trace.samples:
        k = s.t / slope_window
        if abs(k - round(k)) < 1e-9 and not math.isnan(s.slope):
            out.append((s.t, s.slope))
    return out


def _run_to_stationary_slope(
    problem: ProblemSpec,
    grid: Grid,
    scheme: SchemeConfig,
    slope_tol: float,
    consecutive: int,
    max_time: float,
    slope_window: float,
    window_half_width,
    blow_up_cap: float,
    source: GridFunction | None = None,
    min_time: float = 0.0,
):
    state = None
    t_block = slope_window * (consecutive + 1)
    reason = "max_time reached"
    converged = False
    src = source if source is not None else sample(problem.source, grid)
    while True:
        t_target = min((state.t if state else 0.0) + t_block, max_time)
        t_target = max(t_target, min(min_time, max_time))
        state = evolve(
            problem,
            grid,
            t_target,
            scheme,
            state,
            initial=None if state else sample(InitialSpec("zero"), grid),
            source=src,
            slope_window=slope_window,
            window_half_width=window_half_width,
            blow_up_cap=blow_up_cap,
        )
        slopes = _slope_ladder(state.trace, slope_window)
        if len(slopes) >= consecutive + 1 and state.t >= min_time - 1e-9:
            diffs = [
                abs(slopes[-j][1] - slopes[-j - 1][1]) for j in range(1, consecutive + 1)
            ]
            if max(diffs) < slope_tol:
                converged = True
                reason = "slope stabilized"
                break
        if state.t >= max_time - 1e-9:
            break
    slopes = _slope_ladder(state.trace, slope_window)
    return state, slopes, converged, reason


def _finish_run(
    problem, grid, state, slopes, converged, reason, kind, cutoff=None, slope_tol=SLOPE_TOL
):
    constant = slopes[-1][1]
    vals = state.u.values - constant * state.t
    origin = (grid.nodes_per_axis - 1) // 2
    vals = vals - vals[(origin,) * grid.dim]
    profile = GridFunction(grid, vals)
    src = sample(problem.source, grid)
    if cutoff is not None:
        src = GridFunction(grid, np.minimum(src.values, cutoff))
    res = residual_ergodic(constant, profile, src, problem.m, "central")
    w = min(default_window_half_width(res.grid), res.grid.half_width)
    h = res.grid.spacing
    w = max(int(round(w / h)), 1) * h
    res_k = restrict(res, w)
    return ErgodicApprox(
        kind=kind,
        half_width=grid.half_width,
        constant=constant,
        profile=profile,
        residual_norm=float(np.max(np.abs(res_k.values))),
        converged=converged,
        stop_info={
            "reason": reason,
            "final_time": state.t,
            "slope_history": slopes,
            "slope_tol": slope_tol,
        },
        cutoff=cutoff,
    )


def solve_state_constraint(
    problem: ProblemSpec,
    half_width: float,
    spacing: float,
    scheme: SchemeConfig | None = None,
    *,
    slope_tol: float = SLOPE_TOL,
    consecutive: int = SLOPE_CONSECUTIVE,
    max_time: float | None = None,
    min_time: float = 0.0,
    slope_window: float = 1.0,
    window_half_width=None,
    blow_up_cap: float = 1e3,
) -> ErgodicApprox:
    """State-constraint pair on the box of the given half-width.

    Evolves from zero data until the window-mean slope is Cauchy, then peels
    off the linear growth.  A non-stabilizing slope returns converged=False
    with the slope history attached rather than raising.
    """
    if half_width <= 0:
        raise ConfigError("half_width must be positive")
    scheme = scheme or SchemeConfig()
    max_time = max_time if max_time is not None else MAX_TIME_FACTOR * slope_window
    grid = make_grid("box", half_width, spacing, problem.dim)
    state, slopes, converged, reason = _run_to_stationary_slope(
        problem,
        grid,
        scheme,
        slope_tol,
        consecutive,
        max_time,
        slope_window,
        window_half_width,
        blow_up_cap,
        min_time=min_time,
    )
    return _finish_run(
        problem,
        grid,
        state,
        slopes,
        converged,
        reason,
        "state_constraint",
        slope_tol=slope_tol,
    )


def solve_periodic(
    problem: ProblemSpec,
    cutoff: float,
    spacing: float,
    scheme: SchemeConfig | None = None,
    *,
    slope_tol: float = SLOPE_TOL,
    consecutive: int = SLOPE_CONSECUTIVE,
    max_time: float | None = None,
    min_time: float = 0.0,
    slope_window: float = 1.0,
    window_half_width=None,
    blow_up_cap: float = 1e3,
) -> ErgodicApprox:
    """Periodic pair on the torus sized so the cap only acts where f >= cutoff.

    The cell half-width S satisfies f >= cutoff outside radius S, and the
    source on the cell is min(f, cutoff).
    """
    src_min = float(
        np.min(sample(problem.source, make_grid("box", 1.0, 0.25, problem.dim)).values)
    )
    if cutoff <= src_min:
        raise ConfigError("cutoff must exceed the source minimum")
    scheme = scheme or SchemeConfig()
    max_time = max_time if max_time is not None else MAX_TIME_FACTOR * slope_window
    S = torus_half_width(problem.source, cutoff)
    grid = make_grid("torus", S, spacing, problem.dim)
    f_full = sample(problem.source, grid)
    f_cell = GridFunction(grid, np.minimum(f_full.values, cutoff))
    state, slopes, converged, reason = _run_to_stationary_slope(
        problem,
        grid,
        scheme,
        slope_tol,
        consecutive,
        max_time,
        slope_window,
        window_half_width,
        blow_up_cap,
        source=f_cell,
        min_time=min_time,
    )
    return _finish_run(
        problem,
        grid,
        state,
        slopes,
        converged,
        reason,
        "periodic",
        cutoff=cutoff,
        slope_tol=slope_tol,
    )


def estimate_lambda_star(
    state_runs,
    periodic_runs=(),
    bracket_tol: float = 1e-2,
) -> ErgodicConstantEstimate:
    """Combine both routes into one bracketed estimate.

    Upper bracket: smallest state-constraint constant.  Lower bracket: the
    largest periodic constant (heuristic; the theory only gives convergence,
    not one-sidedness, for finite cutoffs).  With three or more state runs
    the value is the 1/R-extrapolated intercept clipped into the bracket;
    otherwise the bracket midpoint, or the single available constant.
    """
    state_runs = sorted(state_runs, key=lambda r: r.half_width)
    if not state_runs:
        raise ConfigError("need at least one state-constraint run")
    notes = []
    upper = min(r.constant for r in state_runs)
    sources = [(r.kind, r.half_width, r.constant) for r in state_runs]
    sources += [(r.kind, r.half_width, r.constant) for r in periodic_runs]
    if periodic_runs:
        lower_raw = max(r.constant for r in periodic_runs)
        if lower_raw > upper + bracket_tol:
            raise BracketInconsistencyError(
                f"lower bracket {lower_raw:.6g} exceeds upper bracket "
                f"{upper:.6g} beyond tolerance {bracket_tol}; refine the runs"
            )
        lower = min(lower_raw, upper)
        if lower_raw > upper:
            notes.append(
                "lower bracket clamped to the upper one (crossing within tolerance)"
            )
        gap = upper - lower_raw
    else:
        lower = -math.inf
        gap = math.inf
        notes.append("no periodic runs: lower bracket unavailable")

    if len(state_runs) >= 3:
        inv_r = np.array([1.0 / r.half_width for r in state_runs])
        lams = np.array([r.constant for r in state_runs])
        slope, intercept = np.polyfit(inv_r, lams, 1)
        value = float(intercept)
        notes.append("value from linear extrapolation in 1/R")
        if math.isfinite(lower):
            value = min(max(value, lower), upper)
        else:
            value = min(value, upper)
    elif periodic_runs:
        value = 0.5 * (lower + upper)
        notes.append("value from bracket midpoint")
    else:
        value = upper
        notes.append("single-route estimate; gap unbounded")
    return ErgodicConstantEstimate(
        value=value,
        upper_bracket=upper,
        lower_bracket=lower,
        gap=gap,
        sources=sources,
        notes=notes,
    )


@dataclass
class ScalingCheckReport:
    mu: float
    residual: float
    threshold: float
    passed: bool


def scaling_check_super(
    approx: ErgodicApprox,
    ergodic_constant: float,
    source: GridFunction,
    m: float,
    *,
    resolution_constant: float = 10.0,
    slack: float = 2e-3,
    mu_tol: float = 1e-2,
) -> ScalingCheckReport:
    """Supersolution scaling check with mu = 1 + lambda_R - lambda*.

    The scaled profile mu*phi_R must satisfy the supersolution inequality up
    to the scheme's consistency error: residual >= -(C h^2 + slack), the
    slack covering the slope stopping tolerance of the profile run.
    """
    if approx.kind != "state_constraint":
        raise ConfigError("supersolution scaling applies to state-constraint runs")
    mu = 1.0 + approx.constant - ergodic_constant
    if mu < 1.0 - mu_tol:
        raise BracketInconsistencyError(
            f"lambda_R {approx.constant:.6g} fell below the ergodic constant "
            f"{ergodic_constant:.6g} beyond tolerance; brackets are inconsistent"
        )
    mu = max(mu, 1.0)
    res = residual_scaled_super(mu, approx.constant, approx.profile, source, m)
    h = approx.profile.grid.spacing
    thr = -(resolution_constant * h * h + slack)
    return ScalingCheckReport(mu=mu, residual=res, threshold=thr, passed=res >= thr)


@dataclass
class ArgmaxReport:
    node: tuple
    point: tuple
    f_at_argmax: float
    bound: float
    passed: bool
    on_boundary: bool


def argmax_confinement(
    candidate: GridFunction,
    approx: ErgodicApprox,
    ergodic_constant: float,
    lambda_1: float,
    source: GridFunction,
    tol: float = 0.05,
) -> ArgmaxReport:
    """Locate argmax(candidate - mu*phi_R) and test f there against 1 + lambda_1.

    Coercivity forces the maximizer into a fixed ball; the certificate is
    f(x_R) <= 1 + lambda_1 + tol.  Ties within 1e-12 prefer the origin, then
    the smallest lexicographic index.  A maximizer on the boundary ring is
    flagged: the scaled profile should dominate near the wall.
    """
    prof = approx.profile
    if not grids_equal(candidate.grid, prof.grid):
        raise ConfigError("candidate must live on the run's grid")
    mu = max(1.0 + approx.constant - ergodic_constant, 1.0)
    diff = candidate.values - mu * prof.values
    best = float(np.max(diff))
    tied = np.argwhere(diff >= best - 1e-12)
    origin = np.array(prof.grid.origin_index)
    node = None
    for cand in tied:
        if np.array_equal(cand, origin):
            node = tuple(origin)
            break
    if node is None:
        node = tuple(tied[np.lexsort(tied.T[::-1])][0])
    coords = prof.grid.axis_coords()
    point = tuple(float(coords[i]) for i in node)
    n = prof.grid.n_store
    on_boundary = (not prof.grid.periodic) and any(
        i == 0 or i == n - 1 for i in node
    )
    f_at = float(source.values[node])
    bound = 1.0 + lambda_1 + tol
    return ArgmaxReport(
        node=node,
        point=point,
        f_at_argmax=f_at,
        bound=bound,
        passed=(f_at <= bound) and not on_boundary,
        on_boundary=on_boundary,
    )
