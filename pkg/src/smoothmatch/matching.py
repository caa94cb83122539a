"""The match step: criterion evaluation and parameter estimation.

Given grid evaluations of the smoothed trajectory and its derivative, the
criterion is the Riemann sum

    M(eta) = sum_k ||xhat'(s_k) - F(xhat(s_k), eta)||^2 * w(s_k) * dt.

For right-hand sides linear in the parameters the minimizer has a closed form
(weighted linear least squares); otherwise a derivative-free search is used:
golden-section for one parameter, multistart Nelder-Mead for several.  An
integration-based ordinary least squares baseline and an RSS bandwidth sweep
round out the module.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import optimize

from ._validation import check_in_box, check_positive
from .exceptions import (
    EstimationFailedError,
    IdentifiabilityError,
    IntegrationDivergedError,
    ParameterError,
    SmoothMatchError,
)
from .kernels import Kernel
from .smoothing import ObservationSet, SmootherOutput, evaluate_on_grid
from .systems import OdeSystem, states_at_times
from .weights import WeightFunction

__all__ = [
    "CriterionSpec",
    "EstimateReport",
    "criterion_value",
    "j_theta",
    "solve_linear",
    "minimize_criterion",
    "estimate_auto",
    "ols_estimate",
    "select_bandwidth_rss",
    "default_window",
    "make_grid",
    "CONDITION_LIMIT",
]


def default_window(times):
    """Observation window inferred from an equidistant design.

    One design spacing before the first sample, up to the last sample: the
    designs t_i = i*h on [0, n*h] map back to (0, n*h).
    """
    times = np.asarray(times, dtype=float)
    return float(times[0] - (times[1] - times[0])), float(times[-1])


def make_grid(t_lo, t_hi, step=None, points=250):
    """Equidistant criterion grid t_lo + k*step covering [t_lo, t_hi).

    Without an explicit step the window is divided into ``points`` cells,
    which reproduces a 0.1-step grid on a 25-unit window.
    """
    t_lo = float(t_lo)
    t_hi = float(t_hi)
    if t_hi <= t_lo:
        raise ParameterError("window must have positive length")
    if step is None:
        step = (t_hi - t_lo) / points
    step = check_positive(step, "grid step")
    m = int(math.floor((t_hi - t_lo) / step - 1e-9)) + 1
    return t_lo + step * np.arange(m)

# Beyond this condition number the normal equations are treated as singular
# rather than pseudo-inverted: local identifiability presumes a nonsingular
# Gram matrix.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CriterionSpec:
    """Discretization of the matching criterion.

    ``grid`` must be equidistant with positive step and must cover the support
    of ``weight``; ``kernel``/``bandwidth`` record how the smoother inputs were
    produced.
    """

    weight: WeightFunction
    grid: np.ndarray
    kernel: Kernel
    bandwidth: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ParameterError("criterion grid must be a 1-D sequence of >= 2 points")
        steps = np.diff(grid)
        dt = steps[0]
        if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
            raise ParameterError("criterion grid must be equidistant with positive step")
        lo, hi = self.weight.support
        if grid[0] > lo + 1e-9 or grid[-1] < hi - 1e-9:
            raise ParameterError(
                f"grid [{grid[0]:g}, {grid[-1]:g}] does not cover the weight support "
                f"({lo:g}, {hi:g})"
            )
        object.__setattr__(self, "grid", grid)

    @cached_property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @cached_property
    def weights_on_grid(self) -> np.ndarray:
        return np.asarray(self.weight.eval(self.grid), dtype=float)


@dataclass(frozen=True)
class EstimateReport:
    """Result of one estimation run.

    ``criterion_at_min`` is the matching criterion for the smoothing-based
    methods and the residual sum of squares for method "ols".
    """

    theta_hat: np.ndarray
    criterion_at_min: float
    method: str
    wall_time: float
    iterations: int
    bandwidth_used: Optional[float] = None
    j_theta_condition: Optional[float] = None
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "theta_hat", np.asarray(self.theta_hat, dtype=float))
        object.__setattr__(self, "warnings", tuple(self.warnings))


def _check_grids_match(sm: SmootherOutput, spec: CriterionSpec):
    if not np.array_equal(sm.grid, spec.grid):
        raise ParameterError("smoother grid and criterion grid differ")


def _criterion_raw(sm, system, eta, spec):
    """Criterion without box validation; lets optimizers probe freely."""
    resid = sm.xhat_prime - system.rhs(sm.xhat, eta)
    return float(np.sum(np.sum(resid * resid, axis=1) * spec.weights_on_grid) * spec.dt)


def criterion_value(sm: SmootherOutput, system: OdeSystem, eta, spec: CriterionSpec) -> float:
    """Discretized matching criterion at parameter value ``eta`` (in-box)."""
    _check_grids_match(sm, spec)
    eta = check_in_box(eta, system.param_box, "eta")
    return _criterion_raw(sm, system, eta, spec)


def j_theta(system: OdeSystem, x_on_grid, theta, spec: CriterionSpec) -> np.ndarray:
    """Weighted Gram matrix of parameter gradients along a trajectory.

    sum_k dF/dtheta(x_k)^T dF/dtheta(x_k) w(s_k) dt — symmetric positive
    semidefinite; its condition number is the identifiability diagnostic
    attached to estimate reports.
    """
    theta = check_in_box(theta, system.param_box)
    x_on_grid = np.asarray(x_on_grid, dtype=float)
    if x_on_grid.shape != (spec.grid.size, system.dim_state):
        raise ParameterError("x_on_grid must be a (len(grid), d) matrix")
    jp = system.jac_param(x_on_grid, theta)
    mat = np.einsum("kdp,kdq,k->pq", jp, jp, spec.weights_on_grid) * spec.dt
    return 0.5 * (mat + mat.T)


def _condition_number(mat):
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(mat))
    return cond


def solve_linear(sm: SmootherOutput, system: OdeSystem, spec: CriterionSpec) -> EstimateReport:
    """Closed-form weighted linear least squares for linear-in-parameter systems.

    Solves the p x p normal equations built from the linear form's design
    matrix on the smoothed states.  The solution is clipped to the parameter
    box (with a warning) and the criterion is re-evaluated there.

    Raises
    ------
    IdentifiabilityError
        If the normal-equations matrix has condition number above 1e12.
    ParameterError
        If the system has no linear form or the weight vanishes on the grid.
    """
    start = time.perf_counter()
    if system.linear_form is None:
        raise ParameterError(f"system {system.name!r} has no linear-in-parameter form")
    _check_grids_match(sm, spec)
    w = spec.weights_on_grid
    if not np.any(w > 0):
        raise ParameterError("weight function vanishes on the entire criterion grid")

    G = system.linear_form.matrix(sm.xhat)
    g0 = system.linear_form.offset(sm.xhat)
    A = np.einsum("kdp,kdq,k->pq", G, G, w) * spec.dt
    r = np.einsum("kdp,kd,k->p", G, sm.xhat_prime - g0, w) * spec.dt
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(r))):
        raise EstimationFailedError("normal equations contain non-finite entries")

    cond = _condition_number(A)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IdentifiabilityError(
            f"normal equations singular (condition number {cond:.3e} > {CONDITION_LIMIT:.0e}); "
            "the weighted identifiability Gram matrix is numerically rank-deficient "
            "along the smoothed trajectory"
        )
    theta = np.linalg.solve(A, r)

    warnings = []
    box = system.param_box
    clipped = np.clip(theta, box[:, 0], box[:, 1])
    if np.any(clipped != theta):
        which = np.nonzero(clipped != theta)[0].tolist()
        warnings.append(f"solution clipped to parameter box in components {which}")
        theta = clipped

    value = criterion_value(sm, system, theta, spec)
    return EstimateReport(
        theta_hat=theta,
        criterion_at_min=value,
        method="linear-ls",
        wall_time=time.perf_counter() - start,
        iterations=0,
        bandwidth_used=sm.bandwidth,
        j_theta_condition=cond,
        warnings=tuple(warnings),
    )


def _safe(fun):
    """Wrap an objective: exceptions and non-finite values become +inf."""

    def wrapped(x):
        try:
            val = fun(x)
        except (SmoothMatchError, ArithmeticError, ValueError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    return wrapped


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(fun, lo, hi, tol, max_iter, scan_points=33):
    """Golden-section minimization on [lo, hi] after a coarse bracketing scan.

    The deterministic scan guards against non-unimodal criteria (the
    derivative-matching criterion of rational-in-parameter systems need not be
    unimodal over the whole box); refinement inside the located cell is
    textbook golden-section down to |interval| <= tol.

    Returns (x, fx, iterations, converged).
    """
    fun = _safe(fun)
    xs = np.linspace(lo, hi, scan_points)
    fs = np.array([fun(np.array([x])) for x in xs])
    if not np.any(np.isfinite(fs)):
        raise EstimationFailedError("criterion is non-finite on the whole parameter box")
    best = int(np.argmin(fs))
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, scan_points - 1)]

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = fun(np.array([c]))
    fd = fun(np.array([d]))
    iterations = 0
    while (b - a) > tol and iterations < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(np.array([c]))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(np.array([d]))
        iterations += 1
    x = c if fc <= fd else d
    fx = min(fc, fd)
    candidates = [(fs[best], xs[best]), (fx, x)]
    fx, x = min(candidates, key=lambda pair: pair[0])
    return float(x), float(fx), iterations, (b - a) <= tol


def _lattice_starts(box, n_starts):
    """First ``n_starts`` cells (lexicographic) of a k^p midpoint lattice."""
    p = box.shape[0]
    k = max(1, math.ceil(n_starts ** (1.0 / p)))
    axes = [box[i, 0] + (np.arange(k) + 0.5) * (box[i, 1] - box[i, 0]) / k for i in range(p)]
    starts = list(itertools.islice(itertools.product(*axes), n_starts))
    return [np.array(s) for s in starts]


def _nelder_mead_multistart(fun, box, n_starts, tol, max_iter, extra_starts=()):
    """Best-of Nelder-Mead restarts; out-of-box proposals are penalized +inf.

    Ties in the final value resolve to the lowest start index, keeping the
    result deterministic however restarts are scheduled.
    """
    raw = _safe(fun)

    def penalized(x):
        if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
            return np.inf
        return raw(x)

    lattice = _lattice_starts(box, n_starts) if n_starts > 0 else []
    starts = lattice + [np.asarray(s, dtype=float) for s in extra_starts]
    if not starts:
        raise ParameterError("at least one optimizer start is required")
    best = None
    total_iters = 0
    for index, x0 in enumerate(starts):
        res = optimize.minimize(
            penalized,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": tol,
                "fatol": max(tol * tol, 1e-15),
                "maxiter": max_iter,
                "maxfev": 4 * max_iter,
            },
        )
        total_iters += int(res.nit)
        if not np.isfinite(res.fun):
            continue
        key = (res.fun, index)
        if best is None or key < best[0]:
            best = (key, res)
    if best is None:
        raise EstimationFailedError("no optimizer start produced a finite criterion value")
    res = best[1]
    return np.asarray(res.x, dtype=float), float(res.fun), total_iters, bool(res.success)


def _default_opts(system, opts):
    defaults = {
        "multistart": min(3**system.dim_param, 81),
        "tol": 1e-7,
        "max_iter": 500 * system.dim_param,
    }
    if opts:
        unknown = set(opts) - {"multistart", "tol", "max_iter", "extra_starts", "step", "t0"}
        if unknown:
            raise ParameterError(f"unknown estimation options {sorted(unknown)}")
        defaults.update(opts)
    defaults["tol"] = check_positive(defaults["tol"], "tol")
    defaults["multistart"] = int(defaults["multistart"])
    # multistart = 0 is allowed when explicit extra starts are supplied.
    if defaults["multistart"] < 1 and not defaults.get("extra_starts"):
        raise ParameterError("multistart must be at least 1")
    return defaults


def minimize_criterion(
    sm: SmootherOutput, system: OdeSystem, spec: CriterionSpec, opts=None
) -> EstimateReport:
    """Minimize the matching criterion over the parameter box.

    Golden-section search for one-parameter systems, multistart Nelder-Mead
    (midpoint lattice starts, +inf box penalty) otherwise.  When the system
    carries a linear form, the closed-form solution is computed as a
    cross-check and any disagreement beyond 1e-5 is recorded in the report
    warnings.
    """
    start = time.perf_counter()
    _check_grids_match(sm, spec)
    opts = _default_opts(system, opts)
    box = system.param_box
    if not np.all(np.isfinite(box)):
        raise ParameterError("parameter box must be bounded for derivative-free search")
    if not np.any(spec.weights_on_grid > 0):
        raise ParameterError("weight function vanishes on the entire criterion grid")

    def fun(eta):
        return _criterion_raw(sm, system, eta, spec)

    if system.dim_param == 1:
        x, fx, iterations, converged = _golden_section(
            fun, box[0, 0], box[0, 1], opts["tol"], opts["max_iter"]
        )
        theta = np.array([x])
        method = "golden-section"
    else:
        theta, fx, iterations, converged = _nelder_mead_multistart(
            fun, box, opts["multistart"], opts["tol"], opts["max_iter"]
        )
        method = "nelder-mead"

    warnings = []
    if not converged:
        warnings.append("not-converged: iteration budget exhausted")
    if system.linear_form is not None:
        try:
            closed = solve_linear(sm, system, spec)
            gap = float(np.max(np.abs(closed.theta_hat - theta)))
            warnings.append(f"closed-form cross-check: max component difference {gap:.3e}")
            if gap > 1e-5:
                warnings.append("closed-form cross-check exceeds 1e-5")
        except SmoothMatchError as exc:
            warnings.append(f"closed-form cross-check unavailable: {exc}")

    cond = _condition_number(j_theta(system, sm.xhat, theta, spec))
    return EstimateReport(
        theta_hat=theta,
        criterion_at_min=fx,
        method=method,
        wall_time=time.perf_counter() - start,
        iterations=iterations,
        bandwidth_used=sm.bandwidth,
        j_theta_condition=cond,
        warnings=tuple(warnings),
    )


def estimate_auto(sm, system, spec, opts=None) -> EstimateReport:
    """Dispatch: closed form when a linear form exists, search otherwise."""
    if system.linear_form is not None:
        return solve_linear(sm, system, spec)
    return minimize_criterion(sm, system, spec, opts)


def ols_estimate(obs: ObservationSet, system: OdeSystem, xi, opts=None) -> EstimateReport:
    """Integration-based ordinary least squares baseline.

    Minimizes sum_ij (Y_ij - x_eta_j(t_i))^2 over the parameter box, where
    x_eta comes from fixed-step RK4 started at the known initial state ``xi``.
    Diverging integrations receive +inf (penalized, not fatal).  Besides
    ``multistart``/``tol``/``max_iter``, the options accept ``step`` (RK4 step),
    ``t0`` (initial time, default the observation t_origin), and
    ``extra_starts`` (additional Nelder-Mead starting points).
    """
    start = time.perf_counter()
    opts = _default_opts(system, opts)
    t0 = float(opts.get("t0", obs.t_origin))
    step = opts.get("step")
    if step is None:
        step = 1e-3 * (obs.times[-1] - t0)
    step = check_positive(step, "step")
    xi = np.asarray(xi, dtype=float)

    def rss(eta):
        try:
            states = states_at_times(system, eta, xi, t0, obs.times, step=step)
        except IntegrationDivergedError:
            return np.inf
        return float(np.sum((obs.y - states) ** 2))

    box = system.param_box
    if system.dim_param == 1:
        x, fx, iterations, converged = _golden_section(
            rss, box[0, 0], box[0, 1], opts["tol"], opts["max_iter"]
        )
        theta = np.array([x])
    else:
        theta, fx, iterations, converged = _nelder_mead_multistart(
            rss, box, opts["multistart"], opts["tol"], opts["max_iter"],
            extra_starts=opts.get("extra_starts", ()),
        )

    warnings = () if converged else ("not-converged: iteration budget exhausted",)
    return EstimateReport(
        theta_hat=theta,
        criterion_at_min=fx,
        method="ols",
        wall_time=time.perf_counter() - start,
        iterations=iterations,
        warnings=warnings,
    )


def select_bandwidth_rss(
    obs: ObservationSet,
    system: OdeSystem,
    xi,
    candidates,
    spec_template: CriterionSpec,
    opts=None,
    step=None,
    t0=None,
):
    """Pick the bandwidth whose estimate best refits the raw observations.

    For each candidate b the full pipeline runs (smooth with b, estimate,
    integrate at the estimate from ``xi``, compute the RSS at the sample
    times); the argmin is returned together with the full table.  Ties break
    to the smallest bandwidth (undersmoothing is the safe direction for
    parameter estimation).
    """
    candidates = np.atleast_1d(np.asarray(candidates, dtype=float))
    if candidates.size == 0:
        raise ParameterError("candidate bandwidth set must be nonempty")
    if np.any(candidates <= 0):
        raise ParameterError("candidate bandwidths must be positive")
    candidates = np.sort(candidates)
    t0 = float(obs.t_origin if t0 is None else t0)
    if step is None:
        step = 1e-3 * (obs.times[-1] - t0)

    rows = []
    best = None
    for b in candidates:
        row = {"bandwidth": float(b)}
        try:
            sm = evaluate_on_grid(obs, spec_template.kernel, b, spec_template.grid)
            spec_b = replace(spec_template, bandwidth=float(b))
            report = estimate_auto(sm, system, spec_b, opts)
            states = states_at_times(system, report.theta_hat, xi, t0, obs.times, step=step)
            rss = float(np.sum((obs.y - states) ** 2))
            row.update(rss=rss, theta_hat=report.theta_hat.tolist(), method=report.method)
        except SmoothMatchError as exc:
            row.update(rss=np.inf, theta_hat=None, error=str(exc))
            rows.append(row)
            continue
        rows.append(row)
        if best is None or rss < best[0]:
            best = (rss, float(b))
    if best is None:
        raise EstimationFailedError("every candidate bandwidth failed")
    return best[1], rows
