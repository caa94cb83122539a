"""ODE system definitions, builtin examples, and a fixed-step RK4 integrator.

The integrator exists only to generate synthetic data and to serve the
integration-based least-squares baseline; the matching estimator itself never
integrates.  All right-hand sides and Jacobians must broadcast over leading
axes (state arrays of shape (..., d)), which keeps grid evaluation of the
criterion vectorized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._validation import as_float_array, check_in_box, check_positive, check_times
from .exceptions import IntegrationDivergedError, ParameterError

__all__ = [
    "LinearForm",
    "OdeSystem",
    "Trajectory",
    "rk4_integrate",
    "states_at_times",
    "jacobian_selfcheck",
    "lotka_volterra",
    "van_der_pol",
    "exponential",
    "get_system",
    "load_linear_system",
    "BUILTIN_SYSTEMS",
]


@dataclass(frozen=True)
class LinearForm:
    """Linear-in-parameter decomposition F(x, theta) = matrix(x) @ theta + offset(x).

    ``matrix`` maps states (..., d) to (..., d, p); ``offset`` maps to (..., d).
    """

    matrix: Callable[[np.ndarray], np.ndarray]
    offset: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OdeSystem:
    """An autonomous ODE system x'(t) = F(x(t), theta).

    Attributes
    ----------
    name : str
    dim_state : int
        State dimension d.
    dim_param : int
        Parameter dimension p.
    rhs : callable
        F(x, theta): (..., d) x (p,) -> (..., d).
    jac_param : callable
        dF/dtheta: (..., d) x (p,) -> (..., d, p).
    jac_state : callable
        dF/dx: (..., d) x (p,) -> (..., d, d).
    linear_form : LinearForm, optional
        Present when F is linear in theta; enables the closed-form match step.
    param_box : ndarray of shape (p, 2)
        Compact parameter box, lo <= hi componentwise.
    """

    name: str
    dim_state: int
    dim_param: int
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_param: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_state: Callable[[np.ndarray, np.ndarray], np.ndarray]
    param_box: np.ndarray
    linear_form: Optional[LinearForm] = None

    def __post_init__(self):
        box = np.asarray(self.param_box, dtype=float)
        if box.shape != (self.dim_param, 2):
            raise ParameterError(
                f"param_box must have shape ({self.dim_param}, 2), got {box.shape}"
            )
        if np.any(box[:, 0] > box[:, 1]):
            raise ParameterError("param_box must satisfy lo <= hi componentwise")
        object.__setattr__(self, "param_box", box)


@dataclass(frozen=True)
class Trajectory:
    """Integrator output: states sampled along strictly increasing times."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = as_float_array(self.times, "times", ndim=1)
        states = np.asarray(self.states, dtype=float)
        if states.shape[0] != times.size:
            raise ParameterError("states row count must equal times length")
        if not np.all(np.isfinite(states)):
            raise ParameterError("states contain non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)


def _rk4_step(rhs, theta, x, h):
    k1 = rhs(x, theta)
    k2 = rhs(x + 0.5 * h * k1, theta)
    k3 = rhs(x + 0.5 * h * k2, theta)
    k4 = rhs(x + h * k3, theta)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(system, theta, xi, t0, t1, step) -> Trajectory:
    """Integrate the system with classical fixed-step 4th-order Runge-Kutta.

    The trajectory is sampled at t0, t0+step, ..., with a shortened final step
    landing exactly on t1.  Global error is O(step^4) for smooth right-hand
    sides.

    Raises
    ------
    IntegrationDivergedError
        If any state becomes non-finite; carries the failure time.
    ParameterError
        If t1 <= t0, the step is invalid, or theta lies outside the box.
    """
    theta = check_in_box(theta, system.param_box)
    xi = as_float_array(xi, "xi", ndim=1)
    if xi.size != system.dim_state:
        raise ParameterError(f"xi must have length {system.dim_state}, got {xi.size}")
    t0 = float(t0)
    t1 = float(t1)
    if not t1 > t0:
        raise ParameterError(f"t1 must exceed t0, got ({t0}, {t1})")
    step = check_positive(step, "step")
    if step > (t1 - t0) * (1.0 + 1e-12):
        raise ParameterError("step must not exceed t1 - t0")

    n_regular = int(np.ceil((t1 - t0) / step - 1e-12))
    times = t0 + step * np.arange(n_regular)
    times = np.append(times, t1)

    states = np.empty((times.size, xi.size))
    states[0] = xi
    x = xi
    # Overflow is how blow-up manifests; it is detected and reported, not warned about.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(times.size - 1):
            h = times[k + 1] - times[k]
            x = _rk4_step(system.rhs, theta, x, h)
            if not np.all(np.isfinite(x)):
                raise IntegrationDivergedError(times[k + 1])
            states[k + 1] = x
    return Trajectory(times=times, states=states)


def states_at_times(system, theta, xi, t0, sample_times, step=None) -> np.ndarray:
    """Integrate from (t0, xi) and evaluate the state at each sample time.

    Sample times that coincide with the RK4 lattice are taken from the dense
    output directly; others are filled by cubic Hermite interpolation between
    the bracketing nodes (node states plus rhs slopes), whose local error
    matches the integrator's order.
    """
    sample_times = check_times(sample_times, "sample_times")
    t0 = float(t0)
    if sample_times[0] < t0 - 1e-12:
        raise ParameterError("sample times must not precede t0")
    if step is None:
        step = 1e-3 * (sample_times[-1] - t0)
    traj = rk4_integrate(system, theta, xi, t0, sample_times[-1], step)

    idx = np.searchsorted(traj.times, sample_times)
    idx = np.clip(idx, 1, traj.times.size - 1)
    on_node = np.abs(traj.times[idx] - sample_times) <= 1e-9 * step
    out = np.empty((sample_times.size, system.dim_state))
    out[on_node] = traj.states[idx[on_node]]

    off = ~on_node
    if np.any(off):
        theta = np.asarray(theta, dtype=float)
        lo = idx[off] - 1
        hi = idx[off]
        tau0 = traj.times[lo]
        tau1 = traj.times[hi]
        h = (tau1 - tau0)[:, None]
        s = ((sample_times[off] - tau0) / (tau1 - tau0))[:, None]
        x0 = traj.states[lo]
        x1 = traj.states[hi]
        f0 = system.rhs(x0, theta)
        f1 = system.rhs(x1, theta)
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out[off] = h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1
    return out


def jacobian_selfcheck(system, x, theta, h=1e-5):
    """Compare analytic Jacobians against central finite differences of rhs.

    Returns the pair (err_param, err_state) of maximum absolute deviations.
    """
    h = check_positive(h, "h")
    x = as_float_array(x, "x", ndim=1)
    theta = check_in_box(theta, system.param_box)

    fd_param = np.empty((system.dim_state, system.dim_param))
    for j in range(system.dim_param):
        dtheta = np.zeros_like(theta)
        dtheta[j] = h
        fd_param[:, j] = (system.rhs(x, theta + dtheta) - system.rhs(x, theta - dtheta)) / (2 * h)
    err_param = float(np.max(np.abs(system.jac_param(x, theta) - fd_param)))

    fd_state = np.empty((system.dim_state, system.dim_state))
    for j in range(system.dim_state):
        dx = np.zeros_like(x)
        dx[j] = h
        fd_state[:, j] = (system.rhs(x + dx, theta) - system.rhs(x - dx, theta)) / (2 * h)
    err_state = float(np.max(np.abs(system.jac_state(x, theta) - fd_state)))
    return err_param, err_state


# ---------------------------------------------------------------------------
# Builtin systems
# ---------------------------------------------------------------------------


def lotka_volterra() -> OdeSystem:
    """Predator-prey system: x1' = a*x1 - b*x1*x2, x2' = -c*x2 + d*x1*x2.

    Linear in theta = (a, b, c, d), so the closed-form match step applies.
    Default box [0.01, 5]^4.
    """

    def rhs(x, theta):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        out = np.empty_like(x)
        cross = x1 * x2
        out[..., 0] = theta[0] * x1 - theta[1] * cross
        out[..., 1] = -theta[2] * x2 + theta[3] * cross
        return out

    def design_matrix(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        z = np.zeros_like(x1)
        row1 = np.stack([x1, -x1 * x2, z, z], axis=-1)
        row2 = np.stack([z, z, -x2, x1 * x2], axis=-1)
        return np.stack([row1, row2], axis=-2)

    def jac_param(x, theta):
        return design_matrix(x)

    def jac_state(x, theta):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        row1 = np.stack([theta[0] - theta[1] * x2, -theta[1] * x1], axis=-1)
        row2 = np.stack([theta[3] * x2, -theta[2] + theta[3] * x1], axis=-1)
        return np.stack([row1, row2], axis=-2)

    def offset(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    return OdeSystem(
        name="lotka-volterra",
        dim_state=2,
        dim_param=4,
        rhs=rhs,
        jac_param=jac_param,
        jac_state=jac_state,
        param_box=np.array([[0.01, 5.0]] * 4),
        linear_form=LinearForm(matrix=design_matrix, offset=offset),
    )


def van_der_pol() -> OdeSystem:
    """Van der Pol oscillator: x1' = (x1 - x1^3/3 + x2)/theta, x2' = -theta*x1.

    Not linear in theta (the 1/theta term), so estimation goes through the
    derivative-free minimizer.  The box [0.1, 5] excludes the theta = 0
    singularity; evaluation at theta = 0 is a domain error, not a NaN.
    """

    def _check(theta):
        if theta[0] == 0.0:
            raise ParameterError("van der Pol rhs is undefined at theta = 0")

    def rhs(x, theta):
        _check(theta)
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        out = np.empty_like(x)
        out[..., 0] = (x1 - x1**3 / 3.0 + x2) / theta[0]
        out[..., 1] = -theta[0] * x1
        return out

    def jac_param(x, theta):
        _check(theta)
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        col1 = -(x1 - x1**3 / 3.0 + x2) / theta[0] ** 2
        return np.stack([col1, -x1], axis=-1)[..., None]

    def jac_state(x, theta):
        _check(theta)
        x = np.asarray(x, dtype=float)
        x1 = x[..., 0]
        inv = 1.0 / theta[0]
        row1 = np.stack([(1.0 - x1**2) * inv, np.full_like(x1, inv)], axis=-1)
        row2 = np.stack([np.full_like(x1, -theta[0]), np.zeros_like(x1)], axis=-1)
        return np.stack([row1, row2], axis=-2)

    return OdeSystem(
        name="van-der-pol",
        dim_state=2,
        dim_param=1,
        rhs=rhs,
        jac_param=jac_param,
        jac_state=jac_state,
        param_box=np.array([[0.1, 5.0]]),
    )


def exponential() -> OdeSystem:
    """Scalar growth x' = theta*x: the minimal identifiable example (d = p = 1)."""

    def rhs(x, theta):
        return theta[0] * np.asarray(x, dtype=float)

    def jac_param(x, theta):
        return np.asarray(x, dtype=float)[..., None]

    def jac_state(x, theta):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape + (1,), theta[0])

    def design_matrix(x):
        return np.asarray(x, dtype=float)[..., None]

    def offset(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    return OdeSystem(
        name="exponential",
        dim_state=1,
        dim_param=1,
        rhs=rhs,
        jac_param=jac_param,
        jac_state=jac_state,
        param_box=np.array([[-3.0, 3.0]]),
        linear_form=LinearForm(matrix=design_matrix, offset=offset),
    )


BUILTIN_SYSTEMS = {
    "lotka-volterra": lotka_volterra,
    "van-der-pol": van_der_pol,
    "exponential": exponential,
}


def get_system(system) -> OdeSystem:
    """Resolve an OdeSystem from an instance, a builtin name, or a JSON file path."""
    if isinstance(system, OdeSystem):
        return system
    if not isinstance(system, (str, bytes)) and not hasattr(system, "__fspath__"):
        raise ParameterError(f"system must be an OdeSystem, name, or path, got {system!r}")
    if system in BUILTIN_SYSTEMS:
        return BUILTIN_SYSTEMS[system]()
    try:
        return load_linear_system(system)
    except FileNotFoundError:
        raise ParameterError(
            f"unknown system {system!r}; expected one of {sorted(BUILTIN_SYSTEMS)} "
            f"or a path to a linear-form JSON file"
        ) from None


def load_linear_system(path) -> OdeSystem:
    """Load a user-defined linear-in-parameter system from a JSON file.

    The document is flat JSON with keys ``name``, ``dim_state``, ``dim_param``,
    ``matrix`` (d x p entry expressions in x1..xd), ``offset`` (d expressions),
    and ``param_box`` (p [lo, hi] pairs).  Expressions are parsed by sympy;
    state Jacobians are derived symbolically.
    """
    import sympy

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"malformed system file {path}: {exc}") from None

    try:
        name = str(doc["name"])
        d = int(doc["dim_state"])
        p = int(doc["dim_param"])
        matrix_src = doc["matrix"]
        offset_src = doc["offset"]
        box = np.asarray(doc["param_box"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"invalid system file {path}: {exc}") from None
    if len(matrix_src) != d or any(len(row) != p for row in matrix_src) or len(offset_src) != d:
        raise ParameterError(f"invalid system file {path}: matrix/offset shapes disagree")

    xs = sympy.symbols(f"x1:{d + 1}")
    ths = sympy.symbols(f"th1:{p + 1}")
    allowed = set(xs)

    def parse(src):
        try:
            expr = sympy.sympify(src, locals={str(s): s for s in xs})
        except (sympy.SympifyError, SyntaxError) as exc:
            raise ParameterError(f"invalid expression {src!r} in {path}: {exc}") from None
        extra = expr.free_symbols - allowed
        if extra:
            raise ParameterError(f"expression {src!r} uses unknown symbols {extra}")
        return expr

    G_expr = sympy.Matrix([[parse(entry) for entry in row] for row in matrix_src])
    g0_expr = sympy.Matrix([parse(entry) for entry in offset_src])
    rhs_expr = G_expr * sympy.Matrix(ths) + g0_expr
    jac_state_expr = rhs_expr.jacobian(xs)

    def lambdify_matrix(expr_matrix, with_theta):
        rows, cols = expr_matrix.shape
        args = list(xs) + (list(ths) if with_theta else [])
        fns = [
            [sympy.lambdify(args, expr_matrix[i, j], modules="numpy") for j in range(cols)]
            for i in range(rows)
        ]

        def evaluate(x, theta=None):
            x = np.asarray(x, dtype=float)
            comps = [x[..., k] for k in range(d)]
            if with_theta:
                comps = comps + list(np.asarray(theta, dtype=float))
            base = np.zeros(x.shape[:-1])
            vals = [
                [np.asarray(fns[i][j](*comps), dtype=float) + base for j in range(cols)]
                for i in range(rows)
            ]
            return np.stack([np.stack(row, axis=-1) for row in vals], axis=-2)

        return evaluate

    G_fn = lambdify_matrix(G_expr, with_theta=False)
    g0_fn = lambdify_matrix(g0_expr, with_theta=False)
    rhs_fn = lambdify_matrix(rhs_expr, with_theta=True)
    jac_state_fn = lambdify_matrix(jac_state_expr, with_theta=True)

    def matrix(x):
        return G_fn(x)

    def offset(x):
        return g0_fn(x)[..., 0]

    def rhs(x, theta):
        return rhs_fn(x, theta)[..., 0]

    def jac_param(x, theta):
        return G_fn(x)

    def jac_state(x, theta):
        return jac_state_fn(x, theta)

    return OdeSystem(
        name=name,
        dim_state=d,
        dim_param=p,
        rhs=rhs,
        jac_param=jac_param,
        jac_state=jac_state,
        param_box=box,
        linear_form=LinearForm(matrix=matrix, offset=offset),
    )
