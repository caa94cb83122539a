import numpy as np
import pytest

import smoothmatch as sm


@pytest.fixture(scope="session")
def paper_times():
    """Equidistant design t_i = 0.5*i, i = 1..50, on the [0, 25] window."""
    return 0.5 * np.arange(1, 51)


@pytest.fixture(scope="session")
def kernel4():
    return sm.kernel_gegenbauer4()


@pytest.fixture(scope="session")
def weight25():
    return sm.make_plateau_weight(0.0, 25.0)


@pytest.fixture(scope="session")
def grid25():
    return sm.make_grid(0.0, 25.0)


@pytest.fixture(scope="session")
def spec25(weight25, grid25, kernel4):
    return sm.CriterionSpec(weight=weight25, grid=grid25, kernel=kernel4, bandwidth=1.2)


def plug_in_smoother(system, theta, xi, grid, bandwidth, kernel_order=4):
    """SmootherOutput holding the true solution and true derivative on the grid.

    The criterion is exactly zero there at the true parameters, which makes
    this the reference input for recovery tests.
    """
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    interior = grid[grid > grid[0]]
    states = sm.states_at_times(system, theta, xi, grid[0], interior)
    if interior.size < grid.size:
        states = np.vstack([xi, states])
    deriv = system.rhs(states, theta)
    return sm.SmootherOutput(
        grid=grid,
        xhat=states,
        xhat_prime=deriv,
        bandwidth=bandwidth,
        kernel_order=kernel_order,
    )
