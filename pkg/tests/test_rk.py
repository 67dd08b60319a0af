import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qpinn.errors import StiffnessError
from qpinn.problems import (
    duffing_rhs,
    riccati_rhs,
    system2_closed_form,
    SYSTEM_A1,
    SYSTEM_A2,
)
from qpinn.rk import rk_solve

KINDS = ["rk3_bogacki_shampine", "rk45_dormand_prince"]


@pytest.mark.parametrize("kind", KINDS)
def test_constant_solution(kind):
    y = rk_solve(kind, lambda t, y: np.zeros_like(y), 2.5, np.linspace(0, 3, 7))
    assert np.all(y == 2.5)


@pytest.mark.parametrize("kind", KINDS)
def test_exponential(kind):
    y = rk_solve(kind, lambda t, y: y, 1.0, [0.0, 0.3, 1.0], tol=1e-9)
    assert abs(y[-1, 0] - np.e) < 1e-8
    assert abs(y[1, 0] - np.exp(0.3)) < 1e-8


def test_linear_system_against_closed_form():
    def rhs(x, u):
        return np.array([SYSTEM_A1 * u[1] + SYSTEM_A2 * u[0], -SYSTEM_A2 * u[1] - SYSTEM_A1 * u[0]])

    grid = np.linspace(0, 0.9, 100)
    exact = np.column_stack(system2_closed_form(grid))
    for kind in KINDS:
        assert np.max(np.abs(rk_solve(kind, rhs, [0.5, 0.0], grid, 1e-9) - exact)) < 1e-6


def test_grid_points_hit_and_output_shape():
    grid = np.array([0.0, 0.0, 0.1, 0.1, 0.5])
    y = rk_solve("rk45_dormand_prince", lambda t, y: np.array([1.0, 2.0]), [0.0, 0.0], grid)
    assert y.shape == (5, 2)
    assert np.allclose(y[:, 0], grid, atol=1e-14) and np.allclose(y[:, 1], 2 * grid, atol=1e-14)


def test_input_validation():
    with pytest.raises(ValueError):
        rk_solve("euler", lambda t, y: y, 1.0, [0, 1])
    with pytest.raises(ValueError):
        rk_solve(KINDS[0], lambda t, y: y, 1.0, [1, 0])
    with pytest.raises(ValueError):
        rk_solve(KINDS[0], lambda t, y: y, 1.0, [0, 1], tol=0)


def test_blow_up_reports_stiffness():
    # y' = y^2 from y(0)=1 blows up at t=1
    with pytest.raises(StiffnessError):
        rk_solve(KINDS[1], lambda t, y: y * y, 1.0, [0.0, 2.0], tol=1e-9)


def test_riccati_matches_independent_integrator():
    grid = np.linspace(0, 0.9, 100)
    ours = rk_solve("rk3_bogacki_shampine", riccati_rhs, 0.75, grid, 1e-9)[:, 0]
    ref = solve_ivp(riccati_rhs, (0, 0.9), [0.75], t_eval=grid, method="DOP853", rtol=1e-12, atol=1e-12).y[0]
    assert np.max(np.abs(ours - ref)) < 1e-7


def test_duffing_matches_independent_integrator():
    t = np.linspace(0, 20, 50)
    ours = rk_solve("rk45_dormand_prince", duffing_rhs, [0.0, 0.0], t, 1e-9)
    ref = solve_ivp(duffing_rhs, (0, 20), [0.0, 0.0], t_eval=t, method="DOP853", rtol=1e-12, atol=1e-12).y.T
    assert np.max(np.abs(ours - ref)) < 1e-7


def test_deterministic():
    grid = np.linspace(0, 0.9, 30)
    a = rk_solve("rk3_bogacki_shampine", riccati_rhs, 0.75, grid, 1e-8)
    b = rk_solve("rk3_bogacki_shampine", riccati_rhs, 0.75, grid, 1e-8)
    assert np.array_equal(a, b)
