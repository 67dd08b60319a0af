"""Benchmark differential equations: residuals, grids, boundary data, and reference solutions.

Residual functions return both the residual and its partial derivatives with
respect to the model channels it consumes (``"f"``, ``"dx"``, ``"dxx"``,
``"lap"``); the trainer chains those with the circuit gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UndefinedMetricError
from .rk import rk_solve

PROBLEM_IDS = ("riccati", "system2", "linear2nd", "duffing", "poisson2d")

RICCATI_U0 = 0.75
SYSTEM_A1, SYSTEM_A2 = 5.0, 3.0
SYSTEM_U0 = (0.5, 0.0)
LINEAR_X_END = 0.99
DUFFING = dict(alpha=1.0, beta=1.0, delta=0.1, gamma=0.1, omega=0.4, T=20.0, l=0.9)
POISSON_END = 0.9

RICCATI_TOL = 1e-9
DUFFING_TOL = 1e-9


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------

def riccati_residual(u_m, du_dx, x):
    return du_dx - 4.0 * u_m + 6.0 * u_m**2 - np.sin(50.0 * x) - u_m * np.cos(25.0 * x) + 0.5


def riccati_rhs(x, u):
    return 4.0 * u - 6.0 * u**2 + np.sin(50.0 * x) + u * np.cos(25.0 * x) - 0.5


def system2_residuals(u1, du1_dx, u2, du2_dx, x):
    a1, a2 = SYSTEM_A1, SYSTEM_A2
    return du1_dx - a1 * u2 - a2 * u1, du2_dx + a2 * u2 + a1 * u1


def system2_closed_form(x):
    """Exact solution of the linear system with u1(0)=0.5, u2(0)=0."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.cos(4 * x) + 0.375 * np.sin(4 * x), -0.625 * np.sin(4 * x)


def linear2nd_residual(d2u_dx2, x):
    return d2u_dx2 + 4.0 * np.pi**2 * np.sin(2.0 * np.pi * x)


def duffing_coefficients() -> tuple[float, float]:
    """((l/T)^2, (l/T) delta) of the time-rescaled equation."""
    s = DUFFING["l"] / DUFFING["T"]
    return s * s, s * DUFFING["delta"]


def duffing_residual_scaled(u, du_dtau, d2u_dtau2, tau):
    p = DUFFING
    c2, c1 = duffing_coefficients()
    forcing = p["gamma"] * np.cos(p["omega"] * p["T"] * np.asarray(tau) / p["l"])
    return c2 * d2u_dtau2 + c1 * du_dtau + p["alpha"] * u + p["beta"] * u**3 - forcing


def duffing_rhs(t, y):
    p = DUFFING
    u, v = y
    return np.array([v, p["gamma"] * np.cos(p["omega"] * t) - p["delta"] * v - p["alpha"] * u - p["beta"] * u**3])


def poisson_u_true(x, y):
    return (0.1 * np.sin(2 * np.pi * x) + np.tanh(10 * x)) * np.sin(2 * np.pi * y)


def poisson_g(x, y):
    """Laplacian of the exact solution, written out term by term."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    t = np.tanh(10 * x)
    sech2 = 1.0 - t * t
    uxx = (-0.4 * np.pi**2 * np.sin(2 * np.pi * x) - 200.0 * t * sech2) * np.sin(2 * np.pi * y)
    return uxx - 4 * np.pi**2 * poisson_u_true(x, y)


def poisson_residual(laplacian, x, y):
    return laplacian - poisson_g(x, y)


# --------------------------------------------------------------------------
# reference solutions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleSolution:
    """Reference solution; ``evaluate`` returns one array per unknown function."""

    evaluator: Callable
    provenance: str  # "analytic", "closed-form" or "runge-kutta"

    def evaluate(self, points) -> list[np.ndarray]:
        return self.evaluator(np.asarray(points, dtype=float))


def _sorted_solve(solve_on_grid, x):
    """Run an initial-value solver on sorted query points starting at 0, then restore order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.any(x < 0):
        raise ValueError("initial-value references are only defined for x >= 0")
    order = np.argsort(x, kind="stable")
    grid = np.concatenate([[0.0], x[order]])
    values = solve_on_grid(grid)[1:]
    out = np.empty_like(values)
    out[order] = values
    return out


def riccati_oracle(tol: float = RICCATI_TOL) -> OracleSolution:
    def ev(x):
        return [_sorted_solve(lambda g: rk_solve("rk3_bogacki_shampine", riccati_rhs, RICCATI_U0, g, tol)[:, 0], x)]

    return OracleSolution(ev, "runge-kutta")


def duffing_oracle(tol: float = DUFFING_TOL) -> OracleSolution:
    scale = DUFFING["T"] / DUFFING["l"]

    def ev(tau):
        return [_sorted_solve(lambda g: rk_solve("rk45_dormand_prince", duffing_rhs, [0.0, 0.0], g * scale, tol)[:, 0], tau)]

    return OracleSolution(ev, "runge-kutta")


def system2_oracle() -> OracleSolution:
    return OracleSolution(lambda x: list(system2_closed_form(x.reshape(-1))), "closed-form")


def linear2nd_oracle() -> OracleSolution:
    return OracleSolution(lambda x: [np.sin(2 * np.pi * x.reshape(-1))], "analytic")


def poisson_oracle() -> OracleSolution:
    return OracleSolution(lambda p: [poisson_u_true(p[:, 0], p[:, 1])], "analytic")


# --------------------------------------------------------------------------
# the metric
# --------------------------------------------------------------------------

def r_squared(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError(f"r_squared needs equal non-empty vectors, got {pred.shape} and {truth.shape}")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for a constant reference")
    return 1.0 - float(np.sum((pred - truth) ** 2)) / ss_tot


def one_minus_r2(pred, truth) -> float:
    return 1.0 - r_squared(pred, truth)


# --------------------------------------------------------------------------
# problem definitions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryTerm:
    """One boundary error ``scale * channel(grid[index]) - target`` of model ``model``."""

    model: int
    channel: str
    index: int
    target: float
    scale: float = 1.0


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    grid: np.ndarray  # (P,) or (P, 2)
    n_models: int
    channels: tuple[str, ...]  # channels each model must provide on the grid
    residual: Callable  # (values: list[dict], grid) -> list of (residual, {(model, channel): partial})
    oracle: OracleSolution
    boundary: tuple[BoundaryTerm, ...] = ()
    floating: tuple[float, ...] | None = None  # initial value per model, pinned at grid[0]
    n_qubits: int = 3  # per input variable
    depth: int = 7
    layout: str = "RC"
    observable: str = "sum"
    observable_weights: tuple[float, ...] = ()
    weighting: str = "constant"
    alpha_f: float = 1.0
    alpha_b: float = 1.0
    learning_rate: float = 0.1
    iterations: int = 300
    domain: tuple[float, float] = (0.0, 0.9)

    @property
    def is_2d(self) -> bool:
        return self.grid.ndim == 2

    @property
    def n_equations(self) -> int:
        return 2 if self.id == "system2" else 1


def _riccati_residual(values, x):
    v = values[0]
    u, du = v["f"], v["dx"]
    r = riccati_residual(u, du, x)
    return [(r, {(0, "f"): -4.0 + 12.0 * u - np.cos(25.0 * x), (0, "dx"): np.ones_like(x)})]


def _system2_residual(values, x):
    v1, v2 = values
    r1, r2 = system2_residuals(v1["f"], v1["dx"], v2["f"], v2["dx"], x)
    one = np.ones_like(x)
    a1, a2 = SYSTEM_A1, SYSTEM_A2
    return [
        (r1, {(0, "dx"): one, (0, "f"): -a2 * one, (1, "f"): -a1 * one}),
        (r2, {(1, "dx"): one, (1, "f"): a2 * one, (0, "f"): a1 * one}),
    ]


def _linear2nd_residual(values, x):
    return [(linear2nd_residual(values[0]["dxx"], x), {(0, "dxx"): np.ones_like(x)})]


def _duffing_residual(values, tau):
    v = values[0]
    u = v["f"]
    c2, c1 = duffing_coefficients()
    p = DUFFING
    r = duffing_residual_scaled(u, v["dx"], v["dxx"], tau)
    one = np.ones_like(tau)
    return [(r, {(0, "dxx"): c2 * one, (0, "dx"): c1 * one, (0, "f"): p["alpha"] + 3.0 * p["beta"] * u**2})]


def _poisson_residual(values, pts):
    r = poisson_residual(values[0]["lap"], pts[:, 0], pts[:, 1])
    return [(r, {(0, "lap"): np.ones(len(pts))})]


def _check_count(name: str, value: int, lowest: int) -> int:
    if int(value) != value or value < lowest:
        raise ConfigurationError(f"{name} must be an integer >= {lowest}, got {value!r}")
    return int(value)


def poisson_grid(n: int, end: float = POISSON_END) -> tuple[np.ndarray, np.ndarray]:
    """``n x n`` mesh (x-major rows) and the indices of its edge points."""
    axis = np.linspace(0.0, end, n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    ix, iy = np.divmod(np.arange(n * n), n)
    edge = np.flatnonzero((ix == 0) | (ix == n - 1) | (iy == 0) | (iy == n - 1))
    return pts, edge


def make_problem(problem_id: str, grid_size: int | None = None, **overrides) -> ProblemSpec:
    """Benchmark problem with its default hyperparameters, optionally overridden."""
    if problem_id not in PROBLEM_IDS:
        raise ConfigurationError(f"unknown problem {problem_id!r}; expected one of {PROBLEM_IDS}")
    if problem_id == "riccati":
        n = _check_count("grid_size", grid_size or 100, 2)
        spec = ProblemSpec(
            "riccati", np.linspace(0.0, 0.9, n), 1, ("f", "dx"), _riccati_residual, riccati_oracle(),
            floating=(RICCATI_U0,), n_qubits=8, depth=8, layout="RC", observable="product",
            learning_rate=0.1, iterations=700,
        )
    elif problem_id == "system2":
        n = _check_count("grid_size", grid_size or 100, 2)
        spec = ProblemSpec(
            "system2", np.linspace(0.0, 0.9, n), 2, ("f", "dx"), _system2_residual, system2_oracle(),
            floating=SYSTEM_U0, n_qubits=3, depth=7, layout="RC", observable="product",
            learning_rate=0.1, iterations=700,
        )
    elif problem_id == "linear2nd":
        n = _check_count("grid_size", grid_size or 30, 2)
        grid = np.linspace(0.0, LINEAR_X_END, n)
        boundary = (
            BoundaryTerm(0, "f", 0, 0.0),
            BoundaryTerm(0, "f", n - 1, float(np.sin(2 * np.pi * LINEAR_X_END))),
        )
        spec = ProblemSpec(
            "linear2nd", grid, 1, ("f", "dxx"), _linear2nd_residual, linear2nd_oracle(), boundary=boundary,
            n_qubits=3, depth=7, layout="RC", observable="sum", learning_rate=0.01, iterations=1000,
            domain=(0.0, LINEAR_X_END),
        )
    elif problem_id == "duffing":
        n = _check_count("grid_size", grid_size or 50, 2)
        scale = DUFFING["l"] / DUFFING["T"]
        boundary = (BoundaryTerm(0, "f", 0, 0.0), BoundaryTerm(0, "dx", 0, 0.0, scale))
        spec = ProblemSpec(
            "duffing", np.linspace(0.0, 0.9, n), 1, ("f", "dx", "dxx"), _duffing_residual, duffing_oracle(),
            boundary=boundary, n_qubits=5, depth=8, layout="RC", observable="sum",
            learning_rate=0.01, iterations=300,
        )
    else:
        n = _check_count("grid_size", grid_size or 30, 2)
        pts, edge = poisson_grid(n)
        targets = poisson_u_true(pts[edge, 0], pts[edge, 1])
        boundary = tuple(BoundaryTerm(0, "f", int(i), float(t)) for i, t in zip(edge, targets))
        spec = ProblemSpec(
            "poisson2d", pts, 1, ("f", "lap"), _poisson_residual, poisson_oracle(), boundary=boundary,
            n_qubits=3, depth=7, layout="RC", observable="sum", alpha_f=0.1, alpha_b=1e3,
            learning_rate=0.1, iterations=300,
        )
    unknown = set(overrides) - set(ProblemSpec.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown problem settings: {sorted(unknown)}")
    return replace(spec, **overrides) if overrides else spec


# the five weighting/layout variants of the second-order linear benchmark
LINEAR2ND_CASES = {
    1: dict(layout="RC", weighting="constant", alpha_f=1.0, alpha_b=1.0),
    2: dict(layout="RC", weighting="constant", alpha_f=0.1, alpha_b=1e3),
    3: dict(layout="AEC", weighting="constant", alpha_f=0.1, alpha_b=1e3),
    4: dict(layout="AEC", weighting="sapinn-polynomial"),
    5: dict(layout="AEC", weighting="sapinn-logistic"),
}
