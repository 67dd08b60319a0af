"""Adaptive embedded Runge-Kutta integrators used to build reference solutions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StiffnessError


@dataclass(frozen=True)
class Tableau:
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray  # propagated (higher order) weights
    b_err: np.ndarray  # difference between the two embedded weight sets
    order: int  # order of the lower embedded method (sets the step-size exponent)


def _tableau(c, a, b, b_low, order) -> Tableau:
    b = np.array(b, dtype=float)
    return Tableau(np.array(c, dtype=float), np.array(a, dtype=float), b, b - np.array(b_low, dtype=float), order)


BOGACKI_SHAMPINE = _tableau(
    c=[0.0, 1 / 2, 3 / 4, 1.0],
    a=[[0, 0, 0, 0], [1 / 2, 0, 0, 0], [0, 3 / 4, 0, 0], [2 / 9, 1 / 3, 4 / 9, 0]],
    b=[2 / 9, 1 / 3, 4 / 9, 0],
    b_low=[7 / 24, 1 / 4, 1 / 3, 1 / 8],
    order=2,
)

DORMAND_PRINCE = _tableau(
    c=[0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0],
    a=[
        [0, 0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0, 0],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0],
    ],
    b=[35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0],
    b_low=[5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40],
    order=4,
)

METHODS = {"rk3_bogacki_shampine": BOGACKI_SHAMPINE, "rk45_dormand_prince": DORMAND_PRINCE}


def _step(tab: Tableau, rhs, t: float, y: np.ndarray, h: float):
    k = np.empty((len(tab.c), y.size))
    for i in range(len(tab.c)):
        yi = y + h * (tab.a[i, :i] @ k[:i]) if i else y
        k[i] = rhs(t + tab.c[i] * h, yi)
    return y + h * (tab.b @ k), h * (tab.b_err @ k)


def rk_solve(kind: str, rhs: Callable, y0, t_grid, tol: float = 1e-9, max_steps: int = 1_000_000) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` and return the solution at every point of ``t_grid``.

    The grid must be non-decreasing and start at the initial time. Steps are
    shortened so that every grid point is hit exactly; the local error is
    controlled in the mixed norm ``max |err| / (tol + tol |y|)``.
    """
    if kind not in METHODS:
        raise ValueError(f"unknown integrator {kind!r}; expected one of {sorted(METHODS)}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    tab = METHODS[kind]
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty vector")
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing")

    def f(t, y):
        return np.atleast_1d(np.asarray(rhs(t, y), dtype=float))

    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    out = np.empty((t_grid.size, y.size))
    out[0] = y
    t = float(t_grid[0])
    span = t_grid[-1] - t
    h = min(span, 0.01 * max(span, 1.0)) if span > 0 else 0.0
    f0 = f(t, y)
    scale = tol + tol * np.abs(y)
    d0, d1 = np.max(np.abs(y) / scale), np.max(np.abs(f0) / scale)
    if d0 > 1e-5 and d1 > 1e-5:
        h = min(h, 0.01 * d0 / d1)
    exponent = 1.0 / (tab.order + 1)
    steps = 0
    for i in range(1, t_grid.size):
        target = float(t_grid[i])
        while t < target:
            h = min(h, target - t)
            if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                raise StiffnessError(f"step size underflow at t={t!r}")
            steps += 1
            if steps > max_steps:
                raise StiffnessError(f"more than {max_steps} steps needed before t={target!r}")
            y_new, err = _step(tab, f, t, y, h)
            scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
            norm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            if not np.all(np.isfinite(y_new)):
                norm = np.inf
            if norm <= 1.0:
                t = target if target - t - h <= 0 else t + h
                y = y_new
                factor = 5.0 if norm == 0 else min(5.0, max(0.2, 0.9 * norm ** -exponent))
            else:
                factor = 0.2 if not np.isfinite(norm) else max(0.2, 0.9 * norm ** -exponent)
            h *= factor
        out[i] = y
    return out
