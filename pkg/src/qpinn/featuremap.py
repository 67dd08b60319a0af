"""Chebyshev feature maps: phi_j(x) = 2 j arccos(x) on qubit j (1-based).

Qubit indices inside a map are 1-based, matching the textbook form of the
encoding; physical (0-based) indices only appear in the ``encode*`` output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, SingularityError

DEFAULT_X_MAX = 0.99
SINGULARITY_MARGIN = 1e-6


@dataclass(frozen=True)
class ChebyshevMap:
    n_qubits: int
    x_max: float = DEFAULT_X_MAX

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigurationError(f"feature map needs at least one qubit, got {self.n_qubits}")
        if not 0.0 < self.x_max < 1.0:
            raise ConfigurationError(f"x_max must lie in (0, 1), got {self.x_max}")

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) or np.any(np.abs(x) > self.x_max):
            bad = x[~(np.abs(x) <= self.x_max)].ravel()[0]
            raise DomainError(
                f"input {bad!r} outside |x| <= {self.x_max}: the arccos feature map "
                "has a derivative singularity at |x| = 1"
            )
        return x

    def angles(self, x) -> np.ndarray:
        """Angles for all qubits, shape ``x.shape + (n_qubits,)``."""
        x = self.check(x)
        j = np.arange(1, self.n_qubits + 1)
        return 2.0 * j * np.arccos(x)[..., None]


@dataclass(frozen=True)
class ProductMap2D:
    """Two independent Chebyshev maps; x occupies the first qubits, y the rest."""

    map_x: ChebyshevMap
    map_y: ChebyshevMap

    @property
    def n_qubits(self) -> int:
        return self.map_x.n_qubits + self.map_y.n_qubits


def _check_index(map: ChebyshevMap, j: int) -> None:
    if not 1 <= j <= map.n_qubits:
        raise IndexError(f"qubit index j={j} outside 1..{map.n_qubits}")


def encode(map: ChebyshevMap, x: float) -> list[tuple[int, float]]:
    """(physical qubit, RY angle) pairs for input ``x``."""
    angles = map.angles(x)
    return [(j, float(a)) for j, a in enumerate(angles)]


def d_angle_dx(map: ChebyshevMap, x, j: int):
    """d phi_j / dx = -2 j / sqrt(1 - x^2)."""
    _check_index(map, j)
    x = map.check(x)
    return -2.0 * j / np.sqrt(1.0 - x * x)


def d2_angle_dx2(map: ChebyshevMap, x, j: int):
    """d^2 phi_j / dx^2 = -2 j x / (1 - x^2)^(3/2)."""
    _check_index(map, j)
    x = map.check(x)
    return -2.0 * j * x / (1.0 - x * x) ** 1.5


def check_second_order(x) -> None:
    """Reject inputs where the second-order chain-rule factors are singular."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 - SINGULARITY_MARGIN):
        raise SingularityError(f"second derivative requested within {SINGULARITY_MARGIN} of |x| = 1")


def encode_2d(map: ProductMap2D, x: float, y: float) -> list[tuple[int, float]]:
    """Angles for x on qubits 0..N_x-1 followed by y on N_x..N_x+N_y-1."""
    ax = map.map_x.angles(x)
    ay = map.map_y.angles(y)
    offset = map.map_x.n_qubits
    return [(j, float(a)) for j, a in enumerate(ax)] + [(offset + m, float(a)) for m, a in enumerate(ay)]
