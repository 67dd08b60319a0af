"""Hardware-efficient ansatz in the reference (RC) and added-entanglement (AEC) layouts.

Parameters are laid out block-major, then rotation layer (RZ, RX, RZ), then
qubit: ``theta[(b * 3 + layer) * n + q]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .simulator import Gate

LAYOUTS = ("RC", "AEC")
_LAYER_KINDS = ("RZ", "RX", "RZ")


@dataclass(frozen=True)
class AnsatzSpec:
    layout: str
    n_qubits: int
    depth: int
    entanglement: str = "circular"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ConfigurationError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.n_qubits < 1:
            raise ConfigurationError(f"n_qubits must be positive, got {self.n_qubits}")
        if self.depth < 0:
            raise ConfigurationError(f"depth must be non-negative, got {self.depth}")
        if self.entanglement != "circular":
            raise ConfigurationError(f"only circular entanglement is supported, got {self.entanglement!r}")


def param_count(spec: AnsatzSpec) -> int:
    return 3 * spec.depth * spec.n_qubits


def cnot_ring(n_qubits: int) -> list[Gate]:
    """CNOT(q, q+1 mod n) for ascending q; empty on a single qubit."""
    if n_qubits < 2:
        return []
    return [Gate("CNOT", target=(q + 1) % n_qubits, control=q) for q in range(n_qubits)]


def build(spec: AnsatzSpec, theta) -> list[Gate]:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_count(spec),):
        raise ValueError(f"theta has shape {theta.shape}, expected ({param_count(spec)},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    n = spec.n_qubits
    ring = cnot_ring(n)
    gates: list[Gate] = []
    for b in range(spec.depth):
        for layer, kind in enumerate(_LAYER_KINDS):
            base = (3 * b + layer) * n
            gates.extend(Gate(kind, q, angle=float(theta[base + q]), param=base + q) for q in range(n))
            if spec.layout == "AEC":
                gates.extend(ring)
        if spec.layout == "RC":
            gates.extend(ring)
    return gates


def random_parameters(spec: AnsatzSpec, rng: np.random.Generator) -> np.ndarray:
    """Independent uniform angles on [0, 2 pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, size=param_count(spec))
