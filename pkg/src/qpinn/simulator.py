"""Exact statevector simulation for RX/RY/RZ/CNOT circuits.

Qubit 0 is the most significant bit of the basis index, so the amplitude
buffer reshaped to ``(2,) * n`` has qubit ``q`` on axis ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 20

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CNOT",)

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """2x2 matrix of exp(-i angle/2 P) for P in {X, Y, Z}."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise ValueError(f"not a rotation kind: {kind!r}")


def pauli(kind: str) -> np.ndarray:
    """Generator (Pauli matrix) of a rotation kind such as ``"RX"``."""
    return _PAULI[kind[-1]].copy()


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit.

    ``param`` optionally records which entry of a flat parameter vector the
    angle was taken from; the simulator ignores it.
    """

    kind: str
    target: int
    control: int | None = None
    angle: float = 0.0
    param: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT":
            if self.control is None:
                raise ValueError("CNOT requires a control qubit")
            if self.control == self.target:
                raise ValueError("CNOT control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def _check_n_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def init_zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    _check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def apply_1q(arr: np.ndarray, mat: np.ndarray, qubit: int, n_qubits: int, axis: int = 0) -> np.ndarray:
    """Apply a 2x2 matrix to ``qubit`` along basis axis ``axis`` of ``arr`` in place.

    ``arr`` is 1-D (a statevector) or 2-D (an operator, basis on both axes).
    """
    if not arr.flags.c_contiguous:
        raise ValueError("apply_1q needs a C-contiguous buffer")
    lead = 2**qubit
    if arr.ndim == 1 or axis == 0:
        view = arr.reshape(lead, 2, -1)
        a0, a1 = view[:, 0, :], view[:, 1, :]
    else:
        view = arr.reshape(arr.shape[0], lead, 2, -1)
        a0, a1 = view[:, :, 0, :], view[:, :, 1, :]
    m00, m01, m10, m11 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    tmp = a0.copy()
    a0 *= m00
    a0 += m01 * a1
    a1 *= m11
    a1 += m10 * tmp
    return arr


def cnot_permutation(control: int, target: int, n_qubits: int) -> np.ndarray:
    """Index array ``p`` with CNOT|b> = |p[b]>."""
    idx = np.arange(2**n_qubits)
    cbit = 1 << (n_qubits - 1 - control)
    tbit = 1 << (n_qubits - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def _check_gate(gate: Gate, n_qubits: int) -> None:
    for q in gate.qubits():
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit index {q} out of range for {n_qubits} qubits")


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply ``gate`` to ``state`` in place and return the same object."""
    n = state.n_qubits
    _check_gate(gate, n)
    if gate.kind == "CNOT":
        perm = cnot_permutation(gate.control, gate.target, n)
        new = np.empty_like(state.amplitudes)
        new[perm] = state.amplitudes
        state.amplitudes[:] = new
    else:
        apply_1q(state.amplitudes, rotation_matrix(gate.kind, gate.angle), gate.target, n)
    return state


def apply_circuit(state: StateVector, gates: Iterable[Gate]) -> StateVector:
    for gate in gates:
        apply_gate(state, gate)
    return state


def z_signs(n_qubits: int) -> np.ndarray:
    """``(n_qubits, 2**n_qubits)`` array of Z_q eigenvalues (+1 for bit 0)."""
    idx = np.arange(2**n_qubits)
    shifts = n_qubits - 1 - np.arange(n_qubits)
    bits = (idx[None, :] >> shifts[:, None]) & 1
    return 1.0 - 2.0 * bits


@dataclass(frozen=True)
class Observable:
    """Diagonal observable: SumZ, ProdZ, or a weighted sum of Z-strings."""

    kind: str
    terms: tuple[tuple[float, frozenset[int]], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("SumZ", "ProdZ", "WeightedSum"):
            raise ValueError(f"unknown observable kind {self.kind!r}")

    @classmethod
    def sum_z(cls) -> "Observable":
        return cls("SumZ")

    @classmethod
    def prod_z(cls) -> "Observable":
        return cls("ProdZ")

    @classmethod
    def weighted(cls, terms: Iterable[tuple[float, Iterable[int]]]) -> "Observable":
        return cls("WeightedSum", tuple((float(c), frozenset(s)) for c, s in terms))

    def expanded_terms(self, n_qubits: int) -> list[tuple[float, frozenset[int]]]:
        if self.kind == "SumZ":
            return [(1.0, frozenset([q])) for q in range(n_qubits)]
        if self.kind == "ProdZ":
            return [(1.0, frozenset(range(n_qubits)))]
        return list(self.terms)

    def diagonal(self, n_qubits: int) -> np.ndarray:
        """Eigenvalue of the observable on every computational basis state."""
        signs = z_signs(n_qubits)
        diag = np.zeros(2**n_qubits)
        for coef, support in self.expanded_terms(n_qubits):
            if any(not 0 <= q < n_qubits for q in support):
                raise ValueError(f"observable support {sorted(support)} exceeds {n_qubits} qubits")
            term = np.ones(2**n_qubits)
            for q in sorted(support):
                term = term * signs[q]
            diag += coef * term
        return diag

    def matrix(self, n_qubits: int) -> np.ndarray:
        """Dense matrix built from Kronecker products of Z and I."""
        dim = 2**n_qubits
        out = np.zeros((dim, dim))
        for coef, support in self.expanded_terms(n_qubits):
            term = np.ones((1, 1))
            for q in range(n_qubits):
                term = np.kron(term, _PAULI["Z"].real if q in support else np.eye(2))
            out += coef * term
        return out


def expectation(state: StateVector, obs: Observable) -> float:
    """<psi|C|psi> for a diagonal observable."""
    return float(np.dot(obs.diagonal(state.n_qubits), state.probabilities()))


def simulate(n_qubits: int, gates: Sequence[Gate]) -> StateVector:
    """Run ``gates`` on |0...0>."""
    return apply_circuit(init_zero_state(n_qubits), gates)
