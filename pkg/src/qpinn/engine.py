"""Differentiable evaluation of Chebyshev-encoded variational circuits.

The model output is ``f(x) = shift + <0|U_phi(x)^T U_theta^dag C U_theta U_phi(x)|0>``.
Because ``U_phi(x)|0>`` is a real product state ``e(x)``, every evaluation
reduces to the quadratic form ``e^T A e`` with ``A = Re(U_theta^dag C U_theta)``.
``A`` is computed once per parameter vector by sweeping the (Heisenberg
picture) observable backwards through the ansatz.

Derivatives in the encoded variable use the parameter-shift rule on the
feature angles (the shift is applied to ``phi_j(x)``, never to ``x``) and
the chain-rule factors of the arccos map. Gradients with respect to the
variational angles use an adjoint sweep over operators; a parameter-shift
implementation is kept as the reference route.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import featuremap as fm
from .ansatz import AnsatzSpec, build, param_count
from .errors import ConfigurationError
from .simulator import (
    Gate,
    Observable,
    apply_circuit,
    cnot_permutation,
    expectation,
    init_zero_state,
    rotation_matrix,
    z_signs,
)

HALF_PI = np.pi / 2
_STORE_LIMIT_BYTES = 256 * 2**20

CHANNELS_1D = ("f", "dx", "dxx")
CHANNELS_2D = ("f", "dx", "dy", "dxx", "dyy", "dxy", "lap")
_SECOND_ORDER = {"dxx", "dyy", "dxy", "lap"}


# --------------------------------------------------------------------------
# compiled ansatz layers acting on operators
# --------------------------------------------------------------------------

@dataclass
class _Layer:
    kind: str  # "RX", "RY", "RZ" or "PERM"
    qubits: list[int] = field(default_factory=list)
    angles: list[float] = field(default_factory=list)
    params: list[int | None] = field(default_factory=list)
    perm: np.ndarray | None = None


def compile_layers(gates: Sequence[Gate], n_qubits: int) -> list[_Layer]:
    """Group runs of commuting gates: same-kind rotations on distinct qubits, CNOT runs."""
    layers: list[_Layer] = []
    for g in gates:
        last = layers[-1] if layers else None
        if g.kind == "CNOT":
            p = cnot_permutation(g.control, g.target, n_qubits)
            if last is not None and last.kind == "PERM":
                last.perm = p[last.perm]
            else:
                layers.append(_Layer("PERM", perm=p))
            continue
        if last is None or last.kind != g.kind or g.target in last.qubits:
            last = _Layer(g.kind)
            layers.append(last)
        last.qubits.append(g.target)
        last.angles.append(g.angle)
        last.params.append(g.param)
    return layers


def _rz_phases(layer: _Layer, n_qubits: int) -> np.ndarray:
    signs = z_signs(n_qubits)
    phase = np.zeros(2**n_qubits)
    for q, a in zip(layer.qubits, layer.angles):
        phase += a * signs[q]
    return np.exp(-0.5j * phase)


def _rows(op: np.ndarray, mat: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a 2x2 matrix to ``qubit`` along the row (first) basis axis."""
    return np.matmul(mat, op.reshape(2**qubit, 2, -1)).reshape(op.shape)


def _conjugate(layer: _Layer, op: np.ndarray, n_qubits: int, inverse: bool) -> np.ndarray:
    """``L op L^dag`` (or ``L^dag op L`` when ``inverse``) for a Hermitian operator."""
    if layer.kind == "PERM":
        p = layer.perm if inverse else np.argsort(layer.perm)
        return op[np.ix_(p, p)]
    if layer.kind == "RZ":
        d = _rz_phases(layer, n_qubits)
        if inverse:
            d = d.conj()
        op *= d[:, None]
        op *= d.conj()[None, :]
        return op
    mats = [rotation_matrix(layer.kind, a) for a in layer.angles]
    if inverse:
        mats = [m.conj().T for m in mats]
    # for Hermitian op: L op L^dag = L (L op)^dag
    for q, m in zip(layer.qubits, mats):
        op = _rows(op, m, q)
    op = np.ascontiguousarray(op.conj().T)
    for q, m in zip(layer.qubits, mats):
        op = _rows(op, m, q)
    return op


def _layer_gradient(layer: _Layer, rho: np.ndarray, cobs: np.ndarray, n_qubits: int, out: np.ndarray) -> None:
    """Accumulate d tr(C L rho L^dag)/d angle = Im tr(P rho C) for every gate of the layer.

    ``cobs`` is the complex conjugate of the (Hermitian) observable C, i.e. C^T,
    so ``tr(A C) = sum(A * cobs)``.
    """
    if layer.kind == "RZ":
        diag = np.einsum("ab,ab->a", rho, cobs)
        signs = z_signs(n_qubits)
        for q, p in zip(layer.qubits, layer.params):
            if p is not None:
                out[p] += float(np.dot(signs[q], diag).imag)
        return
    for q, p in zip(layer.qubits, layer.params):
        if p is None:
            continue
        r = rho.reshape(2**q, 2, -1)
        c = cobs.reshape(2**q, 2, -1)
        # rows of P rho: X swaps the qubit-q halves; Y also multiplies by -i (bit 0) / +i (bit 1)
        upper = np.einsum("lr,lr->", r[:, 1], c[:, 0])
        lower = np.einsum("lr,lr->", r[:, 0], c[:, 1])
        z = upper + lower if layer.kind == "RX" else -1j * upper + 1j * lower
        out[p] += float(z.imag)


# --------------------------------------------------------------------------
# the model
# --------------------------------------------------------------------------

class CircuitModel:
    """Feature map + hardware-efficient ansatz + diagonal observable + output shift."""

    def __init__(self, map, ansatz: AnsatzSpec, theta, observable: Observable, output_shift: float = 0.0):
        if map.n_qubits != ansatz.n_qubits:
            raise ConfigurationError(
                f"feature map uses {map.n_qubits} qubits but the ansatz has {ansatz.n_qubits}"
            )
        self.map = map
        self.ansatz = ansatz
        self.theta = np.array(theta, dtype=float)
        if self.theta.shape != (param_count(ansatz),):
            raise ValueError(f"theta has shape {self.theta.shape}, expected ({param_count(ansatz)},)")
        self.observable = observable
        self.output_shift = float(output_shift)
        self._cache_key: bytes | None = None
        self._heis = None

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @property
    def is_2d(self) -> bool:
        return isinstance(self.map, fm.ProductMap2D)

    def copy(self) -> "CircuitModel":
        return CircuitModel(self.map, self.ansatz, self.theta.copy(), self.observable, self.output_shift)

    def gates(self, theta=None) -> list[Gate]:
        return build(self.ansatz, self.theta if theta is None else theta)

    def observable_diagonal(self) -> np.ndarray:
        return self.observable.diagonal(self.n_qubits)

    def heisenberg_matrix(self, theta=None) -> np.ndarray:
        """``Re(U^dag C U)`` for the current (or given) parameters."""
        if theta is not None:
            return _heisenberg(compile_layers(self.gates(theta), self.n_qubits),
                               self.observable_diagonal(), self.n_qubits)[0]
        return self._sweep()[0]

    def _sweep(self) -> tuple[np.ndarray, list[_Layer], list[np.ndarray] | None]:
        key = self.theta.tobytes()
        if key != self._cache_key:
            layers = compile_layers(self.gates(), self.n_qubits)
            store = 16 * 4**self.n_qubits * (len(layers) + 1) <= _STORE_LIMIT_BYTES
            heis, stack = _heisenberg(layers, self.observable_diagonal(), self.n_qubits, store)
            self._heis = (heis, layers, stack)
            self._cache_key = key
        return self._heis

    # -- point evaluation -------------------------------------------------

    def evaluate(self, x, y=None) -> float:
        pts = self._point(x, y)
        return float(self.forward(pts, ("f",)).values["f"][0])

    def grad_x(self, x) -> float:
        return float(self.forward(self._point(x, None), ("dx",)).values["dx"][0])

    def grad2_x(self, x) -> float:
        return float(self.forward(self._point(x, None), ("dxx",)).values["dxx"][0])

    def laplacian_2d(self, x, y) -> float:
        return float(self.forward(self._point(x, y), ("lap",)).values["lap"][0])

    def hessian_2d(self, x, y) -> np.ndarray:
        """[[u_xx, u_xy], [u_yx, u_yy]] at one point."""
        v = self.forward(self._point(x, y), ("dxx", "dxy", "dyy")).values
        return np.array([[v["dxx"][0], v["dxy"][0]], [v["dxy"][0], v["dyy"][0]]])

    def _point(self, x, y):
        if self.is_2d:
            if y is None:
                raise ValueError("two-variable model needs both x and y")
            return np.array([[float(x), float(y)]])
        if y is not None:
            raise ValueError("single-variable model takes only x")
        return np.array([float(x)])

    # -- batched evaluation -------------------------------------------------

    def plan(self, points, channels: Sequence[str]) -> "_ShiftPlan":
        """Precompute the shifted product states for a fixed batch of points."""
        return _ShiftPlan.build(self, np.asarray(points, dtype=float), tuple(channels))

    def forward(self, points=None, channels: Sequence[str] = ("f",), plan: "_ShiftPlan | None" = None) -> "ChannelBatch":
        """Evaluate ``channels`` (e.g. ``("f", "dx")``) at every point of a batch.

        A ``plan`` from :meth:`plan` may be passed instead of points/channels;
        it only depends on the points, so it can be reused across parameter updates.
        """
        if plan is None:
            plan = self.plan(points, channels)
        values = plan.run(self.heisenberg_matrix())
        if "f" in values:
            values["f"] = values["f"] + self.output_shift
        return ChannelBatch(self, plan, values)

    def evaluate_statevector(self, x, y=None) -> float:
        """Reference evaluation by direct statevector simulation."""
        if self.is_2d:
            angles = [a for _, a in fm.encode_2d(self.map, x, y)]
        else:
            angles = [a for _, a in fm.encode(self.map, x)]
        enc = [Gate("RY", q, angle=a) for q, a in enumerate(angles)]
        state = apply_circuit(init_zero_state(self.n_qubits), enc + self.gates())
        return self.output_shift + expectation(state, self.observable)


def _heisenberg(layers: list[_Layer], diag: np.ndarray, n_qubits: int, store: bool = False):
    """Sweep C backwards; optionally keep the operator after every layer.

    Returns ``(Re(U^dag C U), stack)`` where ``stack[k]`` is the complex
    conjugate of the observable propagated back to the point just after layer
    ``k`` (``None`` unless ``store``).
    """
    op = np.diag(diag).astype(np.complex128)
    stack = [None] * len(layers) if store else None
    for k in range(len(layers) - 1, -1, -1):
        if store:
            stack[k] = op.conj()
        op = _conjugate(layers[k], op, n_qubits, inverse=True)
    herm = op.real
    return 0.5 * (herm + herm.T), stack


# --------------------------------------------------------------------------
# shift plans: channel values as linear combinations of shifted evaluations
# --------------------------------------------------------------------------

def _qubit_roles(model: CircuitModel) -> dict[str, list[tuple[int, int]]]:
    """Variable -> list of (physical qubit, 1-based index within its map)."""
    if model.is_2d:
        nx, ny = model.map.map_x.n_qubits, model.map.map_y.n_qubits
        return {
            "x": [(q, q + 1) for q in range(nx)],
            "y": [(nx + m, m + 1) for m in range(ny)],
        }
    return {"x": [(q, q + 1) for q in range(model.n_qubits)]}


@dataclass
class _ShiftPlan:
    patterns: list[tuple[tuple[int, float], ...]]
    channels: tuple[str, ...]
    weights: np.ndarray  # (channels, patterns, points)
    states: np.ndarray  # (patterns, points, 2**n)
    n_points: int

    @classmethod
    def build(cls, model: CircuitModel, points: np.ndarray, channels: tuple[str, ...]) -> "_ShiftPlan":
        allowed = CHANNELS_2D if model.is_2d else CHANNELS_1D
        for c in channels:
            if c not in allowed:
                raise ValueError(f"unknown channel {c!r}; expected one of {allowed}")
        roles = _qubit_roles(model)
        if model.is_2d:
            if points.ndim != 2 or points.shape[1] != 2:
                raise ValueError("two-variable model expects points of shape (P, 2)")
            coords = {"x": points[:, 0], "y": points[:, 1]}
            maps = {"x": model.map.map_x, "y": model.map.map_y}
        else:
            points = points.reshape(-1)
            coords = {"x": points}
            maps = {"x": model.map}
        second = any(c in _SECOND_ORDER for c in channels)
        for v, vals in coords.items():
            maps[v].check(vals)
            if second:
                fm.check_second_order(vals)
        n_pts = len(coords["x"])
        n = model.n_qubits

        # chain-rule factors per physical qubit
        angles = np.empty((n_pts, n))
        first = np.empty((n_pts, n))
        curv = np.empty((n_pts, n))
        for v, members in roles.items():
            x = coords[v]
            s = np.sqrt(1.0 - x * x)
            for q, j in members:
                angles[:, q] = 2.0 * j * np.arccos(x)
                first[:, q] = -2.0 * j / s
                curv[:, q] = -2.0 * j * x / s**3

        patterns: list[tuple[tuple[int, float], ...]] = []
        index: dict[tuple, int] = {}
        terms: list[tuple[int, int, np.ndarray]] = []

        def add(ch: int, pattern: tuple[tuple[int, float], ...], coef) -> None:
            key = tuple(sorted(pattern))
            if key not in index:
                index[key] = len(patterns)
                patterns.append(key)
            terms.append((ch, index[key], np.broadcast_to(coef, (n_pts,))))

        def first_order(ch: int, v: str, factor) -> None:
            for q, _ in roles[v]:
                c = 0.5 * factor[:, q]
                add(ch, ((q, HALF_PI),), c)
                add(ch, ((q, -HALF_PI),), -c)

        def pair(ch: int, q: int, r: int, coef) -> None:
            c = 0.25 * coef
            add(ch, ((q, HALF_PI), (r, HALF_PI)), c)
            add(ch, ((q, HALF_PI), (r, -HALF_PI)), -c)
            add(ch, ((q, -HALF_PI), (r, HALF_PI)), -c)
            add(ch, ((q, -HALF_PI), (r, -HALF_PI)), c)

        def second_order(ch: int, v: str) -> None:
            members = [q for q, _ in roles[v]]
            for q in members:
                a2 = first[:, q] ** 2
                add(ch, ((q, np.pi),), 0.25 * a2)
                add(ch, ((q, -np.pi),), 0.25 * a2)
                add(ch, (), -0.5 * a2)
            first_order(ch, v, curv)
            for i, q in enumerate(members):
                for r in members[i + 1:]:
                    pair(ch, q, r, 2.0 * first[:, q] * first[:, r])

        for ch, name in enumerate(channels):
            if name == "f":
                add(ch, (), 1.0)
            elif name in ("dx", "dy"):
                first_order(ch, name[1], first)
            elif name in ("dxx", "dyy"):
                second_order(ch, name[1])
            elif name == "lap":
                second_order(ch, "x")
                second_order(ch, "y")
            elif name == "dxy":
                for q, _ in roles["x"]:
                    for r, _ in roles["y"]:
                        pair(ch, q, r, first[:, q] * first[:, r])

        weights = np.zeros((len(channels), len(patterns), n_pts))
        for ch, pid, coef in terms:
            weights[ch, pid] += coef

        shifts = np.zeros((len(patterns), n))
        for pid, pattern in enumerate(patterns):
            for q, s in pattern:
                shifts[pid, q] += s
        half = 0.5 * (angles[None, :, :] + shifts[:, None, :])
        c, s = np.cos(half), np.sin(half)
        states = np.stack([c[..., 0], s[..., 0]], axis=-1)
        for q in range(1, n):
            qv = np.stack([c[..., q], s[..., q]], axis=-1)
            states = (states[..., :, None] * qv[..., None, :]).reshape(len(patterns), n_pts, -1)
        return cls(patterns, channels, weights, states, n_pts)

    def run(self, heis: np.ndarray) -> dict[str, np.ndarray]:
        flat = self.states.reshape(-1, self.states.shape[-1])
        evals = np.einsum("ij,ij->i", flat @ heis, flat).reshape(len(self.patterns), self.n_points)
        self.evaluations = evals
        combined = np.einsum("csp,sp->cp", self.weights, evals)
        return {name: combined[i] for i, name in enumerate(self.channels)}

    def density(self, adjoints: Mapping[str, np.ndarray]) -> np.ndarray:
        """``R = sum_s w_s e_s e_s^T`` so that the linearised loss is ``tr(R A)``."""
        w = np.zeros((len(self.patterns), self.n_points))
        for i, name in enumerate(self.channels):
            if name in adjoints:
                adj = np.broadcast_to(np.asarray(adjoints[name], dtype=float), (self.n_points,))
                w += self.weights[i] * adj[None, :]
        unknown = set(adjoints) - set(self.channels)
        if unknown:
            raise ValueError(f"adjoints given for channels not in the batch: {sorted(unknown)}")
        flat = self.states.reshape(-1, self.states.shape[-1])
        return flat.T @ (flat * w.reshape(-1)[:, None])


@dataclass
class ChannelBatch:
    """Channel values of one model on one batch of points, ready for back-propagation."""

    model: CircuitModel
    plan: _ShiftPlan
    values: dict[str, np.ndarray]

    def density(self, adjoints: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.plan.density(adjoints)


# --------------------------------------------------------------------------
# gradients with respect to the variational parameters
# --------------------------------------------------------------------------

def theta_gradient_adjoint(model: CircuitModel, density: np.ndarray) -> np.ndarray:
    """d tr(R Re(U^dag C U)) / d theta by adjoint sweeps over operators.

    With ``rho_k`` the density pushed forward through layers ``1..k`` and
    ``C_k`` the observable pulled back to the same point, the derivative for
    a rotation exp(-i a P / 2) in layer ``k`` is ``Im tr(P rho_k C_k)``.
    """
    n = model.n_qubits
    _, layers, stack = model._sweep()
    grad = np.zeros(param_count(model.ansatz))
    rho = np.ascontiguousarray(density, dtype=np.complex128)
    if stack is not None:
        for layer, cobs in zip(layers, stack):
            rho = _conjugate(layer, rho, n, inverse=False)
            if layer.kind != "PERM":
                _layer_gradient(layer, rho, cobs, n, grad)
        return grad
    for layer in layers:
        rho = _conjugate(layer, rho, n, inverse=False)
    obs = np.diag(model.observable_diagonal()).astype(np.complex128)
    for layer in reversed(layers):
        if layer.kind != "PERM":
            _layer_gradient(layer, rho, obs.conj(), n, grad)
        rho = _conjugate(layer, rho, n, inverse=True)
        obs = _conjugate(layer, obs, n, inverse=True)
    return grad


def theta_gradient_shift(model: CircuitModel, density: np.ndarray) -> np.ndarray:
    """Same quantity by the +-pi/2 parameter-shift rule, one parameter at a time."""
    grad = np.zeros(param_count(model.ansatz))
    for k in range(grad.size):
        plus, minus = model.theta.copy(), model.theta.copy()
        plus[k] += HALF_PI
        minus[k] -= HALF_PI
        fp = np.sum(density * model.heisenberg_matrix(plus))
        fm_ = np.sum(density * model.heisenberg_matrix(minus))
        grad[k] = 0.5 * (fp - fm_)
    return grad


def grad_theta(model: CircuitModel, points, adjoints: Mapping[str, np.ndarray], method: str = "adjoint") -> np.ndarray:
    """Gradient of ``sum_p sum_c adjoints[c][p] * channel_c(point_p)`` with respect to theta.

    ``adjoints`` maps channel names (``"f"``, ``"dx"``, ``"dxx"``, ``"lap"``, ...) to
    per-point sensitivities of the loss.
    """
    names = tuple(adjoints)
    if not names:
        return np.zeros(param_count(model.ansatz))
    batch = model.forward(points, names)
    return theta_gradient(model, batch.density(adjoints), method)


def theta_gradient(model: CircuitModel, density: np.ndarray, method: str = "adjoint") -> np.ndarray:
    if method == "adjoint":
        return theta_gradient_adjoint(model, density)
    if method == "shift":
        return theta_gradient_shift(model, density)
    raise ValueError(f"unknown gradient method {method!r}")


def angle_derivatives(model: CircuitModel, x, y=None) -> tuple[np.ndarray, np.ndarray]:
    """Shift-rule gradient and Hessian of the raw expectation in the feature angles."""
    if model.is_2d:
        angles = np.array([a for _, a in fm.encode_2d(model.map, x, y)])
    else:
        angles = np.array([a for _, a in fm.encode(model.map, x)])
    heis = model.heisenberg_matrix()
    n = model.n_qubits

    def f(shift: np.ndarray) -> float:
        half = 0.5 * (angles + shift)
        e = np.ones(1)
        for q in range(n):
            e = np.kron(e, [np.cos(half[q]), np.sin(half[q])])
        return float(e @ heis @ e)

    unit = np.eye(n)
    grad = np.array([0.5 * (f(HALF_PI * unit[j]) - f(-HALF_PI * unit[j])) for j in range(n)])
    hess = np.empty((n, n))
    base = f(np.zeros(n))
    for j in range(n):
        for k in range(n):
            if j == k:
                hess[j, j] = 0.25 * (f(np.pi * unit[j]) + f(-np.pi * unit[j]) - 2.0 * base)
            else:
                sj, sk = HALF_PI * unit[j], HALF_PI * unit[k]
                hess[j, k] = 0.25 * (f(sj + sk) - f(sj - sk) - f(-sj + sk) + f(-sj - sk))
    return grad, hess
