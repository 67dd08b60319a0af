"""Adam on the circuit parameters, ascent on self-adaptive weights, and the training loop."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import loss as L
from .ansatz import AnsatzSpec, param_count, random_parameters
from .engine import CircuitModel, theta_gradient
from .errors import ConfigurationError, DivergenceError
from .featuremap import ChebyshevMap, ProductMap2D
from .problems import ProblemSpec, one_minus_r2
from .simulator import Observable

DIVERGENCE_LIMIT = 1e6
WEIGHTING_MODES = ("constant", "sapinn-polynomial", "sapinn-logistic")


@dataclass
class AdamState:
    learning_rate: float
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, size: int, learning_rate: float) -> "AdamState":
        if not learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be positive, got {learning_rate}")
        return cls(learning_rate, np.zeros(size), np.zeros(size))

    def copy(self) -> "AdamState":
        return AdamState(self.learning_rate, self.m.copy(), self.v.copy(), self.step,
                         self.beta1, self.beta2, self.epsilon)


def adam_step(state: AdamState, theta, grad) -> np.ndarray:
    """One bias-corrected Adam update; mutates ``state`` and returns the new parameters."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}, moments {state.m.shape}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def lambda_ascent_step(state: L.SapinnState, grads) -> L.SapinnState:
    """Plain gradient ascent on the self-adaptive weights, clamped to the mask's range."""
    g_f, g_b = (np.asarray(g, dtype=float) for g in grads)
    if g_f.shape != state.lambda_f.shape or g_b.shape != state.lambda_b.shape:
        raise ValueError("gradient lengths do not match the self-adaptive weights")
    state.lambda_f = np.clip(state.lambda_f + state.rho * g_f, 0.0, state.mask_f.upper)
    state.lambda_b = np.clip(state.lambda_b + state.rho * g_b, 0.0, state.mask_b.upper)
    return state


@dataclass(frozen=True)
class LogRecord:
    iteration: int
    loss_total: float
    loss_residual: float
    loss_boundary: float
    one_minus_r2: float


@dataclass
class ConvergenceLog:
    records: list[LogRecord] = field(default_factory=list)

    def append(self, record: LogRecord) -> None:
        if record.iteration != len(self.records):
            raise ValueError(f"expected iteration {len(self.records)}, got {record.iteration}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


# --------------------------------------------------------------------------
# model construction
# --------------------------------------------------------------------------

def make_observable(problem: ProblemSpec) -> Observable:
    kind = problem.observable
    if kind == "sum":
        return Observable.sum_z()
    if kind == "product":
        return Observable.prod_z()
    if kind == "weighted":
        n = problem.n_qubits * (2 if problem.is_2d else 1)
        w = problem.observable_weights
        if len(w) != n:
            raise ConfigurationError(f"weighted observable needs {n} weights, got {len(w)}")
        return Observable.weighted((c, [q]) for q, c in enumerate(w))
    raise ConfigurationError(f"observable must be sum, product or weighted, got {kind!r}")


def build_models(problem: ProblemSpec, seed: int) -> list[CircuitModel]:
    """Fresh models for ``problem``; parameters are drawn in model order from one seeded stream."""
    if problem.is_2d:
        fmap = ProductMap2D(ChebyshevMap(problem.n_qubits), ChebyshevMap(problem.n_qubits))
    else:
        fmap = ChebyshevMap(problem.n_qubits)
    spec = AnsatzSpec(problem.layout.upper(), fmap.n_qubits, problem.depth)
    obs = make_observable(problem)
    rng = np.random.default_rng(seed)
    return [CircuitModel(fmap, spec, random_parameters(spec, rng), obs) for _ in range(problem.n_models)]


def sapinn_masks(weighting: str) -> tuple[L.MaskFn, L.MaskFn]:
    if weighting == "sapinn-polynomial":
        return L.RESIDUAL_POLYNOMIAL, L.BOUNDARY_POLYNOMIAL
    if weighting == "sapinn-logistic":
        return L.RESIDUAL_LOGISTIC, L.BOUNDARY_LOGISTIC
    raise ConfigurationError(f"weighting must be one of {WEIGHTING_MODES}, got {weighting!r}")


# --------------------------------------------------------------------------
# one evaluation of the physics-informed loss
# --------------------------------------------------------------------------

@dataclass
class Evaluation:
    values: list[dict[str, np.ndarray]]
    residuals: np.ndarray  # all equations, concatenated
    boundary_errors: np.ndarray
    loss_residual: float
    loss_boundary: float
    adjoints: list[dict[str, np.ndarray]]
    unweighted: float  # sum of the plain per-equation and boundary MSEs

    @property
    def loss_total(self) -> float:
        return self.loss_residual + self.loss_boundary

    def predictions(self) -> np.ndarray:
        return np.concatenate([v["f"] for v in self.values])


class Trainer:
    """Holds the models, optimiser state and precomputed shift plans of one run."""

    def __init__(self, problem: ProblemSpec, seed: int, models: list[CircuitModel] | None = None):
        if problem.weighting not in WEIGHTING_MODES:
            raise ConfigurationError(f"weighting must be one of {WEIGHTING_MODES}, got {problem.weighting!r}")
        self.problem = problem
        self.seed = seed
        self.models = models if models is not None else build_models(problem, seed)
        grid = problem.grid
        self.plans = [m.plan(grid, problem.channels) for m in self.models]
        self.start_plans = [m.plan(grid[:1], ("f",)) for m in self.models] if problem.floating else None
        self.truth = np.concatenate(problem.oracle.evaluate(grid))
        size = sum(param_count(m.ansatz) for m in self.models)
        self.adam = AdamState.zeros(size, problem.learning_rate)
        n_res = problem.n_equations * len(grid)
        self.sapinn = None
        if problem.weighting != "constant":
            mf, mb = sapinn_masks(problem.weighting)
            self.sapinn = L.SapinnState.initial(n_res, len(problem.boundary), mf, mb)
        self.weights_const = L.ConstantWeights(problem.alpha_f, problem.alpha_b)
        self.update_shifts()

    # -- floating boundary -------------------------------------------------

    def update_shifts(self) -> None:
        if not self.problem.floating:
            return
        for model, plan, u0 in zip(self.models, self.start_plans, self.problem.floating):
            raw = plan.run(model.heisenberg_matrix())["f"][0]
            model.output_shift = L.floating_boundary(u0, raw)

    # -- loss ----------------------------------------------------------------

    def point_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers of the squared residuals / boundary errors in the total loss."""
        n_res = self.problem.n_equations * len(self.problem.grid)
        n_f, n_b = len(self.problem.grid), max(len(self.problem.boundary), 1)
        if self.sapinn is None:
            return (np.full(n_res, self.weights_const.alpha_f / n_f),
                    np.full(len(self.problem.boundary), self.weights_const.alpha_b / n_b))
        m_f, m_b = L.sapinn_point_weights(self.sapinn)
        return m_f / n_f, m_b / n_b

    def evaluate(self) -> Evaluation:
        problem = self.problem
        grid = problem.grid
        n_pts = len(grid)
        values = [m.forward(plan=p).values for m, p in zip(self.models, self.plans)]
        adjoints = [{c: np.zeros(n_pts) for c in problem.channels} for _ in self.models]
        w_f, w_b = self.point_weights()

        blocks = problem.residual(values, grid)
        residuals = np.concatenate([r for r, _ in blocks])
        for e, (r, partials) in enumerate(blocks):
            coef = 2.0 * w_f[e * n_pts:(e + 1) * n_pts] * r
            for (m, c), p in partials.items():
                adjoints[m][c] += coef * p

        errors = np.array([t.scale * values[t.model][t.channel][t.index] - t.target for t in problem.boundary])
        for t, e, w in zip(problem.boundary, errors, w_b):
            adjoints[t.model][t.channel][t.index] += 2.0 * w * e * t.scale

        if problem.floating:
            # u_m(x) = u0 - f(x0) + f(x) with x0 = grid[0]
            for adj in adjoints:
                adj["f"][0] -= adj["f"].sum()

        loss_f = float(np.dot(w_f, residuals * residuals))
        loss_b = float(np.dot(w_b, errors * errors)) if errors.size else 0.0
        plain = float(np.mean(residuals * residuals)) * problem.n_equations
        if errors.size:
            plain += float(np.mean(errors * errors))
        return Evaluation(values, residuals, errors, loss_f, loss_b, adjoints, plain)

    def theta_gradient(self, ev: Evaluation, method: str = "adjoint") -> np.ndarray:
        parts = []
        for model, plan, adj in zip(self.models, self.plans, ev.adjoints):
            parts.append(theta_gradient(model, plan.density(adj), method))
        return np.concatenate(parts)

    # -- parameters ---------------------------------------------------------

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([m.theta for m in self.models])

    def set_theta(self, theta: np.ndarray) -> None:
        start = 0
        for m in self.models:
            size = m.theta.size
            m.theta = np.array(theta[start:start + size])
            start += size

    # -- the loop -------------------------------------------------------------

    def step(self, iteration: int, divergence_limit: float = DIVERGENCE_LIMIT) -> LogRecord:
        self.update_shifts()
        ev = self.evaluate()
        total = ev.loss_total
        # masked losses are large by construction, so SAPINN runs are judged on the plain MSEs
        monitored = total if self.sapinn is None else ev.unweighted
        if not np.isfinite(total) or monitored > divergence_limit:
            raise DivergenceError(iteration, total)
        record = LogRecord(iteration, total, ev.loss_residual, ev.loss_boundary,
                           one_minus_r2(ev.predictions(), self.truth))
        grad = self.theta_gradient(ev)
        self.set_theta(adam_step(self.adam, self.theta, grad))
        if self.sapinn is not None:
            n_f, n_b = len(self.problem.grid), max(len(self.problem.boundary), 1)
            g_f = np.asarray(L.mask_deriv(self.sapinn.mask_f, self.sapinn.lambda_f)) * ev.residuals**2 / n_f
            g_b = np.asarray(L.mask_deriv(self.sapinn.mask_b, self.sapinn.lambda_b)) * ev.boundary_errors**2 / n_b
            lambda_ascent_step(self.sapinn, (g_f, g_b))
        self.update_shifts()
        return record


@dataclass
class TrainResult:
    models: list[CircuitModel]
    log: ConvergenceLog
    sapinn: L.SapinnState | None
    adam: AdamState


def train(problem: ProblemSpec, seed: int = 0, iterations: int | None = None,
          callback: Callable[[int, Trainer], None] | None = None,
          divergence_limit: float = DIVERGENCE_LIMIT) -> TrainResult:
    """Train the models of ``problem``; a pure function of the problem and the seed.

    ``callback(iteration, trainer)`` runs after every completed update.
    """
    n_iter = problem.iterations if iterations is None else iterations
    if int(n_iter) != n_iter or n_iter < 0:
        raise ConfigurationError(f"iterations must be a non-negative integer, got {n_iter!r}")
    trainer = Trainer(problem, seed)
    log = ConvergenceLog()
    for k in range(int(n_iter)):
        log.append(trainer.step(k, divergence_limit))
        if callback is not None:
            callback(k, trainer)
    return TrainResult(trainer.models, log, trainer.sapinn, trainer.adam)
