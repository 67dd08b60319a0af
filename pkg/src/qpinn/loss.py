"""Physics-informed losses: constant-weighted MSE, floating boundary, and SAPINN masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAPINN_ASCENT_RATE = 0.01


@dataclass(frozen=True)
class ConstantWeights:
    alpha_f: float = 1.0
    alpha_b: float = 1.0

    def __post_init__(self):
        for name in ("alpha_f", "alpha_b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


def residual_mse(residuals) -> float:
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("residual_mse of an empty vector")
    return float(np.mean(r * r))


def boundary_mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"prediction/target length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("boundary_mse of an empty vector")
    d = p - t
    return float(np.mean(d * d))


def total_weighted(mse_f: float, mse_b: float, w: ConstantWeights) -> float:
    return w.alpha_f * mse_f + w.alpha_b * mse_b


@dataclass(frozen=True)
class MaskFn:
    """Self-adaptation mask m(lambda).

    ``polynomial``: m = c * min(lambda, lambda_max)**q, flat above ``lambda_max``.
    ``logistic``: m = saturation / (1 + exp(-lambda)).
    ``constant``: m = c regardless of lambda (turns SAPINN into constant weights).
    """

    kind: str
    c: float = 1.0
    q: float = 2.0
    lambda_max: float = np.inf
    saturation: float = 1.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "logistic", "constant"):
            raise ValueError(f"unknown mask kind {self.kind!r}")

    @classmethod
    def polynomial(cls, c: float, q: float, lambda_max: float) -> "MaskFn":
        return cls("polynomial", c=c, q=q, lambda_max=lambda_max)

    @classmethod
    def logistic(cls, saturation: float) -> "MaskFn":
        return cls("logistic", saturation=saturation)

    @classmethod
    def constant(cls, value: float) -> "MaskFn":
        return cls("constant", c=value)

    @property
    def upper(self) -> float:
        """Largest admissible lambda (the clamp used by the ascent step)."""
        return self.lambda_max if self.kind == "polynomial" else np.inf


def _check_lambda(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(np.isnan(lam)):
        raise ValueError("mask functions are defined for lambda >= 0 only")
    return lam


def mask_eval(mask: MaskFn, lam):
    lam = _check_lambda(lam)
    if mask.kind == "polynomial":
        out = mask.c * np.minimum(lam, mask.lambda_max) ** mask.q
    elif mask.kind == "logistic":
        out = mask.saturation / (1.0 + np.exp(-lam))
    else:
        out = np.full_like(lam, mask.c)
    return out if out.ndim else float(out)


def mask_deriv(mask: MaskFn, lam):
    lam = _check_lambda(lam)
    if mask.kind == "polynomial":
        out = np.where(lam < mask.lambda_max, mask.c * mask.q * lam ** (mask.q - 1), 0.0)
    elif mask.kind == "logistic":
        m = mask.saturation / (1.0 + np.exp(-lam))
        out = m * (1.0 - m / mask.saturation)
    else:
        out = np.zeros_like(lam)
    return out if out.ndim else float(out)


# hyperparameters of the polynomial and logistic masks used for the
# second-order linear benchmark
RESIDUAL_POLYNOMIAL = MaskFn.polynomial(c=0.1, q=2, lambda_max=10.0)
BOUNDARY_POLYNOMIAL = MaskFn.polynomial(c=1000.0, q=2, lambda_max=1000.0)
RESIDUAL_LOGISTIC = MaskFn.logistic(saturation=0.1)
BOUNDARY_LOGISTIC = MaskFn.logistic(saturation=1000.0)


@dataclass
class SapinnState:
    lambda_f: np.ndarray
    lambda_b: np.ndarray
    mask_f: MaskFn
    mask_b: MaskFn
    rho: float = SAPINN_ASCENT_RATE

    def __post_init__(self):
        self.lambda_f = np.array(self.lambda_f, dtype=float)
        self.lambda_b = np.array(self.lambda_b, dtype=float)
        if np.any(self.lambda_f < 0) or np.any(self.lambda_b < 0):
            raise ValueError("self-adaptation weights must be non-negative")

    @classmethod
    def initial(cls, n_f: int, n_b: int, mask_f: MaskFn, mask_b: MaskFn) -> "SapinnState":
        """All weights start at 1."""
        return cls(np.ones(n_f), np.ones(n_b), mask_f, mask_b)

    def copy(self) -> "SapinnState":
        return SapinnState(self.lambda_f.copy(), self.lambda_b.copy(), self.mask_f, self.mask_b, self.rho)


def _sapinn_inputs(residuals, boundary_errors, state: SapinnState):
    r = np.asarray(residuals, dtype=float).ravel()
    e = np.asarray(boundary_errors, dtype=float).ravel()
    if r.shape != state.lambda_f.shape:
        raise ValueError(f"{r.size} residuals but {state.lambda_f.size} residual weights")
    if e.shape != state.lambda_b.shape:
        raise ValueError(f"{e.size} boundary errors but {state.lambda_b.size} boundary weights")
    return r, e


def sapinn_parts(residuals, boundary_errors, state: SapinnState) -> tuple[float, float]:
    """Masked residual loss and masked boundary loss."""
    r, e = _sapinn_inputs(residuals, boundary_errors, state)
    loss_f = float(np.mean(mask_eval(state.mask_f, state.lambda_f) * r * r)) if r.size else 0.0
    loss_b = float(np.mean(mask_eval(state.mask_b, state.lambda_b) * e * e)) if e.size else 0.0
    return loss_f, loss_b


def sapinn_loss(residuals, boundary_errors, state: SapinnState) -> float:
    loss_f, loss_b = sapinn_parts(residuals, boundary_errors, state)
    return loss_f + loss_b


def sapinn_lambda_grads(residuals, boundary_errors, state: SapinnState) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the SAPINN loss with respect to lambda_f and lambda_b (always >= 0)."""
    r, e = _sapinn_inputs(residuals, boundary_errors, state)
    g_f = mask_deriv(state.mask_f, state.lambda_f) * r * r / max(r.size, 1)
    g_b = mask_deriv(state.mask_b, state.lambda_b) * e * e / max(e.size, 1)
    return np.asarray(g_f, dtype=float), np.asarray(g_b, dtype=float)


def sapinn_point_weights(state: SapinnState) -> tuple[np.ndarray, np.ndarray]:
    """Per-point multipliers m(lambda) applied to the squared errors."""
    return (np.asarray(mask_eval(state.mask_f, state.lambda_f), dtype=float),
            np.asarray(mask_eval(state.mask_b, state.lambda_b), dtype=float))


def floating_boundary(u0: float, u_pred_at_x0: float) -> float:
    """Output shift that pins the model to ``u0`` at the initial point."""
    return float(u0) - float(u_pred_at_x0)
