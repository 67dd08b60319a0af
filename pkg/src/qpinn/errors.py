"""Exception hierarchy used across the package."""


class QPINNError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QPINNError, ValueError):
    """Invalid circuit, problem or run configuration."""


class DomainError(QPINNError, ValueError):
    """Input outside the domain guarded by the Chebyshev feature map."""


class SingularityError(DomainError):
    """Input too close to x = +-1 where the chain-rule factors blow up."""


class UndefinedMetricError(QPINNError, ValueError):
    """Metric cannot be computed (e.g. R^2 against a constant truth)."""


class StiffnessError(QPINNError, RuntimeError):
    """Adaptive integrator step size underflowed."""


class DivergenceError(QPINNError, RuntimeError):
    """Training loss became non-finite or exceeded the divergence guard."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration} (loss={loss!r})")
