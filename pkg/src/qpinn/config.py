"""Run configuration files.

Grammar: one ``key = value`` per line; ``#`` starts a comment that runs to the
end of the line; blank lines are ignored; keys may appear at most once.
Unset keys fall back to the defaults of the chosen problem.

    problem = linear2nd
    layout = aec          # rc | aec
    alpha_f = 0.1
    alpha_b = 1000
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .optimizer import WEIGHTING_MODES, make_observable
from .problems import PROBLEM_IDS, ProblemSpec, make_problem

LAYOUT_NAMES = ("rc", "aec")
OBSERVABLE_NAMES = ("sum", "product", "weighted")


def _positive_int(key, text):
    value = _int(key, text)
    if value < 1:
        raise ConfigurationError(f"{key}: must be a positive integer, got {text!r}")
    return value


def _nonnegative_int(key, text):
    value = _int(key, text)
    if value < 0:
        raise ConfigurationError(f"{key}: must be a non-negative integer, got {text!r}")
    return value


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from None


def _real(key, text, positive=False):
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigurationError(f"{key}: must be finite, got {text!r}")
    if value < 0 or (positive and value == 0):
        raise ConfigurationError(f"{key}: must be {'positive' if positive else 'non-negative'}, got {text!r}")
    return value


def _choice(key, text, options):
    value = text.lower()
    if value not in options:
        raise ConfigurationError(f"{key}: expected one of {', '.join(options)}, got {text!r}")
    return value


def _weights(key, text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigurationError(f"{key}: expected comma-separated numbers, got {text!r}") from None


_PARSERS = {
    "problem": lambda k, t: _choice(k, t, PROBLEM_IDS),
    "layout": lambda k, t: _choice(k, t, LAYOUT_NAMES),
    "observable": lambda k, t: _choice(k, t, OBSERVABLE_NAMES),
    "observable_weights": _weights,
    "weighting": lambda k, t: _choice(k, t, WEIGHTING_MODES),
    "alpha_f": _real,
    "alpha_b": _real,
    "learning_rate": lambda k, t: _real(k, t, positive=True),
    "iterations": _nonnegative_int,
    "seed": _nonnegative_int,
    "output_dir": lambda k, t: t,
    "n_qubits": _positive_int,
    "depth": _nonnegative_int,
    "grid_size": lambda k, t: _int_at_least(k, t, 2),
}


def _int_at_least(key, text, lowest):
    value = _int(key, text)
    if value < lowest:
        raise ConfigurationError(f"{key}: must be an integer >= {lowest}, got {text!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    problem: str
    layout: str | None = None
    observable: str | None = None
    observable_weights: tuple[float, ...] | None = None
    weighting: str | None = None
    alpha_f: float | None = None
    alpha_b: float | None = None
    learning_rate: float | None = None
    iterations: int | None = None
    seed: int = 0
    output_dir: str = "qpinn_out"
    n_qubits: int | None = None
    depth: int | None = None
    grid_size: int | None = None

    def with_values(self, values: dict[str, str]) -> "RunConfig":
        """Copy with raw text values parsed and applied."""
        return replace(self, **parse_values(values))

    def problem_spec(self) -> ProblemSpec:
        overrides = {}
        for key in ("observable", "observable_weights", "weighting", "alpha_f", "alpha_b",
                    "learning_rate", "iterations", "n_qubits", "depth"):
            value = getattr(self, key)
            if value is not None:
                overrides[key] = value
        if self.layout is not None:
            overrides["layout"] = self.layout.upper()
        return make_problem(self.problem, grid_size=self.grid_size, **overrides)

    def resolved(self) -> "RunConfig":
        """Every setting made explicit, so the echo does not depend on library defaults."""
        spec = self.problem_spec()
        n_grid = int(round(len(spec.grid) ** 0.5)) if spec.is_2d else len(spec.grid)
        return replace(
            self,
            layout=spec.layout.lower(),
            observable=spec.observable,
            observable_weights=spec.observable_weights if spec.observable == "weighted" else None,
            weighting=spec.weighting,
            alpha_f=spec.alpha_f,
            alpha_b=spec.alpha_b,
            learning_rate=spec.learning_rate,
            iterations=spec.iterations,
            n_qubits=spec.n_qubits,
            depth=spec.depth,
            grid_size=n_grid,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


def parse_values(values: dict[str, str]) -> dict:
    out = {}
    for key, text in values.items():
        if key not in _PARSERS:
            raise ConfigurationError(f"unknown configuration key {key!r}; known keys: {', '.join(_PARSERS)}")
        text = text.strip()
        if not text:
            raise ConfigurationError(f"{key}: empty value")
        out[key] = _PARSERS[key](key, text)
    return out


def parse_lines(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` pairs from config text."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in pairs:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def load_config(text: str, source: str = "<config>", overrides: dict[str, str] | None = None) -> RunConfig:
    pairs = parse_lines(text, source)
    pairs.update(overrides or {})
    if "problem" not in pairs:
        raise ConfigurationError(f"{source}: missing required key 'problem'")
    parsed = parse_values(pairs)
    config = RunConfig(**parsed)
    make_observable(config.problem_spec())  # surface invalid combinations now
    return config


def read_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config(text, str(path), overrides)
