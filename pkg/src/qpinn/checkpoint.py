"""Plain-text checkpoints.

Layout::

    qpinn-checkpoint 1
    [config]
    problem = riccati
    ...
    [theta.0]
    <count>
    <one value per line>
    [output_shift.0]
    1
    <value>
    [lambda_f]
    <count>
    ...
    [lambda_b]
    <count>
    ...

Values are written with 17 significant digits, which round-trips doubles exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigurationError

MAGIC = "qpinn-checkpoint"
VERSION = 1


def fmt(value: float) -> str:
    return format(float(value), ".17g")


@dataclass
class Checkpoint:
    config: RunConfig
    thetas: list[np.ndarray]
    output_shifts: list[float]
    lambda_f: np.ndarray
    lambda_b: np.ndarray


def _section(name: str, values) -> list[str]:
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return [f"[{name}]", str(values.size)] + [fmt(v) for v in values]


def dumps(ckpt: Checkpoint) -> str:
    lines = [f"{MAGIC} {VERSION}", "[config]"]
    lines += ckpt.config.to_text().splitlines()
    for k, (theta, shift) in enumerate(zip(ckpt.thetas, ckpt.output_shifts)):
        lines += _section(f"theta.{k}", theta)
        lines += _section(f"output_shift.{k}", [shift])
    lines += _section("lambda_f", ckpt.lambda_f)
    lines += _section("lambda_b", ckpt.lambda_b)
    return "\n".join(lines) + "\n"


def save(ckpt: Checkpoint, path) -> None:
    Path(path).write_text(dumps(ckpt))


def loads(text: str, source: str = "<checkpoint>") -> Checkpoint:
    lines = text.splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise ConfigurationError(f"{source}: not a version-{VERSION} checkpoint")
    if len(lines) < 2 or lines[1] != "[config]":
        raise ConfigurationError(f"{source}: missing [config] section")
    i = 2
    config_lines = []
    while i < len(lines) and not lines[i].startswith("["):
        config_lines.append(lines[i])
        i += 1
    config = load_config("\n".join(config_lines), f"{source} [config]")
    arrays: dict[str, np.ndarray] = {}
    while i < len(lines):
        header = lines[i]
        if not (header.startswith("[") and header.endswith("]")):
            raise ConfigurationError(f"{source}:{i + 1}: expected a section header, got {header!r}")
        name = header[1:-1]
        try:
            count = int(lines[i + 1])
            values = np.array([float(v) for v in lines[i + 2:i + 2 + count]])
        except (IndexError, ValueError):
            raise ConfigurationError(f"{source}: malformed section [{name}]") from None
        if values.size != count:
            raise ConfigurationError(f"{source}: section [{name}] is truncated")
        arrays[name] = values
        i += 2 + count
    thetas, shifts = [], []
    k = 0
    while f"theta.{k}" in arrays:
        thetas.append(arrays[f"theta.{k}"])
        shifts.append(float(arrays.get(f"output_shift.{k}", [0.0])[0]))
        k += 1
    if not thetas:
        raise ConfigurationError(f"{source}: no parameter sections")
    return Checkpoint(config, thetas, shifts, arrays.get("lambda_f", np.zeros(0)), arrays.get("lambda_b", np.zeros(0)))


def load(path) -> Checkpoint:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return loads(text, str(path))
