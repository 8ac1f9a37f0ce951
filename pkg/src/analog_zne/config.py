"""Flat ``key = value`` experiment configuration with typed fields.

Lines look like ``omega = 1.0``; ``#`` starts a comment. Lists are comma
separated. A time grid may be written as ``start:stop:count`` for evenly spaced
points. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .zne import richardson_weights

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "load_config", "format_config", "EXPERIMENTS"]

EXPERIMENTS = ("rabi_gaussian", "pxp_scars", "thermal_rabi", "ising_thermal", "bounds_report")
ZNE_METHODS = ("loocv", "least_squares", "richardson")
MODES = ("quadrature", "monte_carlo", "analytic_oracle")


class ConfigError(ValueError):
    """Config text that cannot be parsed into typed fields."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Noise nodes are ``theta0 * theta_multiples`` unless ``thetas`` is given.
    Thermal experiments instead derive them from ``wait_times`` through the
    heating line ``theta0 + heating_rate * t_w``.
    """

    experiment: str = "rabi_gaussian"
    times: tuple[float, ...] = ()
    sites: int = 12
    omega: float = 1.0
    coupling: float = 1.0
    alpha: float = 1e-3
    noise: str = "gaussian"
    centered: bool = False
    theta0: float = 0.0064
    theta_multiples: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    thetas: tuple[float, ...] = ()
    wait_times: tuple[float, ...] = ()
    heating_rate: float = 0.05
    calibrate: bool = True
    calib_times: tuple[float, ...] = ()
    calib_shots: int = 600
    mode: str = "quadrature"
    samples: int = 600
    nodes: int = 40
    shots: int = 0
    bitflip_p: float = 0.0
    postselect: tuple[str, ...] = ()
    zne_method: str = "loocv"
    zne_degree: int = -1
    max_degree: int = -1
    zero_linear: bool = False
    bounds: bool = False
    epsilon: float = 0.05
    seed: int = 0
    output: str = "out"

    def node_thetas(self) -> list[float]:
        if self.experiment in ("thermal_rabi", "ising_thermal"):
            return [self.theta0 + self.heating_rate * tw for tw in self.wait_times]
        if self.thetas:
            return list(self.thetas)
        return [self.theta0 * m for m in self.theta_multiples]

    def validate(self) -> list[str]:
        """All violated preconditions as ``field: message`` strings; empty when valid."""
        errs = []

        def bad(name, msg):
            errs.append(f"{name}: {msg}")

        if self.experiment not in EXPERIMENTS:
            bad("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if len(self.times) == 0:
            bad("times", "time grid is empty")
        elif any(not math.isfinite(t) for t in self.times):
            bad("times", "times must be finite")
        elif any(b <= a for a, b in zip(self.times, self.times[1:])):
            bad("times", "times must be strictly ascending")
        elif self.times[0] < 0:
            bad("times", "times must be >= 0")
        if self.experiment == "pxp_scars" and self.sites < 2:
            bad("sites", "PXP chain needs at least 2 sites")
        if self.experiment == "pxp_scars" and self.sites > 16:
            bad("sites", "more than 16 sites is beyond dense exact simulation")
        if not self.omega > 0:
            bad("omega", "drive frequency must be positive")
        if self.coupling == 0:
            bad("coupling", "coupling must be nonzero")
        if self.alpha == 0:
            bad("alpha", "thermal scale must be nonzero")
        if self.noise not in ("gaussian", "thermal"):
            bad("noise", "must be gaussian or thermal")
        if self.mode not in MODES:
            bad("mode", f"must be one of {', '.join(MODES)}")
        if self.mode == "monte_carlo" and self.samples < 1:
            bad("samples", "Monte Carlo needs at least one sample")
        if self.mode == "quadrature" and not 1 <= self.nodes <= 100:
            bad("nodes", "quadrature order must lie in [1, 100]")
        if self.shots < 0:
            bad("shots", "must be >= 0 (0 means exact projection)")
        if not 0 <= self.bitflip_p <= 1:
            bad("bitflip_p", "must lie in [0, 1]")
        if (self.bitflip_p > 0 or self.postselect) and self.shots == 0:
            bad("shots", "bit flips and post-selection need a finite shot count")
        width = 2 if self.experiment == "ising_thermal" else None
        for b in self.postselect:
            if set(b) - set("01") or (width and len(b) != width):
                bad("postselect", f"{b!r} is not a bitstring over the measured qubits")
        if self.zne_method not in ZNE_METHODS:
            bad("zne_method", f"must be one of {', '.join(ZNE_METHODS)}")
        if self.zne_method == "least_squares" and self.zne_degree < 0:
            bad("zne_degree", "least_squares needs a degree >= 0")
        if not 0 < self.epsilon < 1:
            bad("epsilon", "failure probability must lie in (0, 1)")

        thermal = self.experiment in ("thermal_rabi", "ising_thermal")
        if thermal:
            if len(self.wait_times) < 2:
                bad("wait_times", "need at least two wait times")
            if self.heating_rate < 0:
                bad("heating_rate", "must be >= 0")
            if self.calib_shots < 1:
                bad("calib_shots", "must be >= 1")
            if self.calibrate and len(self.calib_times) < 8:
                bad("calib_times", "calibration needs at least 8 time points")
        thetas = self.node_thetas()
        if len(thetas) < 2:
            bad("thetas", "need at least two noise nodes")
        elif any(not (t > 0 and math.isfinite(t)) for t in thetas):
            bad("thetas", "noise nodes must be positive and finite")
        else:
            try:
                richardson_weights(thetas)
            except ValueError as exc:
                bad("thetas", str(exc))
        if thermal and thetas and max(thetas) >= 1:
            bad("thetas", "thermal frequency correction needs theta < 1")
        if self.zne_method == "loocv" and len(thetas) < 3:
            bad("zne_method", "LOOCV needs at least three noise nodes")
        if self.zne_method == "least_squares" and self.zne_degree >= len(thetas):
            bad("zne_degree", "degree must be below the number of noise nodes")
        return errs


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_LIST_FIELDS = {"times", "theta_multiples", "thetas", "wait_times", "calib_times", "postselect"}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 0:
            raise ValueError("range count must be >= 0")
        return tuple(float(x) for x in np.linspace(start, stop, count))
    return tuple(float(x) for x in text.split(","))


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    if name == "postselect":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if name in _LIST_FIELDS:
        return _parse_floats(raw)
    if kind == "bool":
        return _parse_bool(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; raises ConfigError listing every malformed line."""
    values, errs = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            errs.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errs.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            errs.append(f"line {lineno}: {key}: {exc}")
    if errs:
        raise ConfigError("\n".join(errs))
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` for every field."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"

