"""Thermal-noise calibration: Rabi-decay fits, heating lines and drive correction.

Thermal phonon noise shifts the mean Rabi frequency as well as damping the
oscillation. The workflow here is two-step: fit ``(omega, theta)`` from
single-qubit Rabi data at each wait time, then drive at ``omega * (1 - theta)``
so the residual noise is centered before extrapolating in ``theta``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lombscargle

from .noise import Thermal, thermal_occupation_moment
from .operators import HamiltonianPair

__all__ = [
    "ThermalFit",
    "HeatingModel",
    "thermal_rabi_curve",
    "thermal_rabi_envelope",
    "fit_thermal_rabi",
    "fit_heating",
    "corrected_frequency",
    "calibrated_pair",
    "effective_frequency",
    "two_body_coupling_shift",
    "write_calibration_csv",
    "CALIBRATION_HEADER",
]

log = logging.getLogger(__name__)

CALIBRATION_HEADER = ("t_w", "theta_fit", "theta_err", "omega_fit", "omega_err")
MIN_POINTS = 8


@dataclass(frozen=True)
class ThermalFit:
    """Result of fitting the thermal Rabi decay.

    Attributes:
        omega: Fitted oscillation frequency in ``cos(omega t)`` convention.
        theta: Fitted distribution parameter ``alpha * nbar``.
        residual: Weighted RMS residual at the optimum.
        omega_err: One-sigma uncertainty on ``omega`` from the fit covariance.
        theta_err: One-sigma uncertainty on ``theta``.
        converged: False when the iteration cap was hit; parameters are then best-so-far.
    """

    omega: float
    theta: float
    residual: float
    omega_err: float = math.nan
    theta_err: float = math.nan
    converged: bool = True
    evaluations: int = 0

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("fitted theta must be >= 0")
        if not math.isfinite(self.residual):
            raise ValueError("fit residual is not finite")

    def curve(self, times) -> np.ndarray:
        return thermal_rabi_curve(times, self.omega, self.theta)


@dataclass(frozen=True)
class HeatingModel:
    """Linear heating line ``theta(t_w) = theta_dot * t_w + theta_0``."""

    theta_dot: float
    theta_0: float
    theta_dot_err: float = 0.0
    theta_0_err: float = 0.0
    covariance: tuple = field(default=((0.0, 0.0), (0.0, 0.0)), repr=False)

    def __post_init__(self):
        if self.theta_dot < 0:
            raise ValueError(f"heating rate must be >= 0, got {self.theta_dot:g}")

    def theta(self, t_w):
        return self.theta_dot * np.asarray(t_w, dtype=float) + self.theta_0

    def wait_time(self, theta):
        """Wait time giving ``theta``; the inverse of :meth:`theta`."""
        if self.theta_dot == 0:
            raise ValueError("flat heating line cannot be inverted")
        return (np.asarray(theta, dtype=float) - self.theta_0) / self.theta_dot


def thermal_rabi_envelope(times, omega: float, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Contrast ``C`` and phase lag ``phi`` of thermally averaged Rabi flopping."""
    x = omega * theta * np.asarray(times, dtype=float)
    return 1.0 / np.sqrt(1.0 + x * x), np.arctan(x)


def thermal_rabi_curve(times, omega: float, theta: float) -> np.ndarray:
    """Up-state population ``(1 - C cos(omega t + phi)) / 2`` in the high-temperature limit."""
    t = np.asarray(times, dtype=float)
    c, phi = thermal_rabi_envelope(t, omega, theta)
    return 0.5 * (1.0 - c * np.cos(omega * t + phi))


def _initial_guess(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    span = t[-1] - t[0]
    steps = np.diff(t)
    steps = steps[steps > 0]
    nyquist = math.pi / np.median(steps)
    lowest = 2 * math.pi / span
    # 10x oversampled grid so the peak lands well inside the fit's basin
    grid = np.arange(lowest, nyquist, lowest / 10.0)
    power = lombscargle(t, y - y.mean(), grid)
    omega = float(grid[np.argmax(power)])

    # contrast at the last local extremum of the oscillation
    dev = np.abs(y - 0.5)
    peaks = [i for i in range(1, len(y) - 1) if dev[i] >= dev[i - 1] and dev[i] >= dev[i + 1]]
    i = peaks[-1] if peaks else int(np.argmax(dev))
    contrast = min(max(2.0 * dev[i], 1e-3), 1.0)
    theta = math.sqrt(max(1.0 / contrast**2 - 1.0, 0.0)) / (omega * t[i]) if t[i] > 0 else 0.0
    return omega, theta


def fit_thermal_rabi(
    times: Sequence[float],
    values: Sequence[float],
    std_errs: Sequence[float] | None = None,
    initial_guess: tuple[float, float] | None = None,
    max_evaluations: int = 2000,
) -> ThermalFit:
    """Weighted nonlinear least squares for ``(omega, theta)`` of thermal Rabi data.

    The envelope and the phase lag share ``theta``, so both are fitted through
    the closed form rather than as free amplitude and phase.

    Args:
        times: At least 8 ascending sample times covering one oscillation period.
        values: Up-state populations in ``[0, 1]``.
        std_errs: Per-point uncertainties; ``None`` or any zero gives unit weights.
        initial_guess: ``(omega, theta)``; estimated from the data when omitted.
        max_evaluations: Iteration cap; hitting it returns best-so-far with ``converged=False``.

    Returns:
        ThermalFit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("times and values must be 1-D arrays of equal length")
    if t.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} time points, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly ascending")
    nu = np.zeros_like(y) if std_errs is None else np.asarray(std_errs, dtype=float)
    if nu.shape != y.shape or np.any(nu < 0):
        raise ValueError("std_errs must be nonnegative and match values")
    # allow noisy points to stray outside [0, 1] by a few standard errors, exact ones by round-off
    slack = max(5.0 * float(nu.max()), 1e-9)
    if np.any(y < -slack) or np.any(y > 1.0 + slack):
        raise ValueError("populations must lie in [0, 1]")
    weights = 1.0 / nu if np.all(nu > 0) else np.ones_like(y)

    omega0, theta0 = initial_guess if initial_guess is not None else _initial_guess(t, y)
    if omega0 * (t[-1] - t[0]) < 2 * math.pi:
        raise ValueError("data must span at least one oscillation period")

    def resid(p):
        return weights * (thermal_rabi_curve(t, p[0], p[1]) - y)

    sol = least_squares(
        resid,
        x0=[omega0, max(theta0, 0.0)],
        bounds=([0.0, 0.0], [np.inf, np.inf]),
        x_scale=[omega0, max(theta0, 1e-3)],
        xtol=1e-8,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_evaluations,
    )
    converged = sol.status > 0
    if not converged:
        log.warning("thermal Rabi fit hit the evaluation cap; returning best-so-far")

    dof = max(t.size - 2, 1)
    chi2 = float(np.sum(sol.fun**2))
    jtj = sol.jac.T @ sol.jac
    cov = np.linalg.pinv(jtj)
    if not np.all(nu > 0):
        cov = cov * chi2 / dof
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return ThermalFit(
        omega=float(sol.x[0]),
        theta=float(max(sol.x[1], 0.0)),
        residual=math.sqrt(chi2 / t.size),
        omega_err=float(errs[0]),
        theta_err=float(errs[1]),
        converged=converged,
        evaluations=int(sol.nfev),
    )


def fit_heating(
    wait_times: Sequence[float], thetas: Sequence[float], std_errs: Sequence[float] | None = None
) -> HeatingModel:
    """Weighted straight-line fit of fitted ``theta`` against wait time.

    ``theta_0`` is the residual noise at zero wait; extrapolation targets
    ``theta = 0``, not ``t_w = 0``.
    """
    x = np.asarray(wait_times, dtype=float)
    y = np.asarray(thetas, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("wait times and thetas must be 1-D arrays of equal length")
    if x.size < 2:
        raise ValueError("need at least two wait times")
    if np.unique(x).size < 2:
        raise ValueError("wait times are degenerate; need two distinct values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("wait times and thetas must be finite")
    nu = None if std_errs is None else np.asarray(std_errs, dtype=float)
    weighted = nu is not None and np.all(nu > 0)
    w = 1.0 / nu if weighted else np.ones_like(y)

    design = np.column_stack([x, np.ones_like(x)]) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, y * w, rcond=None)
    cov = np.linalg.inv(design.T @ design)
    if not weighted:
        dof = x.size - 2
        resid = y - (coef[0] * x + coef[1])
        cov = cov * (float(resid @ resid) / dof if dof > 0 else 0.0)
    slope, intercept = float(coef[0]), float(coef[1])
    if slope < 0:
        raise ValueError(f"fitted heating rate is negative ({slope:g}); data show no heating")
    return HeatingModel(
        theta_dot=slope,
        theta_0=intercept,
        theta_dot_err=math.sqrt(max(cov[0, 0], 0.0)),
        theta_0_err=math.sqrt(max(cov[1, 1], 0.0)),
        covariance=tuple(map(tuple, cov)),
    )


def corrected_frequency(omega_target: float, theta: float) -> float:
    """Drive setting ``omega * (1 - theta)`` that cancels the first-order thermal shift."""
    if not abs(theta) < 1:
        raise ValueError(f"|theta| must be < 1, got {theta:g}")
    return omega_target * (1.0 - theta)


def calibrated_pair(pair: HamiltonianPair, theta: float) -> HamiltonianPair:
    """Rescale the drive ``h0`` by ``1 - theta`` and leave the noise operator alone.

    Under uncentered thermal noise with parameter ``theta`` this gives exactly
    the dynamics of the original pair under the centered distribution.
    """
    return pair.recalibrated(corrected_frequency(1.0, theta))


def effective_frequency(fit: ThermalFit) -> float:
    """Mean per-shot oscillation frequency ``omega * (1 + theta)`` implied by a fit.

    The fitted ``omega`` alone hides the thermal shift inside the phase lag,
    whose slope at early times is ``omega * theta``.
    """
    return fit.omega * (1.0 + fit.theta)


def two_body_coupling_shift(model: Thermal, corrected: bool = True) -> float:
    """Relative mean error of a coupling that scales as ``(1 + alpha n)^2``.

    Returns ``E[(1 + alpha n)^2] * s - 1`` with ``s = (1 - theta)^2`` when both
    drives are corrected and ``s = 1`` otherwise. The corrected shift is second
    order in ``theta``.
    """
    if model.centered:
        raise ValueError("pass the physical (uncentered) thermal model")
    a = model.alpha
    mean = 1.0 + 2.0 * a * model.nbar + a * a * thermal_occupation_moment(model.nbar, 2)
    scale = (1.0 - model.theta) ** 2 if corrected else 1.0
    return mean * scale - 1.0


def write_calibration_csv(path, wait_times: Sequence[float], fits: Sequence[ThermalFit]):
    if len(wait_times) != len(fits):
        raise ValueError("one fit per wait time")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(CALIBRATION_HEADER)
        for tw, f in zip(wait_times, fits):
            out.writerow([repr(float(tw)), repr(f.theta), repr(f.theta_err), repr(f.omega), repr(f.omega_err)])
