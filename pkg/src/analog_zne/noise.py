"""Shot-to-shot noise distributions over the per-shot scalar ``delta``.

Each model carries its distribution parameter ``theta``, the abscissa used by
zero-noise extrapolation: the variance for Gaussian noise and ``alpha * nbar``
for thermal (geometric) phonon noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gamma

__all__ = [
    "NoiseModel",
    "Gaussian",
    "Thermal",
    "PointMass",
    "eulerian",
    "thermal_occupation_moment",
    "thermal_cutoff",
    "check_mitigable",
    "MitigabilityReport",
    "model_from_record",
    "TAIL_MASS",
    "MAX_OCCUPATION",
]

TAIL_MASS = 1e-12
MAX_OCCUPATION = 10**7
MAX_HERMITE_ORDER = 100


class NoiseModel:
    """Common interface; concrete models are frozen dataclasses."""

    theta: float

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def abs_moment_bound(self, k: int) -> float:
        raise NotImplementedError

    def quadrature(self, num_nodes: int = 40) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def with_theta(self, theta: float) -> "NoiseModel":
        raise NotImplementedError

    def to_record(self) -> dict:
        raise NotImplementedError


def _check_order(k: int):
    if int(k) != k or k < 1:
        raise ValueError(f"moment order must be a positive integer, got {k}")


def _check_rng(rng):
    if not isinstance(rng, np.random.Generator):
        raise TypeError("sampling needs a numpy Generator (np.random.default_rng(seed))")


@dataclass(frozen=True)
class Gaussian(NoiseModel):
    """Zero-mean normal fluctuations with variance ``variance``."""

    variance: float

    def __post_init__(self):
        if not (self.variance >= 0 and np.isfinite(self.variance)):
            raise ValueError("Gaussian variance must be finite and >= 0")

    @property
    def theta(self) -> float:
        return float(self.variance)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def sample(self, rng, size=None):
        _check_rng(rng)
        return rng.normal(0.0, self.sigma, size=size)

    def moment(self, k: int) -> float:
        _check_order(k)
        if k % 2:
            return 0.0
        return self.variance ** (k // 2) * _double_factorial(k - 1)

    def abs_moment_bound(self, k: int) -> float:
        """Exact absolute moment ``E|delta|^k``."""
        _check_order(k)
        return self.sigma**k * 2 ** (k / 2) * gamma((k + 1) / 2) / math.sqrt(math.pi)

    def quadrature(self, num_nodes: int = 40):
        if int(num_nodes) != num_nodes or num_nodes < 1:
            raise ValueError("need at least one quadrature node")
        if num_nodes > MAX_HERMITE_ORDER:
            raise ValueError(f"Gauss-Hermite order above {MAX_HERMITE_ORDER} is numerically unstable")
        if self.variance == 0:
            return np.zeros(1), np.ones(1)
        x, w = np.polynomial.hermite.hermgauss(int(num_nodes))
        return math.sqrt(2.0) * self.sigma * x, w / math.sqrt(math.pi)

    def with_theta(self, theta: float) -> "Gaussian":
        return Gaussian(theta)

    def to_record(self) -> dict:
        return {"kind": "gaussian", "variance": self.variance}


@dataclass(frozen=True)
class Thermal(NoiseModel):
    """``delta = alpha * n`` with ``n`` thermally (geometrically) distributed, mean ``nbar``.

    With ``centered`` the mean is removed, ``delta = alpha * (n - nbar)``, which is
    what a first-order drive recalibration achieves.
    """

    nbar: float
    alpha: float = 1.0
    centered: bool = False

    def __post_init__(self):
        if not (self.nbar >= 0 and np.isfinite(self.nbar)):
            raise ValueError("mean occupation must be finite and >= 0")
        if self.alpha == 0 or not np.isfinite(self.alpha):
            raise ValueError("thermal scale alpha must be finite and nonzero")

    @property
    def theta(self) -> float:
        return float(self.alpha * self.nbar)

    @property
    def offset(self) -> float:
        return self.nbar if self.centered else 0.0

    def pmf(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return (1.0 / (self.nbar + 1.0)) * (self.nbar / (self.nbar + 1.0)) ** n

    def sample(self, rng, size=None):
        _check_rng(rng)
        n = rng.geometric(1.0 / (self.nbar + 1.0), size=size) - 1
        return self.alpha * (n - self.offset)

    def sample_occupation(self, rng, size=None):
        _check_rng(rng)
        return rng.geometric(1.0 / (self.nbar + 1.0), size=size) - 1

    def moment(self, k: int) -> float:
        _check_order(k)
        if not self.centered:
            return self.alpha**k * thermal_occupation_moment(self.nbar, k)
        nbar = Fraction(self.nbar)
        raw = [Fraction(1)] + [_exact_occupation_moment(nbar, i) for i in range(1, k + 1)]
        central = sum(math.comb(k, i) * raw[i] * (-nbar) ** (k - i) for i in range(k + 1))
        return self.alpha**k * float(central)

    def abs_moment_bound(self, k: int) -> float:
        """Upper bound on ``E|delta|^k`` from the factorial growth of geometric moments."""
        _check_order(k)
        scale = abs(self.alpha) ** k
        if not self.centered:
            return scale * (self.nbar + 1.0) ** k * math.factorial(k)
        if k % 2 == 0:
            return scale * _central_bound(self.nbar, k)
        # odd orders: Lyapunov, E|X|^k <= (E X^(k+1))^(k/(k+1))
        return scale * _central_bound(self.nbar, k + 1) ** (k / (k + 1))

    def cutoff(self) -> int:
        return thermal_cutoff(self.nbar)

    def quadrature(self, num_nodes: int = 40):
        """Exact enumeration of occupations up to tail mass ``TAIL_MASS``; ``num_nodes`` is unused."""
        n = np.arange(self.cutoff() + 1)
        w = self.pmf(n)
        w /= w.sum()
        return self.alpha * (n - self.offset), w

    def with_theta(self, theta: float) -> "Thermal":
        return Thermal(theta / self.alpha, self.alpha, self.centered)

    def to_record(self) -> dict:
        return {"kind": "thermal", "nbar": self.nbar, "alpha": self.alpha, "centered": self.centered}


@dataclass(frozen=True)
class PointMass(NoiseModel):
    """Deterministic ``delta``; ``PointMass(0)`` is the noiseless limit."""

    delta: float = 0.0

    @property
    def theta(self) -> float:
        return abs(float(self.delta))

    def sample(self, rng, size=None):
        _check_rng(rng)
        if size is None:
            return float(self.delta)
        return np.full(size, float(self.delta))

    def moment(self, k: int) -> float:
        _check_order(k)
        return float(self.delta) ** k

    def abs_moment_bound(self, k: int) -> float:
        _check_order(k)
        return abs(float(self.delta)) ** k

    def quadrature(self, num_nodes: int = 1):
        return np.array([float(self.delta)]), np.ones(1)

    def with_theta(self, theta: float) -> "PointMass":
        return PointMass(math.copysign(theta, self.delta) if self.delta else theta)

    def to_record(self) -> dict:
        return {"kind": "point_mass", "delta": self.delta}


def model_from_record(record: dict) -> NoiseModel:
    kind = record.get("kind")
    if kind == "gaussian":
        return Gaussian(float(record["variance"]))
    if kind == "thermal":
        return Thermal(float(record["nbar"]), float(record.get("alpha", 1.0)), bool(record.get("centered", False)))
    if kind == "point_mass":
        return PointMass(float(record.get("delta", 0.0)))
    raise ValueError(f"unknown noise kind {kind!r}")


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


@lru_cache(maxsize=None)
def eulerian(k: int) -> tuple[int, ...]:
    """Eulerian numbers ``A(k, j)`` for ``j = 0..k-1``."""
    row = [1]
    for m in range(2, k + 1):
        prev = row + [0]
        row = [(j + 1) * prev[j] + (m - j) * (prev[j - 1] if j else 0) for j in range(m)]
    return tuple(row)


def _exact_occupation_moment(nbar: Fraction, k: int) -> Fraction:
    return sum(a * nbar ** (k - j) * (nbar + 1) ** j for j, a in enumerate(eulerian(k)))


def thermal_occupation_moment(nbar: float, k: int) -> float:
    """``E[n^k]`` of the thermal distribution via the Eulerian-number polylog form."""
    _check_order(k)
    return float(_exact_occupation_moment(Fraction(nbar), k))


def _central_bound(nbar: float, k: int) -> float:
    alternating = sum((-1) ** j / math.factorial(j) for j in range(k + 1))
    return math.exp(-1.0 / (nbar + 1.0)) * (nbar + 1.0) ** k * math.factorial(k) * alternating


def thermal_cutoff(nbar: float) -> int:
    """Largest occupation kept so the discarded tail mass is below ``TAIL_MASS``."""
    if nbar == 0:
        return 0
    q = nbar / (nbar + 1.0)
    # P(n > N) = q ** (N + 1)
    n_max = math.ceil(math.log(TAIL_MASS) / math.log(q)) - 1
    return int(min(max(n_max, 0), MAX_OCCUPATION))


@dataclass
class MitigabilityReport:
    degrees: dict[int, int]

    @property
    def mitigable(self) -> bool:
        return all(d <= k for k, d in self.degrees.items())


def check_mitigable(model: NoiseModel, k_max: int, thetas: Sequence[float], rtol: float = 1e-8) -> MitigabilityReport:
    """Fit each raw moment over ``thetas`` and record the lowest adequate polynomial degree."""
    thetas = np.asarray(sorted(set(float(t) for t in thetas)))
    if len(thetas) < k_max + 2:
        raise ValueError(f"need at least {k_max + 2} distinct theta values for k_max = {k_max}")
    scale = np.max(np.abs(thetas))
    if scale == 0:
        raise ValueError("theta grid is degenerate")
    x = thetas / scale
    degrees = {}
    for k in range(1, k_max + 1):
        y = np.array([model.with_theta(t).moment(k) for t in thetas])
        norm = np.linalg.norm(y)
        for deg in range(len(thetas)):
            if norm == 0:
                degrees[k] = 0
                break
            coef = np.polynomial.polynomial.polyfit(x, y, deg)
            resid = y - np.polynomial.polynomial.polyval(x, coef)
            if np.linalg.norm(resid) < rtol * norm:
                degrees[k] = deg
                break
        else:
            degrees[k] = len(thetas)
    return MitigabilityReport(degrees)
