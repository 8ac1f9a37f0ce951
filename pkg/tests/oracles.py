"""Independent reference implementations used only by the tests.

These deliberately avoid the package's code paths: operators are built from
Kronecker products, evolution uses ``scipy.linalg.expm``, moments are brute-force
sums and Lagrange weights use exact rationals.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.linalg import expm

# (down, up) basis; up is the +1 eigenstate of Z
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.diag([-1.0, 1.0]).astype(complex),
}
N_DOWN = np.diag([1.0, 0.0]).astype(complex)


def kron_all(mats):
    return reduce(np.kron, mats)


def pauli_matrix(letters: str, coeff: float = 1.0) -> np.ndarray:
    return coeff * kron_all([PAULI[c] for c in letters])


def site_op(L: int, site: int, op: np.ndarray) -> np.ndarray:
    mats = [np.eye(2)] * L
    mats = list(mats)
    mats[site - 1] = op
    return kron_all(mats)


def pxp_matrix(L: int, omega: float = 1.0) -> np.ndarray:
    h = np.zeros((2**L, 2**L), dtype=complex)
    for i in range(1, L + 1):
        mats = [np.eye(2, dtype=complex)] * L
        mats = list(mats)
        mats[i - 1] = PAULI["X"]
        if i > 1:
            mats[i - 2] = N_DOWN
        if i < L:
            mats[i] = N_DOWN
        h += kron_all(mats)
    return omega * h


def stag_matrix(L: int) -> np.ndarray:
    return sum((-1) ** i * site_op(L, i, PAULI["Z"]) for i in range(1, L + 1))


def basis(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def expm_evolve(h: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    return expm(-1j * t * h) @ psi0


def thermal_moment_bruteforce(nbar: float, k: int, offset: float = 0.0) -> float:
    """``E[(n - offset)^k]`` by direct summation until the weighted tail is negligible."""
    if nbar == 0:
        return float((-offset) ** k)
    q = nbar / (nbar + 1.0)
    terms = []
    n = 0
    weight = 1.0 / (nbar + 1.0)
    while True:
        term = weight * (n - offset) ** k
        terms.append(term)
        # stop once terms are decreasing and far below the running total
        if n > k * (nbar + 1) + 50 and abs(term) < 1e-20 * abs(math.fsum(terms)) + 1e-300:
            break
        n += 1
        weight *= q
    return math.fsum(terms)


def lagrange_weights_exact(thetas) -> list[Fraction]:
    th = [Fraction(t) for t in thetas]
    return [math.prod(tk / (tk - ti) for k, tk in enumerate(th) if k != i) for i, ti in enumerate(th)]


def gaussian_rabi(omega_t, variance):
    """``P_up`` of ``(1 + delta) * omega * X`` from ``|down>`` averaged over ``N(0, variance)``."""
    x = np.asarray(omega_t, dtype=float)
    return 0.5 * (1.0 - np.exp(-2.0 * variance * x**2) * np.cos(2.0 * x))


def thermal_characteristic(s, nbar: float, alpha: float, offset: float = 0.0):
    """Exact ``E[exp(i s alpha (n - offset))]`` for the geometric distribution."""
    s = np.asarray(s, dtype=float)
    return np.exp(-1j * s * alpha * offset) / (1.0 - nbar * (np.exp(1j * s * alpha) - 1.0))
