"""Exact pure-state time evolution and expectation values."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .operators import OperatorSum

__all__ = [
    "EvolutionPlan",
    "KrylovBreakdownError",
    "Eigensystem",
    "EvolutionResult",
    "evolve",
    "expectation",
    "moments",
    "reachable_subspace",
    "DENSE_DIM_LIMIT",
]

DENSE_DIM_LIMIT = 4096
HERMITIAN_TOL = 1e-10


class KrylovBreakdownError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:g})")
        self.time = time


@dataclass(frozen=True)
class EvolutionPlan:
    """How to propagate: ``method`` is ``"eig"`` or ``"krylov"``; ``"auto"`` picks by size."""

    times: tuple[float, ...]
    method: str = "auto"
    krylov_dim: int = 30
    dt: float = 0.05

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if any(not np.isfinite(t) for t in times):
            raise ValueError("times must be finite")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("times must be ascending")
        if self.method not in ("auto", "eig", "krylov"):
            raise ValueError(f"unknown evolution method {self.method!r}")
        if self.method == "krylov":
            if self.krylov_dim < 2:
                raise ValueError("Krylov subspace dimension must be >= 2")
            if not self.dt > 0:
                raise ValueError("Krylov step must be positive")
            if times and times[0] < 0:
                raise ValueError("Krylov propagation only runs forward in time")

    def resolve(self, dim: int) -> str:
        if self.method != "auto":
            return self.method
        return "eig" if dim <= DENSE_DIM_LIMIT else "krylov"


@dataclass
class EvolutionResult:
    states: list[np.ndarray]
    times: list[float]
    snap_errors: list[float] = field(default_factory=list)

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


def _as_matrix(h):
    if isinstance(h, OperatorSum):
        return h.to_sparse() if h.num_sites > 12 else h.to_dense()
    return h


def _check_hermitian(h):
    if sp.issparse(h):
        asym = abs(h - h.getH()).max() if h.nnz else 0.0
    else:
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("Hamiltonian must be a square matrix")
        asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (max asymmetry {asym:.3g})")


class Eigensystem:
    """Cached eigendecomposition ``H = V diag(E) V^dagger`` for repeated propagation."""

    def __init__(self, h):
        h = _as_matrix(h)
        if sp.issparse(h):
            h = h.toarray()
        h = np.asarray(h)
        _check_hermitian(h)
        self.energies, self.vectors = np.linalg.eigh(h)
        self.dim = h.shape[0]

    def coefficients(self, psi0: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ psi0

    def propagate(self, psi0: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """States at each time as columns, shape ``(dim, len(times))``."""
        c = self.coefficients(psi0)
        phases = np.exp(-1j * np.outer(self.energies, np.asarray(times, dtype=float)))
        return self.vectors @ (c[:, None] * phases)


def _lanczos_step(h, psi: np.ndarray, m: int, dt: float, time: float) -> np.ndarray:
    norm0 = np.linalg.norm(psi)
    basis = np.zeros((psi.size, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    basis[:, 0] = psi / norm0
    size = m
    scale = None
    for j in range(m):
        w = h @ basis[:, j]
        alpha[j] = np.vdot(basis[:, j], w).real
        w = w - alpha[j] * basis[:, j]
        if j > 0:
            w = w - beta[j - 1] * basis[:, j - 1]
        # full reorthogonalization keeps the small basis numerically orthonormal
        w = w - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
        b = np.linalg.norm(w)
        if scale is None:
            scale = max(abs(alpha[0]), b, 1.0)
        if j == m - 1:
            break
        if b < 1e-12 * scale:
            # invariant subspace reached; the truncated projection is exact
            size = j + 1
            break
        beta[j] = b
        basis[:, j + 1] = w / b
    tri = np.diag(alpha[:size]) + np.diag(beta[: size - 1], 1) + np.diag(beta[: size - 1], -1)
    small = sla.expm(-1j * dt * tri)[:, 0]
    out = norm0 * (basis[:, :size] @ small)
    if not np.all(np.isfinite(out)) or abs(np.linalg.norm(out) - norm0) > 1e-8:
        raise KrylovBreakdownError("Krylov step lost normalization", time)
    return out


def _evolve_krylov(h, psi0, plan: EvolutionPlan) -> EvolutionResult:
    if not sp.issparse(h):
        h = np.asarray(h)
    states, snapped, errors = [], [], []
    psi = np.array(psi0, dtype=complex)
    step = 0
    for t in plan.times:
        target = int(round(t / plan.dt))
        while step < target:
            psi = _lanczos_step(h, psi, plan.krylov_dim, plan.dt, (step + 1) * plan.dt)
            step += 1
        states.append(psi.copy())
        snapped.append(step * plan.dt)
        errors.append(abs(step * plan.dt - t))
    return EvolutionResult(states, snapped, errors)


def evolve(h, psi0: np.ndarray, plan: EvolutionPlan) -> EvolutionResult:
    """Propagate ``psi0`` under ``exp(-i h t)`` for every time in ``plan``.

    With the eigendecomposition method each time is evaluated independently
    from ``psi0``. The Krylov method steps through a fixed ``dt`` grid and
    snaps requested times to it; ``snap_errors`` records the offsets.
    """
    h = _as_matrix(h)
    psi0 = np.asarray(psi0, dtype=complex)
    if h.shape[0] != psi0.shape[0]:
        raise ValueError(f"state dimension {psi0.shape[0]} does not match Hamiltonian {h.shape[0]}")
    _check_hermitian(h)
    if plan.resolve(h.shape[0]) == "eig":
        cols = Eigensystem(h).propagate(psi0, plan.times)
        states = [cols[:, k] for k in range(cols.shape[1])]
        return EvolutionResult(states, list(plan.times), [0.0] * len(states))
    return _evolve_krylov(h, psi0, plan)


def moments(psi: np.ndarray, o) -> tuple[float, float]:
    """``(<O>, <O^2>)`` for a pure state; ``psi`` may hold states as columns."""
    psi = np.asarray(psi)
    if isinstance(o, OperatorSum):
        if psi.shape[0] != o.dim:
            raise ValueError(f"state dimension {psi.shape[0]} does not match observable {o.dim}")
        if o.is_diagonal():
            d = o.diagonal()
            prob = np.abs(psi) ** 2
            first = np.tensordot(d, prob, axes=(0, 0))
            second = np.tensordot(d * d, prob, axes=(0, 0))
            return _real(first), _real(second)
        o_psi = o.apply(psi)
    else:
        o = np.asarray(o)
        if psi.shape[0] != o.shape[0]:
            raise ValueError(f"state dimension {psi.shape[0]} does not match observable {o.shape[0]}")
        o_psi = o @ psi
    first = np.sum(psi.conj() * o_psi, axis=0)
    second = np.sum(o_psi.conj() * o_psi, axis=0)
    if np.max(np.abs(np.imag(first))) > 1e-10 * max(1.0, np.max(np.abs(first))):
        raise ValueError("observable expectation has a non-negligible imaginary part")
    return _real(first), _real(second)


def _real(x):
    x = np.real(x)
    return float(x) if np.ndim(x) == 0 else x


def expectation(psi: np.ndarray, o) -> float:
    """Real ``<psi|O|psi>``."""
    return moments(psi, o)[0]


def reachable_subspace(operators: Sequence, psi0: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Basis indices connected to the support of ``psi0`` by nonzero matrix elements.

    Evolution under any combination of ``operators`` never leaves this set, so
    the dynamics can be restricted to it without approximation.
    """
    mats = [_as_matrix(o) for o in operators]
    mats = [sp.csr_matrix(m) for m in mats]
    adj = abs(mats[0])
    for m in mats[1:]:
        adj = adj + abs(m)
    adj = abs(adj).tocsr()
    adj.data[adj.data <= tol] = 0.0
    adj.eliminate_zeros()
    start = np.flatnonzero(np.abs(psi0) > tol)
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque(start.tolist())
    indptr, indices = adj.indptr, adj.indices
    while queue:
        i = queue.popleft()
        for j in indices[indptr[i] : indptr[i + 1]]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return np.flatnonzero(seen)
