"""Pauli-string operators, model Hamiltonians, observables and product states.

Conventions used throughout the package:

* Sites are numbered ``1..L``. The leftmost letter of a Pauli string acts on
  site 1, and site 1 is the most significant bit of a basis index.
* Bit value 1 is spin up. ``Z|up> = +|up>``, ``Z|down> = -|down>``, so the
  single-site matrices are written in the ordered basis ``(down, up)``.
* ``n_i = (1 - Z_i)/2`` projects site ``i`` onto down (the atomic ground state).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "PauliString",
    "OperatorSum",
    "HamiltonianPair",
    "MAX_DENSE_SITES",
    "build_rabi",
    "build_pxp",
    "build_ising_pair",
    "make_state",
    "all_down",
    "neel",
    "bitstring",
    "make_observable",
    "p_up",
    "stag_mag",
    "z_diff",
    "parse_operator",
    "format_operator",
]

MAX_DENSE_SITES = 14
_LETTERS = frozenset("IXYZ")


@dataclass(frozen=True)
class PauliString:
    """A real coefficient times a tensor product of single-site Paulis."""

    letters: str
    coeff: float = 1.0

    def __post_init__(self):
        if len(self.letters) < 1:
            raise ValueError("Pauli string must act on at least one site")
        bad = set(self.letters) - _LETTERS
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")
        if not np.isfinite(self.coeff):
            raise ValueError("Pauli coefficient must be finite")
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def num_sites(self) -> int:
        return len(self.letters)

    def _masks(self):
        L = self.num_sites
        x_mask = z_mask = y_mask = 0
        for pos, letter in enumerate(self.letters):
            bit = 1 << (L - 1 - pos)
            if letter in "XY":
                x_mask |= bit
            if letter == "Z":
                z_mask |= bit
            if letter == "Y":
                y_mask |= bit
        return x_mask, z_mask, y_mask

    def action(self):
        """Return ``(target, phase)`` with ``P|b> = phase[b] |target[b]>``."""
        L = self.num_sites
        x_mask, z_mask, y_mask = self._masks()
        idx = np.arange(1 << L, dtype=np.int64)
        # (-1) ** (number of Z/Y sites in the down state)
        down_zy = _popcount(~idx & (z_mask | y_mask) & ((1 << L) - 1))
        phase = np.where(down_zy % 2 == 0, 1.0, -1.0).astype(complex)
        n_y = bin(y_mask).count("1")
        phase *= 1j**n_y
        return idx ^ x_mask, self.coeff * phase

    def is_diagonal(self) -> bool:
        return set(self.letters) <= {"I", "Z"}


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64)
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


class OperatorSum:
    """A Hermitian operator stored as a sum of real-weighted Pauli strings."""

    def __init__(self, terms: Iterable[PauliString]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("OperatorSum needs at least one term")
        lengths = {t.num_sites for t in terms}
        if len(lengths) != 1:
            raise ValueError(f"all Pauli strings must have equal length, got {sorted(lengths)}")
        self.terms = _combine(terms)
        self.num_sites = lengths.pop()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, str]]) -> "OperatorSum":
        return cls(PauliString(letters, coeff) for coeff, letters in pairs)

    @classmethod
    def zero(cls, num_sites: int) -> "OperatorSum":
        return cls([PauliString("I" * num_sites, 0.0)])

    @property
    def dim(self) -> int:
        return 1 << self.num_sites

    def __repr__(self):
        body = " + ".join(f"{t.coeff:g}*{t.letters}" for t in self.terms)
        return f"OperatorSum({body})"

    def __eq__(self, other):
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        return OperatorSum(self.terms + other.terms)

    def __mul__(self, scalar: float) -> "OperatorSum":
        return OperatorSum(PauliString(t.letters, t.coeff * scalar) for t in self.terms)

    __rmul__ = __mul__

    def is_diagonal(self) -> bool:
        return all(t.is_diagonal() for t in self.terms)

    @cached_property
    def _actions(self):
        return [t.action() for t in self.terms]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Matrix-free product ``O @ psi``; works for any ``L``."""
        psi = np.asarray(psi)
        if psi.shape[0] != self.dim:
            raise ValueError(f"state has dimension {psi.shape[0]}, operator needs {self.dim}")
        out = np.zeros(psi.shape, dtype=complex)
        for target, phase in self._actions:
            if psi.ndim == 1:
                out[target] += phase * psi
            else:
                out[target] += phase[:, None] * psi
        return out

    def diagonal(self, indices=None) -> np.ndarray:
        """Real diagonal of the operator (the full operator if ``is_diagonal``).

        ``indices`` restricts evaluation to those basis states, which avoids
        building a ``2**L`` array for large chains.
        """
        if indices is None:
            diag = np.zeros(self.dim)
            for term, (target, phase) in zip(self.terms, self._actions):
                if term.is_diagonal():
                    diag += phase.real
            return diag
        idx = np.asarray(indices, dtype=np.int64)
        diag = np.zeros(idx.shape)
        full = (1 << self.num_sites) - 1
        for term in self.terms:
            if term.is_diagonal():
                _, z_mask, _ = term._masks()
                diag += term.coeff * np.where(_popcount(~idx & z_mask & full) % 2 == 0, 1.0, -1.0)
        return diag

    def to_sparse(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        idx = np.arange(self.dim)
        for target, phase in self._actions:
            rows.append(target)
            cols.append(idx)
            vals.append(phase)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        )
        return mat.tocsr()

    def to_dense(self) -> np.ndarray:
        if self.num_sites > MAX_DENSE_SITES:
            raise ValueError(
                f"dense realization limited to L <= {MAX_DENSE_SITES}; use apply() or to_sparse()"
            )
        mat = self.to_sparse().toarray()
        if np.all(np.abs(mat.imag) == 0):
            return mat.real
        return mat

    def spectral_norm(self) -> float:
        if self.is_diagonal():
            return float(np.max(np.abs(self.diagonal())))
        return float(np.max(np.abs(np.linalg.eigvalsh(self.to_dense()))))

    def proportionality(self, other: "OperatorSum") -> float | None:
        """Return ``c`` with ``other == c * self`` exactly, or ``None``."""
        if self.num_sites != other.num_sites:
            return None
        mine = {t.letters: t.coeff for t in self.terms if t.coeff != 0.0}
        theirs = {t.letters: t.coeff for t in other.terms if t.coeff != 0.0}
        if not mine or mine.keys() != theirs.keys():
            return None
        ratios = {theirs[k] / mine[k] for k in mine}
        first = next(iter(ratios))
        if all(abs(r - first) <= 1e-14 * max(1.0, abs(first)) for r in ratios):
            return first
        return None


def _combine(terms: Sequence[PauliString]) -> tuple[PauliString, ...]:
    acc: dict[str, float] = {}
    for t in terms:
        acc[t.letters] = acc.get(t.letters, 0.0) + t.coeff
    kept = tuple(PauliString(k, v) for k, v in acc.items() if v != 0.0)
    if not kept:
        length = terms[0].num_sites
        return (PauliString("I" * length, 0.0),)
    return kept


@dataclass(frozen=True)
class HamiltonianPair:
    """Per-shot Hamiltonian ``h0 + delta * v``."""

    h0: OperatorSum
    v: OperatorSum

    def __post_init__(self):
        if self.h0.num_sites != self.v.num_sites:
            raise ValueError("h0 and v act on different numbers of sites")

    @property
    def num_sites(self) -> int:
        return self.h0.num_sites

    def at(self, delta: float) -> OperatorSum:
        return self.h0 + self.v * delta

    def noise_scale(self) -> float | None:
        """``c`` such that ``v = c * h0``; the shot Hamiltonian is then ``(1 + c*delta) h0``."""
        return self.h0.proportionality(self.v)

    def recalibrated(self, factor: float) -> "HamiltonianPair":
        """Rescale the drive ``h0`` by ``factor`` leaving the noise operator untouched."""
        return HamiltonianPair(self.h0 * factor, self.v)


def _single(L: int, site: int, letter: str) -> str:
    return "".join(letter if s == site else "I" for s in range(1, L + 1))


def _check_site(L: int, site: int):
    if not 1 <= site <= L:
        raise ValueError(f"site {site} outside 1..{L}")


def build_rabi(omega: float) -> HamiltonianPair:
    """Single qubit driven at Rabi frequency ``omega``: ``H = (1 + delta) omega X``."""
    if not omega > 0:
        raise ValueError("Rabi frequency must be positive")
    h0 = OperatorSum([PauliString("X", omega)])
    return HamiltonianPair(h0, h0)


def _projected_flip(L: int, site: int) -> list[PauliString]:
    # X_site times n_k for each existing neighbour k, expanded into Pauli strings
    neighbours = [k for k in (site - 1, site + 1) if 1 <= k <= L]
    strings = [(1.0, ["I"] * L)]
    strings[0][1][site - 1] = "X"
    for k in neighbours:
        expanded = []
        for c, letters in strings:
            with_z = list(letters)
            with_z[k - 1] = "Z"
            expanded.append((0.5 * c, list(letters)))
            expanded.append((-0.5 * c, with_z))
        strings = expanded
    return [PauliString("".join(letters), c) for c, letters in strings]


def build_pxp(L: int, omega: float = 1.0) -> HamiltonianPair:
    """Open PXP chain; a site flips only when its neighbours are down."""
    if L < 2:
        raise ValueError("PXP chain needs at least two sites")
    if not omega > 0:
        raise ValueError("Rabi frequency must be positive")
    terms = []
    for site in range(1, L + 1):
        terms.extend(_projected_flip(L, site))
    h0 = OperatorSum(terms) * omega
    return HamiltonianPair(h0, h0)


def build_ising_pair(j: float) -> HamiltonianPair:
    """Two-qubit ``J X X`` coupling with correlated multiplicative noise."""
    if j == 0 or not np.isfinite(j):
        raise ValueError("Ising coupling must be finite and nonzero")
    h0 = OperatorSum([PauliString("XX", j)])
    return HamiltonianPair(h0, h0)


def _basis_state(bits: Sequence[int]) -> np.ndarray:
    index = 0
    for b in bits:
        index = (index << 1) | b
    psi = np.zeros(1 << len(bits), dtype=complex)
    psi[index] = 1.0
    return psi


def all_down(L: int) -> np.ndarray:
    if L < 1:
        raise ValueError("need at least one site")
    return _basis_state([0] * L)


def neel(L: int) -> np.ndarray:
    """Neel state, down on site 1: |down up down up ...>."""
    if L < 1:
        raise ValueError("need at least one site")
    return _basis_state([(s + 1) % 2 for s in range(1, L + 1)])


_UP = set("1u↑U")
_DOWN = set("0d↓D")


def bitstring(pattern: str) -> np.ndarray:
    """Product state from a pattern such as ``"ud"``, ``"10"`` or ``"↑↓"``."""
    if not pattern:
        raise ValueError("empty bitstring pattern")
    bits = []
    for ch in pattern:
        if ch in _UP:
            bits.append(1)
        elif ch in _DOWN:
            bits.append(0)
        else:
            raise ValueError(f"unrecognized spin symbol {ch!r}")
    return _basis_state(bits)


def make_state(kind: str, arg) -> np.ndarray:
    makers = {"all_down": all_down, "neel": neel, "bitstring": bitstring}
    if kind not in makers:
        raise ValueError(f"unknown state kind {kind!r}")
    return makers[kind](arg)


def p_up(L: int, site: int) -> OperatorSum:
    """Projector onto up at ``site``: ``(1 + Z)/2``."""
    _check_site(L, site)
    return OperatorSum([PauliString("I" * L, 0.5), PauliString(_single(L, site, "Z"), 0.5)])


def stag_mag(L: int) -> OperatorSum:
    """Staggered magnetization ``sum_i (-1)^i Z_i``."""
    if L < 1:
        raise ValueError("need at least one site")
    return OperatorSum(PauliString(_single(L, i, "Z"), (-1.0) ** i) for i in range(1, L + 1))


def z_diff(L: int, i: int, j: int) -> OperatorSum:
    """Magnetization difference ``(Z_i - Z_j)/2``."""
    _check_site(L, i)
    _check_site(L, j)
    if i == j:
        raise ValueError("z_diff needs two distinct sites")
    return OperatorSum([PauliString(_single(L, i, "Z"), 0.5), PauliString(_single(L, j, "Z"), -0.5)])


def make_observable(kind: str, *args) -> OperatorSum:
    if kind == "custom":
        (op,) = args
        if not isinstance(op, OperatorSum):
            raise TypeError("custom observable must be an OperatorSum")
        return op
    makers = {"p_up": p_up, "stag_mag": stag_mag, "z_diff": z_diff}
    if kind not in makers:
        raise ValueError(f"unknown observable kind {kind!r}")
    return makers[kind](*args)


def parse_operator(text: str) -> OperatorSum:
    """Parse ``coeff LETTERS`` lines; ``#`` starts a comment."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'coefficient letters', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError:
            raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
        pairs.append((coeff, parts[1].upper()))
    if not pairs:
        raise ValueError("operator text contains no terms")
    return OperatorSum.from_pairs(pairs)


def format_operator(op: OperatorSum) -> str:
    return "".join(f"{t.coeff!r} {t.letters}\n" for t in op.terms)
