"""Shot-to-shot ensemble averages and finite-shot estimators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Eigensystem, reachable_subspace
from .noise import Gaussian, NoiseModel, PointMass, Thermal
from .operators import HamiltonianPair, OperatorSum

__all__ = [
    "NoisyEstimator",
    "EnsembleSpec",
    "EnsembleAverage",
    "EmptySampleError",
    "ensemble_average",
    "estimators_from_average",
    "noisy_expectation",
    "sweep",
    "simulate_shots",
    "postselected_expectation",
    "write_estimators_csv",
    "ESTIMATOR_HEADER",
]

ESTIMATOR_HEADER = ("time", "theta", "value", "std_err", "shots", "kept_shots")


class EmptySampleError(RuntimeError):
    """Every shot was discarded by post-selection."""


@dataclass(frozen=True)
class NoisyEstimator:
    theta: float
    value: float
    std_err: float
    shots: int
    time: float
    kept_shots: int | None = None

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.std_err < 0:
            raise ValueError("standard error must be >= 0")
        if self.shots < 1:
            raise ValueError("shot count must be >= 1")


@dataclass(frozen=True)
class EnsembleSpec:
    """How an ensemble estimator is produced.

    ``mode`` is ``"monte_carlo"`` (``samples`` draws of delta), ``"quadrature"``
    (``nodes`` Gauss-Hermite nodes, or full enumeration for thermal noise) or
    ``"analytic_oracle"``. ``shots=None`` means exact projection; otherwise
    ``shots`` measurements are simulated with ``seed``. Bit flips and
    post-selection (a list of kept basis indices) force an explicit
    multinomial shot simulation.
    """

    mode: str = "quadrature"
    samples: int = 600
    nodes: int = 40
    shots: int | None = None
    seed: int | None = None
    postselect: tuple[int, ...] | None = None
    bitflip_p: float = 0.0
    reduce_subspace: bool = True
    exploit_proportional: bool = True

    def __post_init__(self):
        if self.mode not in ("monte_carlo", "quadrature", "analytic_oracle"):
            raise ValueError(f"unknown ensemble mode {self.mode!r}")
        if self.mode == "monte_carlo" and self.samples < 1:
            raise ValueError("Monte Carlo needs at least one sample")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shot count must be >= 1")
        if self.postselect is not None:
            if len(self.postselect) == 0:
                raise ValueError("post-selection set must be nonempty")
            object.__setattr__(self, "postselect", tuple(int(i) for i in self.postselect))
        if not 0 <= self.bitflip_p <= 1:
            raise ValueError("bit-flip probability must lie in [0, 1]")

    @property
    def needs_multinomial(self) -> bool:
        return self.shots is not None and (self.postselect is not None or self.bitflip_p > 0)


@dataclass
class EnsembleAverage:
    """Delta-averaged first and second moments of an observable on a time grid."""

    theta: float
    times: np.ndarray
    mean: np.ndarray
    second: np.ndarray
    mc_std_err: np.ndarray
    num_sites: int
    # diagonal observables only: outcome distribution over the basis states in
    # ``support`` (rows), and the observable's value on every full basis state
    probs: np.ndarray | None = None
    support: np.ndarray | None = None
    basis_values: np.ndarray | None = None

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(self.second - self.mean**2, 0.0)


class _Restricted:
    """Dynamics restricted to the subspace reachable from the initial state."""

    def __init__(self, pair: HamiltonianPair, psi0, obs: OperatorSum, spec: EnsembleSpec):
        dim = pair.h0.dim
        if psi0.shape[0] != dim or obs.dim != dim:
            raise ValueError("state, Hamiltonian and observable dimensions differ")
        if spec.reduce_subspace:
            idx = reachable_subspace([pair.h0, pair.v], psi0)
        else:
            idx = np.arange(dim)
        self.idx = idx
        h0 = pair.h0.to_sparse()
        v = pair.v.to_sparse()
        self.h0 = h0[idx][:, idx].toarray()
        self.v = v[idx][:, idx].toarray()
        self.psi0 = psi0[idx]
        self.diagonal = obs.is_diagonal()
        if self.diagonal:
            self.obs_diag = obs.diagonal()[idx]
        else:
            o = obs.to_sparse()
            self.obs_cols = o[:, idx].toarray()
            self.obs_block = self.obs_cols[idx]
        scale = pair.noise_scale() if spec.exploit_proportional else None
        self.scale = scale
        self._eig0 = Eigensystem(self.h0) if scale is not None else None

    def amplitudes(self, delta: float, times: np.ndarray) -> np.ndarray:
        if self._eig0 is not None:
            return self._eig0.propagate(self.psi0, (1.0 + self.scale * delta) * times)
        return Eigensystem(self.h0 + delta * self.v).propagate(self.psi0, times)

    def observe(self, amps: np.ndarray):
        """Per-time ``<O>``, ``<O^2>`` and (diagonal case) outcome probabilities."""
        if self.diagonal:
            prob = np.abs(amps) ** 2
            return self.obs_diag @ prob, (self.obs_diag**2) @ prob, prob
        o_psi = self.obs_cols @ amps
        first = np.real(np.sum(amps.conj() * (self.obs_block @ amps), axis=0))
        second = np.real(np.sum(o_psi.conj() * o_psi, axis=0))
        return first, second, None


def ensemble_average(
    pair: HamiltonianPair,
    model: NoiseModel,
    psi0: np.ndarray,
    obs: OperatorSum,
    times: Sequence[float],
    spec: EnsembleSpec,
    rng: np.random.Generator | None = None,
) -> EnsembleAverage:
    """Average ``<O>(t)`` over the shot-to-shot distribution ``model``."""
    times = np.asarray(times, dtype=float)
    psi0 = np.asarray(psi0, dtype=complex)
    if spec.mode == "analytic_oracle":
        return _oracle_average(pair, model, psi0, obs, times)
    system = _Restricted(pair, psi0, obs, spec)
    if spec.mode == "quadrature":
        deltas, weights = model.quadrature(spec.nodes)
    else:
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        deltas = np.atleast_1d(model.sample(rng, size=spec.samples))
        weights = np.full(deltas.size, 1.0 / deltas.size)

    T = times.size
    mean = np.zeros(T)
    second = np.zeros(T)
    sq_mean = np.zeros(T)
    probs = np.zeros((system.idx.size, T)) if system.diagonal else None
    # fixed-order accumulation keeps results reproducible
    for delta, w in zip(deltas, weights):
        first, sec, prob = system.observe(system.amplitudes(float(delta), times))
        mean += w * first
        second += w * sec
        sq_mean += w * first**2
        if probs is not None:
            probs += w * prob
    if spec.mode == "monte_carlo" and deltas.size > 1:
        s = deltas.size
        spread = np.maximum(sq_mean - mean**2, 0.0) * s / (s - 1)
        mc_err = np.sqrt(spread / s)
    else:
        mc_err = np.zeros(T)

    basis_values = obs.diagonal() if probs is not None else None
    return EnsembleAverage(model.theta, times, mean, second, mc_err, pair.num_sites, probs, system.idx, basis_values)


def _characteristic(model: NoiseModel, s: np.ndarray) -> np.ndarray:
    """``E[exp(i s delta)]``; the thermal case is the high-temperature closed form."""
    if isinstance(model, Gaussian):
        return np.exp(-0.5 * model.variance * s**2)
    if isinstance(model, Thermal):
        value = 1.0 / (1.0 - 1j * s * model.theta)
        if model.centered:
            value = value * np.exp(-1j * s * model.theta)
        return value
    if isinstance(model, PointMass):
        return np.exp(1j * s * model.delta)
    raise ValueError(f"no closed form for {type(model).__name__}")


def _oracle_average(pair, model, psi0, obs, times) -> EnsembleAverage:
    """Closed-form damped Rabi oscillations for a single X-driven qubit read out in P_up."""
    ok = (
        pair.num_sites == 1
        and all(t.letters == "X" for t in pair.h0.terms + pair.v.terms)
        and np.allclose(np.abs(psi0), [1.0, 0.0])
        and obs == OperatorSum.from_pairs([(0.5, "I"), (0.5, "Z")])
    )
    if not ok:
        raise ValueError("analytic oracle only covers a single X-driven qubit from |down> measured in P_up")
    w0 = pair.h0.terms[0].coeff
    w1 = pair.v.terms[0].coeff
    # P_up = (1 - Re E[exp(2i (w0 + w1 delta) t)]) / 2
    avg_phase = np.exp(2j * w0 * times) * _characteristic(model, 2.0 * w1 * times)
    mean = 0.5 * (1.0 - avg_phase.real)
    probs = np.vstack([1.0 - mean, mean])
    return EnsembleAverage(
        model.theta, times, mean, mean.copy(), np.zeros_like(mean), 1, probs, np.arange(2), np.array([0.0, 1.0])
    )


def simulate_shots(
    probs: np.ndarray,
    shots: int,
    rng: np.random.Generator | int | None,
    outcome_values: np.ndarray,
    num_sites: int,
    bitflip_p: float = 0.0,
    postselect: Iterable[int] | None = None,
    outcomes: np.ndarray | None = None,
) -> tuple[float, float, int]:
    """Sample ``shots`` measurement outcomes and return ``(mean, std_err, kept)``.

    ``probs[i]`` is the probability of basis outcome ``outcomes[i]`` (default
    ``i``). Each shot then suffers independent per-qubit flips with probability
    ``bitflip_p`` before shots outside ``postselect`` are discarded.
    ``outcome_values`` maps every full basis index to the observable's value.
    """
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-10:
        raise ValueError(f"outcome probabilities sum to {probs.sum():.12f}, not 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    if outcomes is None:
        outcomes = np.arange(probs.size)
    counts = rng.multinomial(shots, probs)
    results = np.repeat(np.asarray(outcomes, dtype=np.int64), counts)
    if bitflip_p > 0:
        flips = rng.random((shots, num_sites)) < bitflip_p
        weights = 1 << np.arange(num_sites - 1, -1, -1)
        results = results ^ (flips @ weights)
    if postselect is not None:
        keep = np.isin(results, np.fromiter(postselect, dtype=np.int64))
        results = results[keep]
    kept = results.size
    if kept == 0:
        raise EmptySampleError("post-selection discarded every shot")
    vals = np.asarray(outcome_values)[results]
    mean = float(vals.mean())
    err = float(vals.std(ddof=1) / math.sqrt(kept)) if kept > 1 else 0.0
    return mean, err, kept


def postselected_expectation(
    probs: np.ndarray,
    outcome_values: np.ndarray,
    num_sites: int,
    bitflip_p: float = 0.0,
    postselect: Iterable[int] | None = None,
    outcomes: np.ndarray | None = None,
) -> tuple[float, float]:
    """Exact infinite-shot counterpart of :func:`simulate_shots`.

    Returns the post-selected mean of the observable and the kept fraction.
    """
    probs = np.asarray(probs, dtype=float)
    full = np.zeros(2**num_sites)
    full[np.arange(probs.size) if outcomes is None else np.asarray(outcomes)] = probs
    dist = full.reshape((2,) * num_sites)
    for axis in range(num_sites):
        dist = (1.0 - bitflip_p) * dist + bitflip_p * np.flip(dist, axis=axis)
    dist = dist.reshape(-1)
    mask = np.zeros(dist.size, dtype=bool)
    if postselect is None:
        mask[:] = True
    else:
        mask[np.fromiter(postselect, dtype=np.int64)] = True
    kept = float(dist[mask].sum())
    if kept == 0:
        raise EmptySampleError("post-selection keeps no probability mass")
    return float(dist[mask] @ np.asarray(outcome_values)[mask] / kept), kept


def estimators_from_average(
    avg: EnsembleAverage,
    spec: EnsembleSpec,
    rng: np.random.Generator | None = None,
) -> list[NoisyEstimator]:
    """Attach projection noise to an ensemble average, one estimator per time."""
    T = avg.times.size
    if spec.shots is None:
        shots = spec.samples if spec.mode == "monte_carlo" else 1
        return [
            NoisyEstimator(avg.theta, float(avg.mean[k]), float(avg.mc_std_err[k]), shots, float(avg.times[k]))
            for k in range(T)
        ]
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    out = []
    if spec.needs_multinomial:
        if avg.probs is None:
            raise ValueError("shot simulation with bit flips or post-selection needs a diagonal observable")
        for k in range(T):
            mean, err, kept = simulate_shots(
                avg.probs[:, k],
                spec.shots,
                rng,
                avg.basis_values,
                avg.num_sites,
                spec.bitflip_p,
                spec.postselect,
                outcomes=avg.support,
            )
            err = math.hypot(err, avg.mc_std_err[k])
            out.append(NoisyEstimator(avg.theta, mean, err, spec.shots, float(avg.times[k]), kept))
        return out
    for k in range(T):
        nu_proj = math.sqrt(avg.variance[k] / spec.shots)
        value = float(avg.mean[k] + rng.normal(0.0, nu_proj)) if nu_proj > 0 else float(avg.mean[k])
        err = math.hypot(nu_proj, avg.mc_std_err[k])
        out.append(NoisyEstimator(avg.theta, value, err, spec.shots, float(avg.times[k]), spec.shots))
    return out


def noisy_expectation(
    pair: HamiltonianPair,
    model: NoiseModel,
    psi0: np.ndarray,
    obs: OperatorSum,
    times: Sequence[float],
    spec: EnsembleSpec,
    rng: np.random.Generator | None = None,
) -> list[NoisyEstimator]:
    """Ensemble-averaged estimators of ``obs`` at each time for one noise strength."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    avg = ensemble_average(pair, model, psi0, obs, times, spec, rng)
    return estimators_from_average(avg, spec, rng)


def sweep(
    pair: HamiltonianPair | Sequence[HamiltonianPair],
    models: Sequence[NoiseModel],
    psi0: np.ndarray,
    obs: OperatorSum,
    times: Sequence[float],
    spec: EnsembleSpec,
    seed: int | None = None,
    threads: int = 1,
) -> list[list[NoisyEstimator]]:
    """Estimators for several noise strengths, indexed ``[node][time]``.

    Every node draws from its own child of ``seed`` so results do not depend on
    ``threads``. ``pair`` may be a list giving a (recalibrated) pair per node.
    """
    pairs = list(pair) if isinstance(pair, (list, tuple)) else [pair] * len(models)
    if len(pairs) != len(models):
        raise ValueError("need one Hamiltonian pair per noise model")
    seed = spec.seed if seed is None else seed
    children = np.random.SeedSequence(seed).spawn(len(models))

    def work(i):
        rng = np.random.default_rng(children[i])
        return noisy_expectation(pairs[i], models[i], psi0, obs, times, replace(spec, seed=None), rng)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, range(len(models))))
    return [work(i) for i in range(len(models))]


def write_estimators_csv(path, rows: Iterable[NoisyEstimator], extra: dict | None = None):
    """Write estimator rows; ``extra`` maps column name to a function of the row."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ESTIMATOR_HEADER + tuple(extra))
        for e in rows:
            kept = e.kept_shots if e.kept_shots is not None else e.shots
            writer.writerow(
                [repr(e.time), repr(e.theta), repr(e.value), repr(e.std_err), e.shots, kept]
                + [repr(f(e)) for f in extra.values()]
            )
