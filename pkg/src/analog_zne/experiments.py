"""End-to-end experiment pipelines driven by :class:`ExperimentConfig`.

Every pipeline produces noisy estimators per noise node, a ZNE series, the
noiseless reference and, when asked, bound reports and calibration fits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrate import (
    HeatingModel,
    ThermalFit,
    calibrated_pair,
    fit_heating,
    fit_thermal_rabi,
    write_calibration_csv,
)
from .config import ExperimentConfig
from .ensemble import (
    EnsembleSpec,
    NoisyEstimator,
    ensemble_average,
    estimators_from_average,
    noisy_expectation,
    postselected_expectation,
    write_estimators_csv,
)
from .noise import Gaussian, NoiseModel, PointMass, Thermal
from .operators import (
    HamiltonianPair,
    all_down,
    bitstring,
    build_ising_pair,
    build_pxp,
    build_rabi,
    neel,
    p_up,
    stag_mag,
    z_diff,
)
from .zne import BoundReport, ZneResult, theorem1_bound, transpose, write_bounds_csv, write_zne_csv, zne_series

__all__ = [
    "ExperimentOutput",
    "System",
    "run_experiment",
    "write_outputs",
    "calibrate_thermal",
    "cumulative_error",
    "OUTPUT_FILES",
]

OUTPUT_FILES = ("estimators.csv", "zne.csv", "exact.csv", "bounds.csv", "calibration.csv")


@dataclass
class System:
    """Hamiltonian pairs per node plus initial state and observable."""

    pairs: list[HamiltonianPair]
    psi0: np.ndarray
    obs: object
    models: list[NoiseModel]
    thetas: list[float]
    reference: HamiltonianPair  # target dynamics without noise or calibration


@dataclass
class ExperimentOutput:
    times: np.ndarray
    estimators: list[list[NoisyEstimator]]  # [node][time]
    zne: list[ZneResult]
    exact: np.ndarray
    estimator_columns: dict = field(default_factory=dict)
    bounds: list[tuple[float, int, BoundReport]] | None = None
    bound_columns: dict = field(default_factory=dict)
    calibration: tuple[list[float], list[ThermalFit]] | None = None
    heating: HeatingModel | None = None


def _ensemble_spec(cfg: ExperimentConfig) -> EnsembleSpec:
    postselect = None
    if cfg.postselect:
        postselect = tuple(int(b, 2) for b in cfg.postselect)
    return EnsembleSpec(
        mode=cfg.mode,
        samples=cfg.samples,
        nodes=cfg.nodes,
        shots=cfg.shots or None,
        postselect=postselect,
        bitflip_p=cfg.bitflip_p,
    )


def _child_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def calibrate_thermal(cfg: ExperimentConfig, seed: int) -> tuple[list[ThermalFit], HeatingModel]:
    """Fit single-qubit thermal Rabi data at every wait time and fit the heating line."""
    base = build_rabi(cfg.omega / 2.0)
    psi0, obs = all_down(1), p_up(1, 1)
    spec = EnsembleSpec(mode="quadrature", shots=cfg.calib_shots)
    seeds = np.random.SeedSequence(seed).spawn(len(cfg.wait_times))
    fits = []
    for theta, ss in zip(cfg.node_thetas(), seeds):
        rng = np.random.default_rng(ss)
        model = Thermal(theta / cfg.alpha, cfg.alpha)
        est = noisy_expectation(base, model, psi0, obs, cfg.calib_times, spec, rng)
        fits.append(
            fit_thermal_rabi(
                [e.time for e in est],
                [e.value for e in est],
                [e.std_err for e in est],
            )
        )
    heating = fit_heating(cfg.wait_times, [f.theta for f in fits], [f.theta_err for f in fits])
    return fits, heating


def _thermal_system(cfg: ExperimentConfig, calib_seed: int):
    """Node systems for the thermal experiments, with optional drive calibration."""
    true_thetas = cfg.node_thetas()
    fits = heating = None
    if cfg.calibrate:
        fits, heating = calibrate_thermal(cfg, calib_seed)
        thetas = [float(x) for x in heating.theta(cfg.wait_times)]
        if min(thetas) <= 0 or max(thetas) >= 1:
            raise RuntimeError(f"calibrated noise nodes {thetas} fall outside (0, 1)")
    else:
        thetas = list(true_thetas)

    if cfg.experiment == "thermal_rabi":
        base = build_rabi(cfg.omega / 2.0)
        psi0, obs = all_down(1), p_up(1, 1)
        scale = cfg.alpha
        pairs = [calibrated_pair(base, th) if cfg.calibrate else base for th in thetas]
    else:
        base = build_ising_pair(cfg.coupling)
        psi0, obs = bitstring("10"), z_diff(2, 1, 2)
        # the coupling carries both drives, so its thermal scale and correction are squared
        scale = 2.0 * cfg.alpha
        pairs = [base.recalibrated((1.0 - th) ** 2) if cfg.calibrate else base for th in thetas]
    models = [Thermal(th / cfg.alpha, scale) for th in true_thetas]
    system = System(pairs, psi0, obs, models, thetas, base)
    return system, fits, heating


def _standard_system(cfg: ExperimentConfig) -> System:
    thetas = cfg.node_thetas()
    if cfg.experiment == "pxp_scars":
        pair = build_pxp(cfg.sites, cfg.omega)
        psi0, obs = neel(cfg.sites), stag_mag(cfg.sites)
    else:
        pair = build_rabi(cfg.omega)
        psi0, obs = all_down(1), p_up(1, 1)
    if cfg.experiment == "bounds_report" and cfg.noise == "thermal":
        models = [Thermal(th / cfg.alpha, cfg.alpha, cfg.centered) for th in thetas]
    else:
        models = [Gaussian(th) for th in thetas]
    return System([pair] * len(thetas), psi0, obs, models, list(thetas), pair)


def _run_nodes(system: System, times, spec: EnsembleSpec, seed: int, threads: int):
    seeds = np.random.SeedSequence(seed).spawn(len(system.models))

    def work(i):
        rng = np.random.default_rng(seeds[i])
        avg = ensemble_average(system.pairs[i], system.models[i], system.psi0, system.obs, times, spec, rng)
        est = estimators_from_average(avg, spec, rng)
        # the extrapolation abscissa is the (possibly calibrated) node theta
        return [dataclasses.replace(e, theta=system.thetas[i]) for e in est]

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, range(len(system.models))))
    return [work(i) for i in range(len(system.models))]


def _exact_reference(system: System, times, spec: EnsembleSpec) -> np.ndarray:
    """Noiseless curve, passed through the same bit flips and post-selection as the data."""
    avg = ensemble_average(system.reference, PointMass(0.0), system.psi0, system.obs, times, EnsembleSpec(mode="quadrature"))
    if not spec.needs_multinomial:
        return avg.mean
    return np.array(
        [
            postselected_expectation(
                avg.probs[:, k], avg.basis_values, avg.num_sites, spec.bitflip_p, spec.postselect, avg.support
            )[0]
            for k in range(len(times))
        ]
    )


def _bounds(cfg: ExperimentConfig, system: System, estimators, times):
    v_norm = system.pairs[0].v.spectral_norm()
    o_norm = system.obs.spectral_norm()
    # bounds use the physical distribution parameter of each node's delta
    model = system.models[0]
    thetas = [m.theta for m in system.models]
    rows = []
    for k, t in enumerate(times):
        nus = [node[k].std_err for node in estimators]
        rows.append((float(t), len(thetas), theorem1_bound(model, t, v_norm, o_norm, thetas, nus, cfg.epsilon)))
    return rows


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """Run the experiment named in ``cfg``; raises ValueError on an invalid config."""
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid config:\n" + "\n".join(problems))
    times = np.asarray(cfg.times, dtype=float)
    calib_seed, main_seed = _child_seeds(cfg.seed, 2)
    spec = _ensemble_spec(cfg)

    fits = heating = None
    if cfg.experiment in ("thermal_rabi", "ising_thermal"):
        system, fits, heating = _thermal_system(cfg, calib_seed)
    else:
        system = _standard_system(cfg)

    estimators = _run_nodes(system, times, spec, main_seed, threads)
    zne = zne_series(
        transpose(estimators),
        method=cfg.zne_method,
        degree=cfg.zne_degree if cfg.zne_degree >= 0 else None,
        zero_linear=cfg.zero_linear,
        max_degree=cfg.max_degree if cfg.max_degree >= 0 else None,
    )
    exact = _exact_reference(system, times, spec)

    out = ExperimentOutput(times, estimators, zne, exact)
    if cfg.experiment == "pxp_scars":
        out.estimator_columns["value_per_site"] = lambda e, L=cfg.sites: e.value / L
    if cfg.experiment in ("thermal_rabi", "ising_thermal"):
        wait = dict(zip(system.thetas, cfg.wait_times))
        out.estimator_columns["wait_time"] = lambda e: float(wait[e.theta])
    if cfg.bounds or cfg.experiment == "bounds_report":
        out.bounds = _bounds(cfg, system, estimators, times)
        out.bound_columns["actual_error"] = [abs(z.estimate - x) for z, x in zip(zne, exact)]
    if fits is not None:
        out.calibration = (list(cfg.wait_times), fits)
        out.heating = heating
    return out


def write_outputs(out: ExperimentOutput, directory) -> list[Path]:
    """Write every table of ``out`` into ``directory``; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "estimators.csv"
    write_estimators_csv(path, [e for node in out.estimators for e in node], out.estimator_columns)
    written.append(path)
    path = directory / "zne.csv"
    write_zne_csv(path, out.zne)
    written.append(path)
    path = directory / "exact.csv"
    with open(path, "w", newline="") as fh:
        fh.write("time,value\n")
        for t, v in zip(out.times, out.exact):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    written.append(path)
    if out.bounds is not None:
        path = directory / "bounds.csv"
        write_bounds_csv(path, out.bounds, out.bound_columns)
        written.append(path)
    if out.calibration is not None:
        path = directory / "calibration.csv"
        write_calibration_csv(path, *out.calibration)
        written.append(path)
    return written


def cumulative_error(reference, values) -> np.ndarray:
    """Running sum of ``|reference - values|`` over the time grid."""
    return np.cumsum(np.abs(np.asarray(reference) - np.asarray(values)))
