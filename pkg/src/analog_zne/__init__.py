"""Zero-noise extrapolation for shot-to-shot Hamiltonian noise in analog simulators."""

from .calibrate import (
    HeatingModel,
    ThermalFit,
    calibrated_pair,
    corrected_frequency,
    effective_frequency,
    fit_heating,
    fit_thermal_rabi,
    thermal_rabi_curve,
)
from .config import ExperimentConfig, load_config, parse_config
from .dynamics import EvolutionPlan, KrylovBreakdownError, evolve, expectation, moments
from .ensemble import (
    EnsembleSpec,
    NoisyEstimator,
    ensemble_average,
    noisy_expectation,
    simulate_shots,
    sweep,
)
from .experiments import run_experiment, write_outputs
from .noise import Gaussian, PointMass, Thermal, check_mitigable
from .operators import (
    HamiltonianPair,
    OperatorSum,
    PauliString,
    build_ising_pair,
    build_pxp,
    build_rabi,
    make_observable,
    make_state,
)
from .zne import (
    BoundReport,
    ZneResult,
    loocv_select,
    richardson_extrapolate,
    richardson_weights,
    theorem1_bound,
    weighted_polyfit,
    zne_series,
)

__all__ = [
    "BoundReport",
    "build_ising_pair",
    "build_pxp",
    "build_rabi",
    "calibrated_pair",
    "check_mitigable",
    "corrected_frequency",
    "effective_frequency",
    "ensemble_average",
    "EnsembleSpec",
    "EvolutionPlan",
    "evolve",
    "expectation",
    "ExperimentConfig",
    "fit_heating",
    "fit_thermal_rabi",
    "Gaussian",
    "HamiltonianPair",
    "HeatingModel",
    "KrylovBreakdownError",
    "load_config",
    "loocv_select",
    "make_observable",
    "make_state",
    "moments",
    "noisy_expectation",
    "NoisyEstimator",
    "OperatorSum",
    "parse_config",
    "PauliString",
    "PointMass",
    "richardson_extrapolate",
    "richardson_weights",
    "run_experiment",
    "simulate_shots",
    "sweep",
    "theorem1_bound",
    "Thermal",
    "thermal_rabi_curve",
    "ThermalFit",
    "weighted_polyfit",
    "write_outputs",
    "zne_series",
    "ZneResult",
]

__version__ = "0.1.0"
