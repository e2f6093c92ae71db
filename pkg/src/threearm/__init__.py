"""Simultaneous confidence bounds and design tools for three-arm
non-inferiority trials (experimental, active reference, placebo)."""

from .design import (
    Allocation,
    EffectScenario,
    MixtureScenario,
    MonteCarlo,
    OptimizationResult,
    SuccessProbability,
    TargetUnreachableError,
    UnsupportedModeError,
    optimize_allocation,
    required_total_n,
    success_probability,
    weighted_success_probability,
)
from .sci import (
    ArmSummary,
    DesignParams,
    FilterKind,
    Method,
    PairingError,
    RhoConvention,
    SciResult,
    SuccessOutcome,
    TrialData,
    Verdict,
    adjudicate_success,
    analyze,
    baseline_hierarchical,
    iu_filter,
    sci_baseline,
    sci_informative,
    sci_iu,
    sci_iu_formal,
    sci_iu_intuitive,
    sci_single_step,
    superiority_filter,
)
from .simulate import SimulationConfig, SimulationSummary, run_simulation, sweep_v

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ArmSummary",
    "DesignParams",
    "EffectScenario",
    "FilterKind",
    "Method",
    "MixtureScenario",
    "MonteCarlo",
    "OptimizationResult",
    "PairingError",
    "RhoConvention",
    "SciResult",
    "SimulationConfig",
    "SimulationSummary",
    "SuccessOutcome",
    "SuccessProbability",
    "TargetUnreachableError",
    "TrialData",
    "UnsupportedModeError",
    "Verdict",
    "adjudicate_success",
    "analyze",
    "baseline_hierarchical",
    "iu_filter",
    "optimize_allocation",
    "required_total_n",
    "run_simulation",
    "sci_baseline",
    "sci_informative",
    "sci_iu",
    "sci_iu_formal",
    "sci_iu_intuitive",
    "sci_single_step",
    "success_probability",
    "superiority_filter",
    "sweep_v",
    "weighted_success_probability",
]
