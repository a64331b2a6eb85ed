"""Busy-period loss analysis for M/GI/m/n queues.

Closed-form Markovian quantities, a fully instrumented discrete-event
simulator for general service, an exact phase-type chain oracle, and the
statistical checks tying them together.
"""

from .analytic import (
    MarkovSpec,
    expected_busy_period,
    expected_excursion_crossings,
    expected_level_crossings,
    expected_losses,
    expected_orbital_busy_period,
    expected_orbital_count,
    expected_state_time,
)
from .ctmc import (
    CtmcModel,
    OracleState,
    build_model,
    expected_busy_period_length,
    expected_busy_period_losses,
    stationary_loss_probability,
)
from .distributions import (
    Deterministic,
    DistributionClass,
    Erlang,
    Exponential,
    HyperExponential,
    PhaseType,
    ServiceDistribution,
    as_phase_type,
    classify,
    mean,
    sample,
)
from .rng import RngStream, stream
from .simulator import (
    BusyPeriodRecord,
    PoissonArrivals,
    ScriptedArrivals,
    SystemSpec,
    measure_state_m_minus_1,
    run_excursions,
    run_replications,
    simulate_busy_period,
    simulate_excursion_crossings,
)
from .stats import (
    DominanceVerdict,
    Estimate,
    consistent_across,
    mean_ci,
    stochastic_dominance,
)

__version__ = "0.1.0"

__all__ = [
    "MarkovSpec",
    "expected_busy_period",
    "expected_excursion_crossings",
    "expected_level_crossings",
    "expected_losses",
    "expected_orbital_busy_period",
    "expected_orbital_count",
    "expected_state_time",
    "CtmcModel",
    "OracleState",
    "build_model",
    "expected_busy_period_length",
    "expected_busy_period_losses",
    "stationary_loss_probability",
    "Deterministic",
    "DistributionClass",
    "Erlang",
    "Exponential",
    "HyperExponential",
    "PhaseType",
    "ServiceDistribution",
    "as_phase_type",
    "classify",
    "mean",
    "sample",
    "RngStream",
    "stream",
    "BusyPeriodRecord",
    "PoissonArrivals",
    "ScriptedArrivals",
    "SystemSpec",
    "measure_state_m_minus_1",
    "run_excursions",
    "run_replications",
    "simulate_busy_period",
    "simulate_excursion_crossings",
    "DominanceVerdict",
    "Estimate",
    "consistent_across",
    "mean_ci",
    "stochastic_dominance",
    "__version__",
]
