"""Symmetric exclusion process with slow bonds."""

from ._backend import NAME as BACKEND
from .errors import (ConsistencyError, DomainError, EventBudgetExceeded, NumericError,
                     ResourceLimitError, SlowBondError, UsageError, ValidationError)
from .lattice import (Configuration, Critical, LatticeSpec, Subcritical, box_index, conductance,
                      speedup_factor, swap)
from .profiles import (EmpiricalMeasure, Profile, TestFunction, box_average_profile,
                       constant_profile, empirical_Pi, empirical_Pi_tilde, empirical_pi,
                       make_profile, pair, test_function)
from .simulator import (ReplicaPlan, SimState, mixing_statistic, replacement_statistic,
                        run_until, sample_initial, step)
from .pde import solve_continuous_heat, solve_discrete_heat
from .harness import ExperimentSpec, run_experiment, validate

__all__ = [
    "BACKEND", "ConsistencyError", "DomainError", "EventBudgetExceeded", "NumericError",
    "ResourceLimitError", "SlowBondError", "UsageError", "ValidationError",
    "Configuration", "Critical", "LatticeSpec", "Subcritical", "box_index", "conductance",
    "speedup_factor", "swap",
    "EmpiricalMeasure", "Profile", "TestFunction", "box_average_profile", "constant_profile",
    "empirical_Pi", "empirical_Pi_tilde", "empirical_pi", "make_profile", "pair", "test_function",
    "ReplicaPlan", "SimState", "mixing_statistic", "replacement_statistic", "run_until",
    "sample_initial", "step", "solve_continuous_heat", "solve_discrete_heat",
    "ExperimentSpec", "run_experiment", "validate",
]
