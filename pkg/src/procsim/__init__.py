"""procsim: seedable discrete-event simulation of procurement operations.

Demand arrives as requisitions from operational sites (a thinned recurrent
event process plus a sequential content chain), a daily decision point orders
or defers each unresolved line item, outcomes follow a lag-2 recursion with
allocation feedback and seasonality, and a pluggable supplier-selection
policy layer (fixed, random, static utility, Thompson-sampling bandit,
oracle) is compared by regret in a Monte Carlo harness.
"""

from .core import (
    DecisionRecord,
    DeliveryMode,
    HistoryLedger,
    LineItem,
    OutcomeRecord,
    RequestRef,
    Requisition,
    SimulationClock,
    UnresolvedQueue,
    day_of,
)
from .engine import RunResult, SimulationEngine
from .harness import (
    ExperimentConfig,
    ReportBundle,
    load_config,
    run_experiment,
    run_single,
    write_reports,
)
from .stochastic import RandomSource

__version__ = "0.1.0"

__all__ = [
    "DecisionRecord",
    "DeliveryMode",
    "ExperimentConfig",
    "HistoryLedger",
    "LineItem",
    "OutcomeRecord",
    "RandomSource",
    "ReportBundle",
    "RequestRef",
    "Requisition",
    "RunResult",
    "SimulationClock",
    "SimulationEngine",
    "UnresolvedQueue",
    "day_of",
    "load_config",
    "run_experiment",
    "run_single",
    "write_reports",
    "__version__",
]
