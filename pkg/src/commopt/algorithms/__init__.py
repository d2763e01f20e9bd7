"""Optimizer runs and hyperparameter builders."""

from .common import (
    AlgoState,
    CommLedger,
    DivergenceError,
    NeolithicHyper,
    StagePlan,
    Trajectory,
    as_schedule,
    expand_iterates,
    measure_metrics,
    normalize_specs,
)
from .baselines import BASELINES, gradient_descent_reference, run_baseline
from .neolithic import RunStreams, neolithic_round, run_multistage, run_neolithic
from .schedules import (
    SIGMA_FLOOR,
    HarmonicGamma,
    LrSchedule,
    PowerGamma,
    build_multistage_plan,
    lr_schedule,
    make_lr,
    schedule_gc,
    schedule_nc,
    schedule_sc_single,
)

__all__ = [
    "AlgoState",
    "BASELINES",
    "CommLedger",
    "DivergenceError",
    "HarmonicGamma",
    "LrSchedule",
    "PowerGamma",
    "NeolithicHyper",
    "RunStreams",
    "SIGMA_FLOOR",
    "StagePlan",
    "Trajectory",
    "as_schedule",
    "build_multistage_plan",
    "expand_iterates",
    "gradient_descent_reference",
    "lr_schedule",
    "make_lr",
    "measure_metrics",
    "neolithic_round",
    "normalize_specs",
    "run_baseline",
    "run_multistage",
    "run_neolithic",
    "schedule_gc",
    "schedule_nc",
    "schedule_sc_single",
]
