"""Distributed stochastic optimization under communication compression.

Workers hold local objectives and talk to a server through lossy
compressors. The package provides the compressor zoo with class
estimators, the multi-step compression subroutine, synthetic problem
generators, the NEOLITHIC algorithm with its rate-matching schedules
alongside standard compressed baselines, lower-bound hard instances,
and an experiment harness with a command line front end.
"""

from ._kernels import USING_EXTENSION
from .hard_instances import build_chain, traced_run
from .harness import (
    aggregate,
    load_csv,
    run_experiment,
    sweep_R,
    to_db,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "USING_EXTENSION",
    "__version__",
    "aggregate",
    "build_chain",
    "load_csv",
    "run_experiment",
    "sweep_R",
    "to_db",
    "traced_run",
    "validate_config",
]
