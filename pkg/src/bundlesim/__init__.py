"""Microscopic road traffic simulation for delivery tour comparison.

The package provides a deterministic single-lane car-following simulator
with emission accounting, induction-loop detectors, XML scenario files, a
batch CLI and a TCP control server.  Typical entry points:

* :func:`bundlesim.engine.load_scenario` / :func:`bundlesim.engine.run`
* :func:`bundlesim.compare.run_comparison` for the two-scenario study
* ``bundlesim`` console script (``simulate``, ``compare``, ``gen-routes``,
  ``serve``)
"""

from . import compare, detectors, dynamics, emissions, engine, net, scenario_io, server
from .engine import SimulationConfig, World, load_scenario, run

__version__ = "0.1.0"

__all__ = [
    "compare",
    "detectors",
    "dynamics",
    "emissions",
    "engine",
    "net",
    "scenario_io",
    "server",
    "SimulationConfig",
    "World",
    "load_scenario",
    "run",
    "__version__",
]
