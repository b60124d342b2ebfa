"""Finite-box graphical representation of the contact process."""

from .dynamics import (
    ConfigurationSet,
    ExtinctionResult,
    evolve,
    extinction_time,
    reachable,
)
from .eventlog import EventLog, generate_event_log
from .lattice import Lattice, RateSpec, build_lattice

__all__ = [
    "ConfigurationSet",
    "EventLog",
    "ExtinctionResult",
    "Lattice",
    "RateSpec",
    "build_lattice",
    "evolve",
    "extinction_time",
    "generate_event_log",
    "reachable",
]
