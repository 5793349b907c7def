"""Seeded discrete-event simulation of core and auxiliary validators."""

from .config import Crash, Link, Partition, SimConfig
from .engine import RoutingViolation, SimReport, Simulator, run

__all__ = ["Crash", "Link", "Partition", "SimConfig", "SimReport", "Simulator", "RoutingViolation", "run"]
