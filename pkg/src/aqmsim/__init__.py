"""Discrete-event simulation of CoDel, LSTFCoDel, RED and DropTail on a two-client star."""

from .codel import CoDel
from .config import ConfigError, Scenario, load_scenario
from .engine import RngStream, Simulator
from .lstfcodel import LSTFCoDel, classify, update_slack
from .qdisc import DropTail, Packet
from .red import Red
from .topology import InvariantViolation, run_scenario

__all__ = [
    "CoDel", "ConfigError", "DropTail", "InvariantViolation", "LSTFCoDel", "Packet", "Red",
    "RngStream", "Scenario", "Simulator", "classify", "load_scenario", "run_scenario", "update_slack",
]
