"""Deterministic virtual-time simulation of the full platform."""

from fedflow.sim.backends import SimAppRun, SimScheduler, SimTransfer
from fedflow.sim.models import QueueDelayModel, RouteSpec, RuntimeModel
from fedflow.sim.network import SizeRule, TransferNetwork
from fedflow.sim.rng import substream
from fedflow.sim.runner import SimResult, run_scenario
from fedflow.sim.scenario import Scenario, load_scenario

__all__ = [
    "QueueDelayModel",
    "RouteSpec",
    "RuntimeModel",
    "Scenario",
    "SimAppRun",
    "SimResult",
    "SimScheduler",
    "SimTransfer",
    "SizeRule",
    "TransferNetwork",
    "load_scenario",
    "run_scenario",
    "substream",
]
