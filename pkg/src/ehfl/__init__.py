"""Energy-harvesting federated learning with over-the-air aggregation.

A small simulator plus a numerical evaluator of the associated SGD
convergence bound.
"""

from ehfl.model import ParameterVector, ComplexSymbolVector, LossTask, pack, unpack
from ehfl.energy import EnergyProfile, EnergyState
from ehfl.channel import Topology, ChannelRealization
from ehfl.trainer import ScenarioConfig, RoundRecord, run_experiment
from ehfl.bound import BoundParams, bound_trace

__all__ = [
    "ParameterVector",
    "ComplexSymbolVector",
    "LossTask",
    "pack",
    "unpack",
    "EnergyProfile",
    "EnergyState",
    "Topology",
    "ChannelRealization",
    "ScenarioConfig",
    "RoundRecord",
    "run_experiment",
    "BoundParams",
    "bound_trace",
]

__version__ = "0.1.0"
