"""Reliability analysis for the Occupy CoW cooperative low-latency protocol."""
from .scenario import (ChannelParams, FailureProbability, PhasePlan, ScenarioConfig, TopologySpec,
                       phase_rates, validate)

__all__ = ["ChannelParams", "FailureProbability", "PhasePlan", "ScenarioConfig", "TopologySpec",
           "phase_rates", "validate"]
__version__ = "0.1.0"
