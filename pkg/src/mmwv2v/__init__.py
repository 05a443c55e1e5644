"""Time-slotted simulator of millimeter-wave vehicle-to-vehicle networks:
highway mobility, directional-link radio models, deadline-bound queues,
matching-based association, swarm beamwidth optimization and the
delay/reliability evaluation toolkit."""

from .config import SimConfig, config_from_dict, load_config
from .engine import Simulation, run
from .metrics import MetricsBundle

__all__ = ["SimConfig", "config_from_dict", "load_config",
           "Simulation", "run", "MetricsBundle"]

__version__ = "0.1.0"
