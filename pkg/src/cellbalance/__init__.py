"""Per-UE deep Q-learning for cellular load balancing, with a MAX-SINR baseline."""

from .agent import DQNPolicy, QNetwork, ReplayBuffer
from .baseline import MaxSinrPolicy, max_sinr_action
from .config import SimConfig, load_config
from .coordinator import Coordinator, epoch_protocol, run_episode
from .trace import Trace, generate_trace, load_trace
from .world import EpochReport, World, run_epoch

__version__ = "0.1.0"

__all__ = [
    "Coordinator", "DQNPolicy", "EpochReport", "MaxSinrPolicy", "QNetwork", "ReplayBuffer",
    "SimConfig", "Trace", "World", "epoch_protocol", "generate_trace", "load_config",
    "load_trace", "max_sinr_action", "run_episode", "run_epoch",
]
