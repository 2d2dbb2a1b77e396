from .dqn import (
    DQNPolicy,
    build_state,
    build_states,
    forward,
    select_action,
    state_dim,
    sync_target,
    td_target,
    train_batch,
)
from .network import QNetwork
from .replay import Batch, BufferNotReady, Experience, ReplayBuffer

__all__ = [
    "Batch", "BufferNotReady", "DQNPolicy", "Experience", "QNetwork", "ReplayBuffer",
    "build_state", "build_states", "forward", "select_action", "state_dim", "sync_target",
    "td_target", "train_batch",
]
