"""Per-UE deep Q-learning for serving-cell selection.

Exploration follows the convention used throughout this package: with
probability ``epsilon`` the agent *exploits* (greedy argmax) and with
probability ``1 - epsilon`` it picks a BS uniformly at random.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..validation import check_actions, check_states
from .network import QNetwork
from .replay import Batch, ReplayBuffer

SINR_SCALE_DB = 50.0


def state_dim(n_bs: int) -> int:
    return 2 * n_bs + 1


def build_states(sinr, own_rb, loads, num_ue, rb_per_bs, sinr_scale_db=SINR_SCALE_DB):
    """Encode observations as ``(n_ue, 2m+1)`` rows: SINRs, own RBs, BS loads.

    SINR is taken to dB and divided by ``sinr_scale_db`` (clamped to [-1, 1]);
    own RBs are divided by ``rb_per_bs`` and loads by ``num_ue``.
    """
    sinr = np.atleast_2d(np.asarray(sinr, dtype=float))
    own_rb = np.atleast_1d(np.asarray(own_rb, dtype=float))
    loads = np.asarray(loads, dtype=float)
    n, m = sinr.shape
    if loads.shape != (m,):
        raise ValueError(f"got {loads.shape[0] if loads.ndim else 0} loads for {m} BSs")
    if own_rb.shape != (n,):
        raise ValueError("own_rb must have one entry per UE")
    sinr_part = np.clip(10.0 * np.log10(sinr) / sinr_scale_db, -1.0, 1.0)
    rb_part = np.clip(own_rb / rb_per_bs, 0.0, 1.0)[:, None]
    load_part = np.broadcast_to(loads / num_ue, (n, m))
    return np.hstack([sinr_part, rb_part, load_part])


def build_state(sinr, own_rb, loads, num_ue, rb_per_bs, sinr_scale_db=SINR_SCALE_DB):
    """Single-UE form of :func:`build_states`; returns a ``(2m+1,)`` vector."""
    return build_states(np.asarray(sinr, dtype=float)[None, :], [own_rb], loads,
                        num_ue, rb_per_bs, sinr_scale_db)[0]


def forward(net: QNetwork, s):
    return net.forward(s)


def select_action(net: QNetwork, s, epsilon: float, rng: np.random.Generator) -> int:
    """Greedy with probability ``epsilon``, uniform otherwise; ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q = net.forward(s)
    if rng.random() < epsilon:
        return int(np.argmax(q))
    return int(rng.integers(q.shape[-1]))


def td_target(r, s_next, target_net: QNetwork, gamma: float):
    """``r + gamma * max_a Q(s_next, a | target)``; broadcasts over batches."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    q_next = target_net.forward(s_next)
    out = np.asarray(r, dtype=float) + gamma * q_next.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def train_batch(net: QNetwork, target_net: QNetwork, batch: Batch, lr: float, gamma: float = 0.9):
    """One SGD step on the squared TD error of the taken actions.

    Updates ``net`` in place and returns ``(net, loss)`` where ``loss`` is the
    mean squared error before the step.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    targets = td_target(batch.rewards, batch.next_states, target_net, gamma)
    loss, gw, gb = net.loss_and_grads(batch.states, batch.actions, targets)
    net.apply_gradients(gw, gb, lr)
    return net, loss


def sync_target(net: QNetwork, target_net: QNetwork) -> QNetwork:
    target_net.copy_from(net)
    return target_net


def _agent_seeds(random_state, n_agents):
    root = 0 if random_state is None else int(random_state)
    return [np.random.SeedSequence([root, i]).spawn(2) for i in range(n_agents)]


class DQNPolicy(BaseEstimator):
    """A population of independent per-UE DQN agents.

    Agent ``i`` owns its own online network, target network, replay buffer
    and random stream; parameters are stored stacked for speed but no
    agent's update reads another agent's slice or buffer.
    """

    def __init__(self, learning_rate=0.01, gamma=0.9, memory_capacity=480, batch_size=150,
                 epsilon=0.8, hidden_sizes=(64, 64, 32), target_sync_interval=20,
                 sinr_scale_db=SINR_SCALE_DB, reward_mode="rate", reward_scale=1e8,
                 dtype="float32", random_state=0):
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.memory_capacity = memory_capacity
        self.batch_size = batch_size
        self.epsilon = epsilon
        self.hidden_sizes = hidden_sizes
        self.target_sync_interval = target_sync_interval
        self.sinr_scale_db = sinr_scale_db
        self.reward_mode = reward_mode
        self.reward_scale = reward_scale
        self.dtype = dtype
        self.random_state = random_state

    def _check_params(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0 < self.batch_size <= self.memory_capacity:
            raise ValueError("need 0 < batch_size <= memory_capacity")
        if self.target_sync_interval <= 0:
            raise ValueError("target_sync_interval must be positive")
        if self.reward_mode not in ("rate", "capped"):
            raise ValueError("reward_mode must be 'rate' or 'capped'")

    # -- lifecycle -------------------------------------------------------

    def initialize(self, n_agents: int, n_actions: int, state_size: int | None = None,
                   num_ue: int | None = None, rb_per_bs: int | None = None):
        """Create fresh networks, buffers and random streams."""
        self._check_params()
        d = state_dim(n_actions) if state_size is None else state_size
        sizes = (d, *self.hidden_sizes, n_actions)
        seeds = _agent_seeds(self.random_state, n_agents)
        self.online_ = QNetwork.initialize(sizes, seeds=[s[0] for s in seeds], dtype=np.dtype(self.dtype))
        self.target_ = self.online_.copy()
        self.buffers_ = [ReplayBuffer(self.memory_capacity, d) for _ in range(n_agents)]
        self.rngs_ = [np.random.default_rng(s[1]) for s in seeds]
        self.train_steps_ = np.zeros(n_agents, dtype=np.int64)
        self.n_agents_, self.n_actions_, self.n_features_in_ = n_agents, n_actions, d
        self.num_ue_ = n_agents if num_ue is None else num_ue
        self.rb_per_bs_ = rb_per_bs
        self.losses_ = []
        return self

    def begin_episode(self, world):
        """Called by the epoch protocol; networks persist across episodes."""
        if not hasattr(self, "online_") or self.n_agents_ != world.num_ue:
            self.initialize(world.num_ue, world.num_bs, num_ue=world.num_ue,
                            rb_per_bs=world.cfg.rb_per_bs)

    def agent(self, i: int):
        """``(online, target, buffer)`` of agent ``i``; networks are copies."""
        check_is_fitted(self, "online_")
        return self.online_[i], self.target_[i], self.buffers_[i]

    # -- acting ----------------------------------------------------------

    def encode(self, obs):
        return build_states(obs.sinr, obs.own_rb, obs.loads, self.num_ue_, self.rb_per_bs_,
                            self.sinr_scale_db)

    def q_values(self, X):
        """Q-values ``(n_agents, n_actions)``; row ``i`` is agent ``i`` on ``X[i]``."""
        check_is_fitted(self, "online_")
        X = check_states(X, self.n_features_in_)
        if X.shape[0] != self.n_agents_:
            raise ValueError(f"expected one state per agent ({self.n_agents_}), got {X.shape[0]}")
        return self.online_.forward(X[:, None, :])[:, 0, :]

    def predict(self, X):
        """Greedy action of every agent for its own state row."""
        return np.argmax(self.q_values(X), axis=1)

    def act(self, X):
        """Epsilon-greedy actions, drawing from each agent's own stream."""
        q = self.q_values(X)
        actions = np.empty(self.n_agents_, dtype=np.int64)
        for i, rng in enumerate(self.rngs_):
            if rng.random() < self.epsilon:
                actions[i] = int(np.argmax(q[i]))
            else:
                actions[i] = int(rng.integers(self.n_actions_))
        return actions

    def decide(self, obs):
        return self.act(self.encode(obs))

    # -- learning --------------------------------------------------------

    def rewards(self, report):
        rate = np.asarray(report.rate, dtype=float)
        if self.reward_mode == "capped":
            rate = np.minimum(rate, np.asarray(report.demand, dtype=float) / report.epoch_seconds)
        return rate / self.reward_scale

    def feedback(self, obs, actions, report, next_obs, learn=True):
        self.partial_fit(self.encode(obs), actions, self.rewards(report), self.encode(next_obs),
                         learn=learn)

    def partial_fit(self, states, actions, rewards, next_states, learn=True):
        """Store one transition per agent, then run one training step where possible."""
        check_is_fitted(self, "online_")
        states = check_states(states, self.n_features_in_, "states")
        next_states = check_states(next_states, self.n_features_in_, "next_states")
        actions = check_actions(actions, self.n_actions_, self.n_agents_)
        rewards = np.asarray(rewards, dtype=float)
        for i, buf in enumerate(self.buffers_):
            buf.push(states[i], actions[i], rewards[i], next_states[i])
        if learn:
            self.train_step()
        return self

    def train_step(self):
        """One batched SGD step for every agent whose buffer holds a full batch."""
        ready = [i for i, b in enumerate(self.buffers_) if b.ready(self.batch_size)]
        if not ready:
            return None
        batches = [self.buffers_[i].sample(self.batch_size, self.rngs_[i]) for i in ready]
        batch = Batch(*(np.stack(parts) for parts in zip(*batches)))
        everyone = len(ready) == self.n_agents_
        online = self.online_ if everyone else self.online_[ready]
        target = self.target_ if everyone else self.target_[ready]
        _, loss = train_batch(online, target, batch, self.learning_rate, self.gamma)
        if not everyone:
            self.online_[ready] = online
        if not online.is_finite():
            raise FloatingPointError("non-finite network parameters after training step")
        self.train_steps_[ready] += 1
        due = [i for i in ready if self.train_steps_[i] % self.target_sync_interval == 0]
        if due:
            self.target_[due] = self.online_[due]
        self.losses_.append(float(np.mean(loss)))
        return loss

    def fit(self, trace, cfg, episodes=20):
        """Train on ``trace`` for ``episodes`` passes of the epoch protocol."""
        from ..coordinator import run_episode
        from ..world import World

        world = World(cfg, trace)
        self.initialize(cfg.num_ue, cfg.num_bs, num_ue=cfg.num_ue, rb_per_bs=cfg.rb_per_bs)
        for _ in range(episodes):
            run_episode(world, self, max_attachment=cfg.max_attachment)
        return self
