import numpy as np
import pytest
from scipy import stats

from cellbalance.agent import (
    Batch,
    BufferNotReady,
    DQNPolicy,
    QNetwork,
    ReplayBuffer,
    build_state,
    build_states,
    select_action,
    sync_target,
    td_target,
    train_batch,
)


def const_net(q):
    """Network that ignores its 1-d input and outputs ``q``."""
    q = np.asarray(q, dtype=float)
    return QNetwork([np.zeros((1, 1)), np.zeros((1, q.size))], [np.zeros(1), q])


# -- state encoding ---------------------------------------------------------

def test_state_dimension():
    s = build_state([10.0, 100.0, 1.0, 3.0], 12.0, [5, 5, 5, 5], num_ue=20, rb_per_bs=50)
    assert s.shape == (9,)


def test_symmetric_inputs_give_constant_blocks():
    s = build_state([100.0] * 4, 7.0, [3, 3, 3, 3], num_ue=12, rb_per_bs=50)
    assert len(set(s[:4])) == 1 and len(set(s[5:])) == 1


def test_state_encoding_values():
    s = build_state([10.0, 1e6], 25.0, [10, 0], num_ue=20, rb_per_bs=50)
    # 10 dB / 50, 60 dB clamps to 1, 25/50 RBs, loads / 20
    assert s == pytest.approx([0.2, 1.0, 0.5, 0.5, 0.0])
    assert np.all(np.abs(s) <= 1)


def test_identical_ues_identical_states():
    sinr = np.array([[30.0, 2.0, 5.0], [30.0, 2.0, 5.0]])
    states = build_states(sinr, [4.0, 4.0], [1, 1, 0], num_ue=2, rb_per_bs=50)
    assert np.array_equal(states[0], states[1])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_state([1.0, 2.0], 1.0, [1, 1, 1], num_ue=3, rb_per_bs=50)


# -- action selection --------------------------------------------------------

def test_epsilon_one_always_greedy():
    net = const_net([0.0, 2.0, 1.0])
    rng = np.random.default_rng(0)
    assert {select_action(net, [0.0], 1.0, rng) for _ in range(200)} == {1}


def test_tie_break_lowest_index():
    assert select_action(const_net([1, 3, 3, 2]), [0.0], 1.0, np.random.default_rng(0)) == 1


def test_epsilon_zero_uniform():
    m, draws = 4, 10_000
    rng = np.random.default_rng(11)
    net = const_net([0.0, 5.0, 0.0, 0.0])
    counts = np.bincount([select_action(net, [0.0], 0.0, rng) for _ in range(draws)], minlength=m)
    sigma = np.sqrt(draws * (1 / m) * (1 - 1 / m))
    assert np.all(np.abs(counts - draws / m) < 4 * sigma)


def test_epsilon_validated():
    with pytest.raises(ValueError):
        select_action(const_net([0.0]), [0.0], 1.5, np.random.default_rng(0))


# -- TD target ----------------------------------------------------------------

def test_td_target_example():
    assert td_target(10.0, [0.0], const_net([2, 5, 1]), 0.9) == pytest.approx(14.5)


def test_td_target_myopic():
    assert td_target(3.25, [0.0], const_net([2, 5, 1]), 0.0) == 3.25


def test_td_target_zero_net():
    assert td_target(0.0, np.zeros(9), QNetwork.zeros((9, 4, 4, 4, 4)), 0.9) == 0.0


def test_td_target_uses_target_parameters():
    online, target = const_net([100.0]), const_net([1.0])
    assert td_target(0.0, [0.0], target, 0.5) == 0.5
    assert td_target(0.0, [0.0], online, 0.5) == 50.0


# -- training ---------------------------------------------------------------

def test_fixed_point_no_update():
    rng = np.random.default_rng(0)
    net = QNetwork.initialize((3, 4, 4, 4, 2), rng)
    target = QNetwork.zeros((3, 4, 4, 4, 2))
    states = rng.normal(size=(5, 3))
    actions = rng.integers(0, 2, size=5)
    rewards = net.forward(states)[np.arange(5), actions]  # gamma * 0 + r == Q
    before = net.get_flat()
    _, loss = train_batch(net, target, Batch(states, actions, rewards, states), 0.01, gamma=0.9)
    assert loss == pytest.approx(0.0, abs=1e-24)
    assert np.array_equal(net.get_flat(), before)


def test_single_step_by_hand():
    # q = 3 relu(2x - 1) + 0.5 = 9.5 at x = 2, target 5: err 4.5, dL/dq = 9
    net = QNetwork([[[2.0]], [[3.0]]], [[-1.0], [0.5]])
    target = QNetwork.zeros((1, 1, 1))
    batch = Batch(np.array([[2.0]]), np.array([0]), np.array([5.0]), np.array([[0.0]]))
    _, loss = train_batch(net, target, batch, lr=0.01, gamma=0.0)
    assert loss == pytest.approx(20.25)
    assert net.weights[0][0, 0] == pytest.approx(2 - 0.01 * 54)
    assert net.biases[0][0] == pytest.approx(-1 - 0.01 * 27)
    assert net.weights[1][0, 0] == pytest.approx(3 - 0.01 * 27)
    assert net.biases[1][0] == pytest.approx(0.5 - 0.01 * 9)


def test_empty_batch_rejected():
    net = QNetwork.zeros((2, 2, 2))
    empty = Batch(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        train_batch(net, net.copy(), empty, 0.01)


def test_sync_target_copy_semantics():
    rng = np.random.default_rng(4)
    net = QNetwork.initialize((9, 8, 8, 4, 4), rng)
    target = QNetwork.initialize((9, 8, 8, 4, 4), rng)
    sync_target(net, target)
    s = rng.normal(size=(6, 9))
    assert np.array_equal(net.forward(s), target.forward(s))
    frozen = target.forward(s)
    batch = Batch(s, rng.integers(0, 4, 6), rng.normal(size=6), s)
    train_batch(net, target, batch, 0.05)
    assert np.array_equal(target.forward(s), frozen)
    assert not np.array_equal(net.forward(s), frozen)
    sync_target(net, target)
    once = target.get_flat()
    sync_target(net, target)
    assert np.array_equal(target.get_flat(), once)


def test_sync_shape_mismatch():
    with pytest.raises(ValueError):
        sync_target(QNetwork.zeros((2, 3, 2)), QNetwork.zeros((2, 4, 2)))


# -- replay ---------------------------------------------------------------------

def filled(n, capacity=480):
    buf = ReplayBuffer(capacity, 1)
    for k in range(n):
        buf.push([k], 0, float(k), [k])
    return buf


def test_fifo_eviction():
    buf = filled(481)
    assert len(buf) == 480
    assert [e.reward for e in buf.contents()] == list(range(1, 481))


def test_exhaustive_sample_is_permutation():
    batch = filled(150).sample(150, np.random.default_rng(0))
    assert sorted(batch.rewards) == list(range(150))


def test_not_ready():
    with pytest.raises(BufferNotReady):
        filled(149).sample(150, np.random.default_rng(0))


def test_sampling_uniform():
    buf = filled(30, capacity=30)
    rng = np.random.default_rng(1)
    counts = np.zeros(30)
    for _ in range(2000):
        counts[buf.sample(10, rng).rewards.astype(int)] += 1
    assert stats.chisquare(counts).pvalue > 1e-3
    expected = 2000 * 10 / 30
    assert np.all(np.abs(counts - expected) < 4 * np.sqrt(expected))


# -- the policy estimator ---------------------------------------------------------

def test_default_hyperparameters():
    p = DQNPolicy()
    assert (p.learning_rate, p.gamma, p.memory_capacity, p.batch_size, p.epsilon) == (0.01, 0.9, 480, 150, 0.8)
    assert p.get_params()["hidden_sizes"] == (64, 64, 32)


def test_invalid_params():
    with pytest.raises(ValueError):
        DQNPolicy(batch_size=500).initialize(2, 4)
    with pytest.raises(ValueError):
        DQNPolicy(gamma=1.0).initialize(2, 4)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        DQNPolicy().predict(np.zeros((2, 9)))


def run_agents(policy, n, perturb=None, steps=12):
    rng = np.random.default_rng(0)
    for t in range(steps):
        s = rng.normal(size=(n, 9)) * 0.3
        s2 = rng.normal(size=(n, 9)) * 0.3
        a = rng.integers(0, 4, n)
        r = rng.random(n)
        if perturb is not None:
            s[perturb] += 1.0
            r[perturb] = 50.0
        policy.partial_fit(s, a, r, s2)
    return policy


def test_agent_isolation():
    kw = dict(batch_size=4, memory_capacity=8, hidden_sizes=(8, 8, 4), dtype="float64", random_state=3)
    base = run_agents(DQNPolicy(**kw).initialize(3, 4), 3)
    other = run_agents(DQNPolicy(**kw).initialize(3, 4), 3, perturb=1)
    for i in (0, 2):
        assert np.array_equal(base.online_[i].get_flat(), other.online_[i].get_flat())
        assert np.array_equal(base.buffers_[i].states, other.buffers_[i].states)
    assert not np.array_equal(base.online_[1].get_flat(), other.online_[1].get_flat())


def test_population_matches_single_agent_functions():
    kw = dict(batch_size=4, memory_capacity=8, hidden_sizes=(8, 8, 4), dtype="float64",
              target_sync_interval=3, random_state=5)
    pop = run_agents(DQNPolicy(**kw).initialize(2, 4), 2)
    # replay agent 1 alone with the standalone functions and its own seed stream
    ref = DQNPolicy(**kw).initialize(2, 4)
    net, target, _ = ref.agent(1)
    rng = ref.rngs_[1]
    buf = ReplayBuffer(8, 9)
    data = np.random.default_rng(0)
    for t in range(12):
        s, s2 = data.normal(size=(2, 9)) * 0.3, data.normal(size=(2, 9)) * 0.3
        a, r = data.integers(0, 4, 2), data.random(2)
        buf.push(s[1], a[1], r[1], s2[1])
        if buf.ready(4):
            train_batch(net, target, buf.sample(4, rng), 0.01, 0.9)
            if (t - 2) % 3 == 0:
                sync_target(net, target)
    assert np.allclose(pop.online_[1].get_flat(), net.get_flat(), rtol=1e-12, atol=1e-14)
    assert np.allclose(pop.target_[1].get_flat(), target.get_flat(), rtol=1e-12, atol=1e-14)


def test_act_respects_epsilon_one():
    p = DQNPolicy(epsilon=1.0, hidden_sizes=(8, 8, 4)).initialize(5, 4)
    X = np.random.default_rng(0).normal(size=(5, 9))
    assert np.array_equal(p.act(X), p.predict(X))
