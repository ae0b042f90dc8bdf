import math

import numpy as np
import pytest

from ntuple2048.config import LearningConfig, horizon
from ntuple2048.constants import UpdateRule
from ntuple2048.error import ConfigurationError
from ntuple2048.learning import (
    AutostepState,
    EpisodeBuffer,
    LearningRule,
    TCState,
    autostep_update,
    delayed_finish,
    delayed_update,
    tc_update,
    td_update,
)
from ntuple2048.ntuple import NTupleNetwork
from ntuple2048.schema import Board

# every symmetric view of a straight 4-tuple reads a different slot on this board
DISTINCT = Board.from_cells(list(range(16)))


def uniform_board(e: int) -> Board:
    return Board.from_cells([e] * 16)


def test_horizon():
    assert horizon(0.5) == 3
    assert horizon(0.0) == 0
    assert horizon(0.9) == 21
    # lam**1 sits exactly on the cutoff and is dropped
    assert horizon(0.1) == 0
    with pytest.raises(ConfigurationError):
        horizon(1.0)
    with pytest.raises(ConfigurationError):
        horizon(-0.1)


def test_learning_config_validation():
    with pytest.raises(ConfigurationError):
        LearningConfig(rule=UpdateRule.AUTOSTEP, lam=0.5)
    with pytest.raises(ConfigurationError):
        LearningConfig(beta=1.5)
    with pytest.raises(ConfigurationError):
        LearningConfig(weight_promotion=True, stage_bits=0)
    assert LearningConfig(rule="autostep", lam=0.0).rule == UpdateRule.AUTOSTEP
    assert LearningConfig(lam=0.5).horizon == 3


def test_td_alpha_one_zeroes_the_error(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.TD, delayed=False, lam=0.0, alpha=1.0)
    td_update(EpisodeBuffer(0), network, DISTINCT, 1.0, config)
    assert network.evaluate(DISTINCT) == pytest.approx(1.0, abs=1e-15)


def test_td_zero_delta_changes_nothing(small_network):
    network = small_network()
    config = LearningConfig(rule=UpdateRule.TD, delayed=False, lam=0.5)
    buffer = EpisodeBuffer(config.horizon)
    for e in range(1, 6):
        td_update(buffer, network, uniform_board(e), 0.0, config)
    assert not network.weights.any()


def test_td_decay_reaches_back_two_steps(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.TD, delayed=False, lam=0.5, alpha=1.0)
    buffer = EpisodeBuffer(config.horizon)
    # uniform boards put all eight views on one slot per board
    for e, delta in ((0, 0.0), (1, 0.0), (2, 1.0)):
        td_update(buffer, network, uniform_board(e), delta, config)
    per_ref = 1.0 / 8 * 0.25
    assert network.table(0)[0, 0] == pytest.approx(8 * per_ref)


def test_td_update_rejects_wrong_buffer(small_network):
    config = LearningConfig(rule=UpdateRule.TD, lam=0.5)
    with pytest.raises(ConfigurationError):
        td_update(EpisodeBuffer(0), small_network(), DISTINCT, 1.0, config)


def test_tc_hand_trace(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.TC, delayed=False, lam=0.0, beta=1.0)
    tc = TCState(network)
    buffer = EpisodeBuffer(0)

    tc_update(buffer, tc, network, DISTINCT, 1.0, config)
    tc_update(buffer, tc, network, DISTINCT, -1.0, config)

    for _, _, x in network.weight_refs(DISTINCT):
        assert tc.E[x] == 0.0
        assert tc.A[x] == 2.0
        assert tc.coherence(x) == 0.0
    assert network.evaluate(DISTINCT) == pytest.approx(0.0, abs=1e-15)

    before = network.weights.copy()
    tc_update(buffer, tc, network, DISTINCT, 5.0, config)
    np.testing.assert_array_equal(network.weights, before)


def test_tc_fresh_weight_learns_at_full_rate(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.TC, delayed=False, lam=0.0)
    tc = TCState(network)
    tc_update(EpisodeBuffer(0), tc, network, DISTINCT, 2.0, config)
    assert network.evaluate(DISTINCT) == pytest.approx(2.0)


def test_tc_rate_is_read_before_shared_slot_updates(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.TC, delayed=False, lam=0.0, beta=1.0)
    tc = TCState(network)
    # the empty board reads slot 0 through all eight views
    tc.E[0], tc.A[0] = 1.0, 3.0

    tc_update(EpisodeBuffer(0), tc, network, Board(), 3.0, config)

    # eight increments of beta/8 * (1/3) * 3
    assert network.table(0)[0, 0] == pytest.approx(1.0)
    assert tc.E[0] == pytest.approx(25.0)
    assert tc.A[0] == pytest.approx(27.0)


def test_tc_accumulator_invariant(small_network, random_positions, rng):
    network = small_network()
    config = LearningConfig(rule=UpdateRule.TC, delayed=False, lam=0.5)
    rule = LearningRule(network, config)
    for board in random_positions(rng, 200):
        rule.observe(board, float(rng.normal()))
    rule.finish()
    tc = rule.tables
    assert np.all(tc.A >= np.abs(tc.E) - 1e-12)


def test_delayed_sum():
    buffer = EpisodeBuffer(3)
    flushed = []
    for e in range(4):
        delayed_update(buffer, uniform_board(e), 1.0, 0.5, lambda b, s: flushed.append((b, s)))
    assert flushed == [(uniform_board(0), 1.875)]

    tail = delayed_finish(buffer, 0.5, lambda b, s: flushed.append((b, s)))
    assert [s for _, s in tail] == [1.75, 1.5, 1.0]
    assert [b for b, _ in tail] == [uniform_board(e) for e in (1, 2, 3)]
    assert buffer.steps == 0


def test_delayed_short_episode_flushes_everything():
    buffer = EpisodeBuffer(3)
    flushed = []
    for e, delta in ((0, 2.0), (1, 4.0)):
        delayed_update(buffer, uniform_board(e), delta, 0.5, lambda b, s: flushed.append(s))
    assert flushed == []
    tail = delayed_finish(buffer, 0.5, lambda b, s: flushed.append(s))
    assert [s for _, s in tail] == [4.0, 4.0]


def replay(network, config, sequence):
    rule = LearningRule(network, config)
    for board, delta in sequence:
        rule.observe(board, delta)
    rule.finish()
    return rule


def random_sequence(rng, positions_fn, length, positive=False):
    boards = positions_fn(rng, length, moves=60)
    deltas = rng.random(length) if positive else rng.normal(size=length)
    return [(b, float(d)) for b, d in zip(boards, deltas)]


def assert_td_replay_matches(small_network, random_positions, rng, lam, episodes):
    for _ in range(episodes):
        sequence = random_sequence(rng, random_positions, int(rng.integers(1, 120)))
        standard = small_network()
        delayed = small_network()
        replay(standard, LearningConfig(rule=UpdateRule.TD, delayed=False, lam=lam), sequence)
        replay(delayed, LearningConfig(rule=UpdateRule.TD, delayed=True, lam=lam), sequence)
        scale = max(np.abs(standard.weights).max(), 1e-300)
        assert np.abs(standard.weights - delayed.weights).max() <= 1e-9 * scale


def assert_tc_replay_matches(small_network, random_positions, rng, episodes):
    for _ in range(episodes):
        # one sign keeps every coherence at 1, where both schedules coincide
        sequence = random_sequence(rng, random_positions, int(rng.integers(1, 120)), positive=True)
        standard_net, delayed_net = small_network(), small_network()
        standard = replay(standard_net, LearningConfig(rule=UpdateRule.TC, delayed=False), sequence)
        delayed = replay(delayed_net, LearningConfig(rule=UpdateRule.TC, delayed=True), sequence)
        for a, b in (
            (standard_net.weights, delayed_net.weights),
            (standard.tables.E, delayed.tables.E),
            (standard.tables.A, delayed.tables.A),
        ):
            scale = max(np.abs(a).max(), 1e-300)
            assert np.abs(a - b).max() <= 1e-9 * scale


@pytest.mark.parametrize("lam", [0.0, 0.5, 0.9])
def test_delayed_td_matches_standard(small_network, random_positions, rng, lam):
    assert_td_replay_matches(small_network, random_positions, rng, lam, episodes=5)


def test_delayed_tc_matches_standard(small_network, random_positions, rng):
    assert_tc_replay_matches(small_network, random_positions, rng, episodes=5)


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.0, 0.5, 0.9])
def test_delayed_td_matches_standard_over_many_episodes(small_network, random_positions, rng, lam):
    assert_td_replay_matches(small_network, random_positions, rng, lam, episodes=100)


@pytest.mark.slow
def test_delayed_tc_matches_standard_over_many_episodes(small_network, random_positions, rng):
    assert_tc_replay_matches(small_network, random_positions, rng, episodes=100)


def autostep_reference(deltas_fn, steps, x, mu, tau, alpha_init):
    """Straight-line single-feature Autostep."""
    w, alpha, h, v = 0.0, alpha_init, 0.0, 0.0
    for t in range(steps):
        delta = deltas_fn(t, w * x)
        dxh = delta * x * h
        v = max(abs(dxh), v + tau * alpha * x * x * (abs(dxh) - v))
        if v != 0.0:
            alpha *= math.exp(mu * dxh / v)
        alpha /= max(alpha * x * x, 1.0)
        w += alpha * delta * x
        h = h * (1.0 - alpha * x * x) + alpha * delta * x
    return w, alpha


def test_autostep_matches_reference(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.AUTOSTEP, lam=0.0, mu=0.1, tau=0.0001)
    state = AutostepState(network, config.alpha_init)
    board = Board()
    targets = [3.0, -1.0, 2.5, 2.5, 0.5, 4.0, -2.0, 1.0] * 25

    def delta_at(t, prediction):
        return targets[t] - prediction

    for t in range(len(targets)):
        autostep_update(state, network, board, delta_at(t, network.evaluate(board)), config)

    # the empty board hits one slot with all eight views: a single feature of value 8
    w_ref, alpha_ref = autostep_reference(delta_at, len(targets), 8.0, 0.1, 0.0001, 1.0)
    assert network.table(0)[0, 0] == pytest.approx(w_ref, rel=1e-9)
    assert state.alpha[0] == pytest.approx(alpha_ref, rel=1e-9)


def test_autostep_zero_meta_rate_keeps_step_sizes(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    config = LearningConfig(rule=UpdateRule.AUTOSTEP, lam=0.0, mu=0.0)
    assert config.alpha_init == 1.0
    state = AutostepState(network, config.alpha_init)

    autostep_update(state, network, DISTINCT, 1.0, config)
    assert np.all(state.alpha == 1.0)
    # eight distinct features at step size 1: each weight moves by the full error
    assert network.evaluate(DISTINCT) == pytest.approx(8.0)

    for delta in (-2.0, 0.5):
        autostep_update(state, network, DISTINCT, delta, config)
    assert np.all(state.alpha == 1.0)


def test_autostep_rule_is_never_delayed(small_network):
    config = LearningConfig(rule=UpdateRule.AUTOSTEP, lam=0.0, delayed=True)
    rule = LearningRule(small_network(), config)
    assert not rule.delayed
    assert rule.buffer.capacity == 1
