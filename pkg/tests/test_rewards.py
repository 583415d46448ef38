import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isa.core import IndexSet, StructuralError
from isa.goals import decompose
from isa.influence import InfluenceReport
from isa.rewards import (DistanceConfig, RewardConfig, agent_reward, common_reward, distance, special_reward,
                         training_reward)


def test_distance_examples():
    assert distance([0, 0], [3, 4]) == 5.0
    assert distance([0.0], [0.1], DistanceConfig(lam=50)) == pytest.approx(50.1, abs=1e-12)
    assert distance([1, 2], [1, 2], DistanceConfig(lam=50)) == 0.0
    assert distance([], []) == 0.0
    with pytest.raises(StructuralError):
        distance([1], [1, 2])


def test_distance_config_validation():
    with pytest.raises(ValueError):
        DistanceConfig(lam=-1)
    with pytest.raises(ValueError):
        DistanceConfig(hamming_tolerance=float("nan"))


def test_hamming_tolerance():
    assert distance([0.0], [1e-7], DistanceConfig(lam=50)) == pytest.approx(1e-7)


def test_segment_reward_examples():
    D = IndexSet([1])
    assert common_reward(np.array([2.0]), np.array([1.0]), np.array([0.0]), D) == 1.0
    assert common_reward(np.array([2.0]), np.array([2.0]), np.array([0.0]), D) == 0.0
    assert common_reward(np.array([3.0, 4.0]), np.array([0.0, 0.0]), np.zeros(2), IndexSet([1, 2])) == 5.0
    assert special_reward(np.zeros(2), np.ones(2), np.zeros(0), IndexSet()) == 0.0
    assert special_reward(np.array([1.0]), np.array([2.0]), np.array([0.0]), D) < 0
    assert special_reward(np.array([1.0]), np.array([0.5]), np.array([0.0]), D) == 0.5


def _report():
    # K=3: dim 1 common (health), dim 2/3 positions of agents 0/1
    shoot, move0, move1 = IndexSet([1]), IndexSet([2]), IndexSet([3])
    return InfluenceReport(0.3, ((IndexSet(), move0, shoot), (IndexSet(), move1, shoot)), 3)


def test_agent_reward_gating_examples():
    rep = _report()
    dec = decompose([0.0, 0.0, 0.0], rep)
    s, s2 = np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.2 / 0.2 * 0.0, 0.0])
    # common gain 1.0, special gain 1.0 for agent 0 (position 1 -> 0)
    rc = common_reward(s, s2, dec.common, rep.common)
    rs = special_reward(s, s2, dec.special[0], rep.special[0])
    assert agent_reward(s, 2, s2, dec, 0, rep) == pytest.approx(rc + 0.2 * rs)
    assert agent_reward(s, 1, s2, dec, 0, rep) == pytest.approx(0.2 * rs)
    assert agent_reward(s, 1, s2, dec, 0, rep, gate=False) == pytest.approx(rc + 0.2 * rs)
    assert agent_reward(s, 1, s2, dec, 0, rep, rew=RewardConfig(alpha1=0.0)) == 0.0
    with pytest.raises(StructuralError):
        agent_reward(s, 7, s2, dec, 0, rep)


def test_agent_reward_frozen_values():
    rep = _report()
    dec = decompose([0.0, 0.0, 0.0], rep)
    s, s2 = np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.8, 0.0])  # r^c = 1.0, r^(0-c) = 0.2
    assert agent_reward(s, 2, s2, dec, 0, rep) == pytest.approx(1.04, abs=1e-12)
    assert agent_reward(s, 1, s2, dec, 0, rep) == pytest.approx(0.04, abs=1e-12)


def test_training_reward():
    assert training_reward(0.5, 1.0, 1.0) == 1.5
    assert training_reward(0.5, 1.0, 0.0) == 0.5
    assert training_reward(0.0, 0.0) == 0.0


vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.asarray)


@given(st.lists(vec3, min_size=2, max_size=20), vec3, st.sampled_from([0.0, 50.0]))
def test_telescoping(traj, goal, lam):
    D = IndexSet([1, 3])
    cfg = DistanceConfig(lam)
    g = goal[D.zero_based()]
    total = sum(common_reward(a, b, g, D, cfg) for a, b in zip(traj[:-1], traj[1:]))
    expect = distance(traj[0][D.zero_based()], g, cfg) - distance(traj[-1][D.zero_based()], g, cfg)
    assert total == pytest.approx(expect, abs=1e-9)


@given(vec3, vec3, vec3, st.floats(-5, 5))
def test_gated_out_reward_ignores_common(s, s2, g, bump):
    rep = _report()
    dec = decompose(g, rep)
    s2b = s2.copy()
    s2b[0] += bump
    assert abs(agent_reward(s, 1, s2, dec, 0, rep) - agent_reward(s, 1, s2b, dec, 0, rep)) <= 1e-12


@given(vec3, vec3, vec3)
def test_common_reward_symmetric_across_agents(s, s2, g):
    rep = _report()
    dec = decompose(g, rep)
    assert common_reward(s, s2, dec.common_of(0), rep.common) == common_reward(s, s2, dec.common_of(1), rep.common)


@given(vec3, vec3, vec3, st.sampled_from([0.0, 2.0, 50.0]))
def test_distance_metric(a, b, c, lam):
    cfg = DistanceConfig(lam)
    assert distance(a, b, cfg) >= 0
    assert distance(a, b, cfg) == distance(b, a, cfg)
    assert distance(a, a, cfg) == 0
    e = DistanceConfig(0.0)
    assert distance(a, c, e) <= distance(a, b, e) + distance(b, c, e) + 1e-9
    ham = lambda x, y: distance(x, y, cfg) - distance(x, y, e)
    assert ham(a, c) <= ham(a, b) + ham(b, c) + 1e-9
