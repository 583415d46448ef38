import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isa.core import ConfigurationError, IndexSet, UsageError
from isa.envs import REGISTRY, make_env
from isa.envs.base import NOOP, NORTH
from isa.envs.unlock import UNLOCK
from isa.trainer import oracle_success

ENV_CONFIGS = [
    ("gridnavigation", {}), ("gridnavigation", {"super_sparse": True}), ("gridnavigation", {"n_agents": 3}),
    ("gridunlock", {}), ("gridunlock", {"shared_lock": True}), ("gridunlock", {"orphan_lock": True}),
    ("gridshooting", {}), ("gridshooting", {"n_drifters": 0}), ("gridshooting", {"n_targets": 2, "health": 3}),
    ("gridshooting", {"damage_delay": 1, "n_targets": 1, "health": 10, "max_steps": 30, "end_on_clear": True}),
]


def test_unknown_env():
    with pytest.raises(ConfigurationError):
        make_env("nope")
    with pytest.raises(ConfigurationError):
        make_env("gridunlock", colour="red")


@pytest.mark.parametrize("name,params", ENV_CONFIGS)
def test_reset_determinism(name, params):
    env = make_env(name, **params)
    a, _ = env.reset(5)
    b, _ = env.reset(5)
    assert np.array_equal(a, b)
    starts = {tuple(env.reset(s)[0]) for s in range(20)}
    assert len(starts) > 1


def test_fixed_layout_ignores_seed():
    env = make_env("gridunlock", random_start=False)
    assert np.array_equal(env.reset(1)[0], env.reset(99)[0])


@pytest.mark.parametrize("name,params", ENV_CONFIGS)
def test_ground_truth_covers_reward_relevant(name, params):
    env = make_env(name, **params)
    gt = env.ground_truth()
    covered = IndexSet()
    for i in range(env.n_agents):
        covered = covered | gt.agent_scope(i)
    if params.get("orphan_lock"):
        assert not gt.reward_relevant <= covered
    else:
        assert gt.reward_relevant <= covered


@pytest.mark.parametrize("name,params", ENV_CONFIGS)
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_factorization(name, params, seed):
    """A dimension changes only if an executed action's declared scope contains it."""
    env = make_env(name, **params)
    gt = env.ground_truth()
    rng = np.random.default_rng(seed)
    s, _ = env.reset(seed)
    done = False
    pending = IndexSet()  # delayed damage lands one step later
    while not done:
        acts = [int(rng.integers(n)) for n in env.action_counts]
        res = env.step(acts)
        allowed = IndexSet()
        for i, a in enumerate(acts):
            allowed = allowed | gt.scopes[i][a]
        changed = IndexSet(np.nonzero(res.state != s)[0] + 1)
        assert changed <= (allowed | pending | env.exogenous_dims)
        if params.get("damage_delay"):
            pending = IndexSet(k for k in allowed if k > 2 * env.n_agents)
        assert res.reward == 0 or res.reward >= 1
        s, done = res.state, res.done
    assert env._t <= env.max_steps


@pytest.mark.parametrize("name,params", ENV_CONFIGS)
def test_step_after_done(name, params):
    env = make_env(name, **params)
    env.reset(0)
    done = False
    while not done:
        done = env.step([0] * env.n_agents).done
    with pytest.raises(UsageError):
        env.step([0] * env.n_agents)


def test_unlock_move_touches_own_position_only():
    env = make_env("gridunlock", random_start=False)
    s, _ = env.reset(0)
    res = env.step([NORTH, NOOP])
    changed = np.nonzero(res.state != s)[0] + 1
    assert set(changed) <= set(env.pos_dims(0))


def test_unlock_lock_opens_with_reward():
    env = make_env("gridunlock", strength=1)
    env.reset(0)
    env._state[:4] = [1, 2, 3, 2]  # both agents on their locks
    res = env.step([UNLOCK, NOOP])
    assert res.state[env.lock_dim(0) - 1] == 1 and res.reward == 1.0 and not res.success
    res = env.step([NOOP, UNLOCK])
    assert res.reward == 1.0 and res.success and res.done


def test_shooting_reward_only_when_both_subtasks_done():
    env = make_env("gridshooting", n_targets=1, health=1)
    env.reset(0)
    env._state[:4] = [0, 0, 4, 4]  # both on posts
    res = env.step([5, 0])
    assert res.success and res.reward == 1.0
    env.reset(0)
    env._state[:4] = [1, 0, 4, 4]  # agent 0 off post: cleared, but no reward yet
    res = env.step([5, 0])
    assert not res.done and not res.success and res.reward == 0.0
    res = env.step([4, 0])  # walking onto the post afterwards completes the task
    assert res.done and res.success and res.reward == 1.0


def test_shooting_end_on_clear():
    env = make_env("gridshooting", n_targets=1, health=1, end_on_clear=True)
    env.reset(0)
    env._state[:4] = [1, 0, 4, 4]
    res = env.step([5, 0])
    assert res.done and not res.success and res.reward == 0.0


def test_shooting_delayed_damage():
    env = make_env("gridshooting", n_targets=1, health=3, damage_delay=1)
    env.reset(0)
    env._state[:4] = [0, 0, 4, 4]
    h = env.health_dim(0) - 1
    assert env.step([5, 0]).state[h] == 3
    assert env.step([0, 0]).state[h] == 2


def test_drifters_are_exogenous_and_seeded():
    env = make_env("gridshooting", n_drifters=2)
    drift = env.exogenous_dims
    assert len(drift) == 4 and drift.isdisjoint(env.ground_truth().reward_relevant)
    assert all(drift.isdisjoint(d) for scopes in env.ground_truth().scopes for d in scopes)
    runs = []
    for _ in range(2):
        s, _ = env.reset(3)
        traj = [s]
        for _ in range(10):
            traj.append(env.step([0, 0]).state)
        runs.append(np.array(traj))
    np.testing.assert_array_equal(runs[0], runs[1])
    cols = drift.zero_based()
    assert np.any(np.diff(runs[0][:, cols], axis=0) != 0)
    assert runs[0][:, cols].min() >= 0 and runs[0][:, cols].max() <= env.size - 1


def test_navigation_first_occupation_reward():
    env = make_env("gridnavigation")
    env.reset(0)
    (x, y) = env.landmarks[0]
    env._state[:2] = [x, y - 1] if y > 0 else [x, y + 1]
    env._state[2:4] = [0, 4] if (0, 4) != env.landmarks[1] else [4, 0]
    res = env.step([NORTH if y > 0 else 2, NOOP])
    assert res.reward == 1.0


@pytest.mark.parametrize("name,params", [c for c in ENV_CONFIGS if not c[1].get("orphan_lock")])
def test_oracle_solves(name, params):
    env = make_env(name, **params)
    assert oracle_success(env, 30, np.random.default_rng(0)) == 1.0


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_legend_is_consistent(name):
    env = make_env(name)
    leg = env.legend()
    assert leg["K"] == len(leg["dimensions"]) == env.K
    assert [d["index"] for d in leg["dimensions"]] == list(range(1, env.K + 1))
    assert len(env.observe()[0]) == env.obs_dim if env._state is not None else True
