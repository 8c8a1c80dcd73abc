import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cae.envs import make_env
from cae.learner import behavior_rollout
from cae.oracle import MdpSpec, compute_c_star, min_horizon, policy_success_prob
from cae.policy import (
    HorizonSelectorConfig, as_policy_spec, epsilon_greedy, greedy_action, horizon_aware_policy,
    horizon_free_policy, most_likely_trajectory, select_horizon,
)

# frozen-lake goldens from the exact oracle, start (1,0) to goal (1,6)
H_ALPHA_09 = 19
HORIZON_FREE_SUCCESS_50 = 0.99999996


class Table:
    """Wraps a callable ``(S, G, H) -> (B, m)`` as an accessibility function."""

    def __init__(self, f):
        self.action_values = f


@pytest.fixture(scope="module")
def lake_oracle():
    lake = make_env("frozen-lake")
    mdp = MdpSpec.from_env(lake)
    return lake, mdp, compute_c_star(mdp, 50)


def test_greedy_line_world(line):
    table = compute_c_star(MdpSpec.from_env(line), 3)
    assert greedy_action(table, 0, 2, 2) == 1
    with pytest.raises(ValueError):
        greedy_action(table, 0, 2, 0)


def test_constant_function_ties_to_zero():
    const = Table(lambda S, G, H: np.full((len(S), 4), 0.3))
    assert greedy_action(const, 0, 1, 5) == 0
    assert horizon_free_policy(const, HorizonSelectorConfig(h_max=5))(0, 1) == 0


def test_horizon_aware_decrements(line):
    seen = []
    base = compute_c_star(MdpSpec.from_env(line), 4)
    spy = Table(lambda S, G, H: (seen.append(int(H[0])), base.action_values(S, G, H))[1])
    states, actions = most_likely_trajectory(line, spy, 0, 2, 4)
    # both actions tie at 1.0 until h = 2, so the lowest index (-1) waits in place
    assert states == [0, 0, 0, 1, 2] and seen == [4, 3, 2, 1]
    assert horizon_aware_policy(base)(0, 2, 2) == 1


def test_alpha_one_gives_min_horizon(open_grid):
    table = compute_c_star(MdpSpec.from_env(open_grid), 15)
    cfg = HorizonSelectorConfig(alpha=1.0, h_max=15)
    s = open_grid.start
    for g in range(0, open_grid.n_goals, 5):
        assert select_horizon(table, s, g, cfg) == max(1, min_horizon(table, s, g))


def test_tiny_alpha_smallest_positive():
    f = Table(lambda S, G, H: np.where(np.asarray(H)[:, None] >= 4, 0.05 * np.asarray(H)[:, None], 0.0)
              * np.ones((1, 2)))
    assert select_horizon(f, 0, 0, HorizonSelectorConfig(alpha=1e-9, h_max=10)) == 4


def test_frozen_lake_h_alpha_golden(lake_oracle):
    lake, mdp, table = lake_oracle
    cfg = HorizonSelectorConfig(alpha=0.9, h_max=50)
    h = select_horizon(table, lake.start, lake.test_goal, cfg)
    per_h = table.values[lake.start, :, lake.test_goal, 1:].max(axis=0)
    assert h == H_ALPHA_09 == 1 + int(np.flatnonzero(per_h >= 0.9 * per_h.max())[0])
    pi = as_policy_spec(table, mdp, horizon_free=cfg)
    p = policy_success_prob(mdp, pi, lake.start, lake.test_goal, 50)
    assert p == pytest.approx(HORIZON_FREE_SUCCESS_50, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(a1=st.floats(0.01, 1.0), a2=st.floats(0.01, 1.0), s=st.integers(0, 34), g=st.integers(0, 34))
def test_raising_alpha_never_lowers_h(lake_oracle, a1, a2, s, g):
    lake, _, table = lake_oracle
    lo, hi = sorted((a1, a2))
    h_lo = select_horizon(table, s, g, HorizonSelectorConfig(alpha=lo, h_max=50))
    h_hi = select_horizon(table, s, g, HorizonSelectorConfig(alpha=hi, h_max=50))
    assert 1 <= h_lo <= h_hi <= 50


def test_metric_floor_horizon_set(lake):
    cfg = HorizonSelectorConfig(h_max=50, metric_floor=True)
    H = cfg.horizon_set(lake, lake.start, lake.test_goal)
    assert H[0] == 6 and H[-1] == 50
    with pytest.raises(ValueError):
        HorizonSelectorConfig(horizons=(3, 2))
    with pytest.raises(ValueError):
        HorizonSelectorConfig(alpha=0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_argmax_invariant_under_squaring(seed):
    V = np.random.default_rng(seed).random((1, 4))
    f = Table(lambda S, G, H: V)
    f2 = Table(lambda S, G, H: V ** 2)
    assert greedy_action(f, 0, 0, 3) == greedy_action(f2, 0, 0, 3)


def test_epsilon_zero_and_one(lake_oracle):
    lake, _, table = lake_oracle
    base = horizon_free_policy(table, HorizonSelectorConfig(h_max=50), lake)
    rng = np.random.default_rng(0)
    zero = epsilon_greedy(base, 0.0, 4)
    for s in range(0, 30, 3):
        assert zero(s, lake.test_goal, rng) == base(s, lake.test_goal, rng)
    one = epsilon_greedy(base, 1.0, 4)
    draws = [one(lake.start, lake.test_goal, rng) for _ in range(10_000)]
    assert stats.chisquare(np.bincount(draws, minlength=4)).pvalue > 0.01
    with pytest.raises(ValueError):
        epsilon_greedy(base, 1.5, 4)


def test_trained_policy_follows_min_horizon(open_grid):
    table = compute_c_star(MdpSpec.from_env(open_grid), 15)
    policy = horizon_free_policy(table, HorizonSelectorConfig(h_max=15), open_grid)
    rng = np.random.default_rng(0)
    for g in (open_grid.test_goal, open_grid.index(6, 6), open_grid.index(0, 0)):
        ep = behavior_rollout(open_grid, policy, g, rng, s0=open_grid.start)
        assert ep.success and len(ep) == min_horizon(table, open_grid.start, g)


def test_rollout_at_goal_has_length_zero(lake):
    ep = behavior_rollout(lake, lambda s, g, r: 0, lake.start, np.random.default_rng(0), s0=lake.start)
    assert len(ep) == 0 and ep.success


def test_most_likely_trajectories(lake_oracle):
    lake, _, table = lake_oracle
    short, _ = most_likely_trajectory(lake, table, lake.start, lake.test_goal, 6)
    long, _ = most_likely_trajectory(lake, table, lake.start, lake.test_goal, 24)
    assert [lake.cell(s) for s in short] == [(1, y) for y in range(7)]
    assert len(long) - 1 == 12
    beside_holes = {lake.index(1, y) for y in (2, 3, 4)}
    assert not beside_holes & set(long)


def test_dubins_selector_runs():
    car = make_env("dubins-small")
    f = Table(lambda S, G, H: np.tile(np.linspace(0.1, 0.7, 7), (len(S), 1)) * (np.asarray(H)[:, None] / 10))
    act = horizon_free_policy(f, HorizonSelectorConfig(h_max=10), car)
    assert act(car.start, np.array([3.0, 7.0])) == 6
