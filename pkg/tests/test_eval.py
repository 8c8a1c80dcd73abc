import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from cae.envs import DiscretizedDubins, GridEnv, make_env
from cae.evaluation import (
    EvalReport, GoalRecord, aggregate_seeds, evaluate, heatmap, rollout, write_matrix_csv,
    write_trajectory_csv,
)
from cae.oracle import MdpSpec, compute_c_star, reachability_from
from cae.policy import HorizonSelectorConfig, horizon_free_policy, uniform_policy
from cae.svg import arrows_svg, curve_svg, gray, heatmap_svg, trajectory_svg


@pytest.fixture(scope="module")
def lake_table():
    lake = make_env("frozen-lake")
    return lake, compute_c_star(MdpSpec.from_env(lake), 30)


def test_oracle_greedy_line_world(line):
    table = compute_c_star(MdpSpec.from_env(line), 5)
    policy = horizon_free_policy(table, HorizonSelectorConfig(h_max=5), line)
    rep = evaluate(line, policy, goals=[(2, "easy")], trials=20)
    assert rep.success_rate == 100.0
    assert rep.records[0].mean_path_length == 2.0
    assert rep.records[0].mean_final_distance == 0.0


def test_unreachable_goal():
    env = GridEnv("iso", 3, 1, actions="line", walls=[(1, 0)], start=(0, 0), max_episode_length=10)
    goal = env.index(2, 0)
    rep = evaluate(env, uniform_policy(env.n_actions), goals=[(goal, "hard")], trials=25)
    assert rep.success_rate == 0.0
    assert rep.records[0].mean_path_length is None
    assert rep.overall()["mean_path_length"] is None
    assert rep.records[0].mean_final_distance > 0


def test_overall_is_trial_weighted():
    recs = [GoalRecord([0], "easy", 9, 10, 3.0, 0.0), GoalRecord([1], "hard", 1, 30, 7.0, 2.0)]
    rep = EvalReport("x", 0, 0, recs)
    assert rep.success_rate == pytest.approx(100 * 10 / 40)
    assert rep.overall()["mean_path_length"] == pytest.approx((9 * 3 + 7) / 10)
    assert set(rep.strata()) == {"easy", "hard"}
    assert rep.strata()["hard"]["success_rate"] == pytest.approx(100 / 30)


def test_evaluate_reproducible_and_thread_independent(lake_table):
    lake, table = lake_table
    policy = horizon_free_policy(table, HorizonSelectorConfig(h_max=30), lake)
    a = evaluate(lake, policy, trials=10, seed=3)
    b = evaluate(lake, policy, trials=10, seed=3)
    c = evaluate(lake, policy, trials=10, seed=3, threads=3)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert 0.0 < a.success_rate <= 100.0
    with pytest.raises(ValueError):
        evaluate(lake, policy, trials=0)


def test_rollout_respects_max_len(lake):
    ok, steps, _, trace = rollout(lake, lambda s, g, r: 0, lake.index(4, 6), np.random.default_rng(0), max_len=3)
    assert steps <= 3 and len(trace) == steps + 1


def test_heatmap_h0_is_indicator(lake_table):
    lake, table = lake_table
    M = heatmap(table, lake, lake.start, 0)
    expected = np.zeros((lake.height, lake.width))
    x, y = lake.cell(lake.start)
    expected[y, x] = 1.0
    assert np.array_equal(M, expected)


def test_heatmaps_monotone_in_h(lake_table):
    lake, table = lake_table
    maps = [heatmap(table, lake, lake.start, h) for h in range(0, 31, 3)]
    assert all((b >= a - 1e-12).all() for a, b in zip(maps, maps[1:]))


def test_heatmap_car():
    car = make_env("dubins-small")

    class Flat:
        def predict(self, S, G, H):
            return np.full((len(S), car.n_actions), 0.25)

    M = heatmap(Flat(), car, car.start, 5, resolution=1.0)
    assert M.shape == (int(car.size) + 1,) * 2 and np.all(M == 0.25)


def test_aggregate_seeds():
    reps = [EvalReport("x", 10, s, [GoalRecord([0], "easy", k, 10, 1.0, 0.0)]) for s, k in enumerate((4, 6, 8))]
    agg = aggregate_seeds(reps)
    assert agg["overall"]["mean"] == pytest.approx(60.0)
    assert agg["overall"]["std"] == pytest.approx(np.std([40, 60, 80]))
    assert agg["easy"]["seeds"] == 3 and "hard" not in agg


def test_writers(tmp_path, lake_table):
    lake, table = lake_table
    rep = evaluate(lake, uniform_policy(4), trials=2)
    rep.write_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["overall"]["trials"] == 2 * len(rep.records)
    assert len((tmp_path / "r.csv").read_text().splitlines()) == len(rep.records) + 1
    M = heatmap(table, lake, lake.start, 8)
    write_matrix_csv(tmp_path / "m.csv", M)
    assert len((tmp_path / "m.csv").read_text().splitlines()) == lake.height
    _, _, _, trace = rollout(lake, uniform_policy(4), lake.test_goal, np.random.default_rng(0))
    write_trajectory_csv(tmp_path / "t.csv", lake, trace)
    assert (tmp_path / "t.csv").read_text().startswith("t,x,y,action")


def test_svg_outputs_parse(lake_table):
    lake, table = lake_table
    assert gray(0.0) == "rgb(255,255,255)" and gray(1.0) == "rgb(0,0,0)" and gray(7.0) == gray(1.0)
    docs = [
        heatmap_svg(heatmap(table, lake, lake.start, 10), marks={(1, 0): "S"}),
        trajectory_svg(lake, [[lake.start, lake.index(1, 1)]], goal=lake.test_goal),
        curve_svg([0, 1, 2], [0.1, 0.5, 0.9], label="success"),
        arrows_svg(lake, {lake.start: 0, lake.index(3, 3): 2}, goal=lake.test_goal),
    ]
    for doc in docs:
        assert ET.fromstring(doc).tag.endswith("svg")


def test_reduced_turn_car_dumbbell():
    # small horizons only: past ~40 degrees of turning the unit lattice rounds steps sideways
    car = make_env("dubins-open5")
    lattice = DiscretizedDubins(car, 1.0)
    mdp = MdpSpec.from_env(lattice)
    s0 = lattice.index_of(car.start)
    x, y, heading = lattice.state_of(s0)
    assert heading == 0.0
    h2, h6 = reachability_from(mdp, s0, [2, 6], chunk=128)
    at = lambda dx, dy: lattice.goal_index([x + dx, y + dy])  # noqa: E731
    for dx in (-2, 2):
        assert h2[at(dx, 0)] == 1.0 and h6[at(3 * dx, 0)] == 1.0
    for dy in (-3, -2, -1, 1, 2, 3):
        assert h2[at(0, dy)] == 0.0 and h6[at(0, dy)] == 0.0
    assert h6.sum() > h2.sum() > 1
