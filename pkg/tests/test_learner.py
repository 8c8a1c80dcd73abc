import json

import numpy as np
import pytest

from cae.approx import AccessFn
from cae.envs import GridEnv, make_env
from cae.learner import TrainConfig, TrainingDiverged, behavior_rollout, build_fn, train
from cae.oracle import MdpSpec, compute_c_star
from cae.policy import uniform_policy

QUICK = dict(backend="tabular", n_explore=5, n_episodes=6, n_train=3, batch_size=16, lr=1.0, h_max=5)


def test_config_validation():
    for bad in (dict(variant="Z"), dict(n_train=0), dict(batch_size=0), dict(epsilon=1.5), dict(gamma=-0.1),
                dict(variant="Q", gamma=1.0), dict(relabel="nearest"), dict(optimizer="lbfgs"), dict(lr=0.0),
                dict(epsilon_schedule="cosine"), dict(loss="hinge")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_schedules():
    cfg = TrainConfig(epsilon=0.5, epsilon_schedule="inverse", epsilon_scale=1000.0, lr=1e-3, lr_decay_at=2000)
    assert cfg.epsilon_at(0) == 0.5 and cfg.epsilon_at(1000) == 0.25
    assert cfg.lr_at(1999) == 1e-3 and cfg.lr_at(2000) == pytest.approx(1e-4)
    assert TrainConfig(variant="Q").loss_name == "squared" and TrainConfig().loss_name == "bce"


@pytest.mark.parametrize("variant", ["C", "A", "D", "Q"])
def test_train_is_deterministic(tmp_path, line, variant):
    cfg = TrainConfig(variant=variant, gamma=0.8, gamma_grid=(0.0, 0.5, 0.9, 1.0), seed=11, **QUICK)
    fn1, rep1 = train(line, cfg, checkpoint_path=tmp_path / "a.json", metrics_path=tmp_path / "a.jsonl")
    fn2, rep2 = train(line, cfg, checkpoint_path=tmp_path / "b.json", metrics_path=tmp_path / "b.jsonl")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.jsonl").read_text() == (tmp_path / "b.jsonl").read_text()
    assert len(rep1.records) == cfg.n_episodes
    assert rep1.batches == cfg.n_episodes * cfg.n_train
    lines = (tmp_path / "a.jsonl").read_text().splitlines()
    assert [json.loads(x)["episode"] for x in lines] == list(range(cfg.n_episodes))


def test_mlp_deterministic(tmp_path, lake):
    cfg = TrainConfig(backend="mlp", hidden=(8, 8), n_explore=2, n_episodes=3, n_train=2, batch_size=8,
                      optimizer="adam", relabel="reachability", clip=True, seed=3)
    train(lake, cfg, checkpoint_path=tmp_path / "a.json")
    train(lake, cfg, checkpoint_path=tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_zero_episodes_keeps_init(line):
    cfg = TrainConfig(variant="C", seed=4, **dict(QUICK, n_episodes=0))
    fn, rep = train(line, cfg)
    fresh = build_fn(line, cfg, np.random.default_rng(0))
    assert rep.records == [] and rep.batches == 0 and fn.step == 0
    assert all(np.array_equal(a, b) for a, b in zip(fn.params, fresh.params))
    assert len(rep.buffer) == cfg.n_explore


def test_offline_replay_uses_given_episodes(lake):
    rng = np.random.default_rng(0)
    eps = [behavior_rollout(lake, uniform_policy(4), lake.sample_goal(rng), rng, stop_at_goal=False, index=i)
           for i in range(4)]
    cfg = TrainConfig(seed=0, **dict(QUICK, n_episodes=3))
    _, rep = train(lake, cfg, replay_episodes=eps)
    assert rep.buffer.episodes == eps
    assert all(r["success"] is None for r in rep.records) and rep.batches == 9


def test_divergence_guard(lake):
    cfg = TrainConfig(backend="mlp", hidden=(4,), n_explore=2, n_episodes=5, n_train=5, batch_size=8,
                      lr=1e300, seed=0)
    with pytest.raises(TrainingDiverged):
        train(lake, cfg)


def test_exploration_episodes_are_uniform(lake):
    cfg = TrainConfig(seed=2, **dict(QUICK, n_explore=30, n_episodes=0))
    _, rep = train(lake, cfg)
    actions = np.concatenate([e.actions for e in rep.buffer.episodes])
    counts = np.bincount(actions, minlength=4)
    assert counts.min() > 0.8 * counts.mean()


def test_learned_c_in_unit_interval_and_near_monotone(line):
    cfg = TrainConfig(backend="tabular", n_explore=20, n_episodes=100, n_train=20, batch_size=64, optimizer="adam", lr=0.1,
                      h_max=5, seed=0)
    fn, _ = train(line, cfg)
    oracle = compute_c_star(MdpSpec.from_env(line), 5)
    idx = np.array(list(np.ndindex(3, 3)))
    V = np.stack([fn.predict(idx[:, 0], idx[:, 1], np.full(len(idx), h)) for h in range(6)], axis=-1)
    assert ((V >= 0) & (V <= 1)).all()
    assert (np.diff(V, axis=-1) >= -0.05).all()
    assert np.abs(V - oracle.values[idx[:, 0], :, idx[:, 1], :]).max() <= 0.05


def test_learned_c_gap_on_detour_grid():
    env = GridEnv("detour", 5, 4, start=(1, 1), test_goal=(4, 3), max_episode_length=20)
    cfg = TrainConfig(backend="tabular", n_explore=20, n_episodes=300, n_train=32, batch_size=128, h_max=10,
                      kappa=0.0, optimizer="adam", lr=0.05, relabel="reachability", clip=True, seed=0)
    fn, _ = train(env, cfg)
    c = fn.predict([env.start], [env.test_goal], [5])[0]
    up, right, down, left = (env.action_names.index(a) for a in ("up", "right", "down", "left"))
    assert min(c[up], c[right]) - max(c[down], c[left]) > 0.95


def test_d_variant_mlp_samples_gamma(lake):
    cfg = TrainConfig(variant="D", backend="mlp", hidden=(8,), n_explore=2, n_episodes=2, n_train=2,
                      batch_size=8, seed=0)
    fn, _ = train(lake, cfg)
    assert isinstance(fn, AccessFn) and fn.variant == "D"
    out = fn.predict([lake.start] * 3, [lake.test_goal] * 3, [0.0, 0.37, 1.0])
    assert ((out > 0) & (out < 1)).all()


def test_dubins_quick_run():
    car = make_env("dubins-small")
    cfg = TrainConfig(backend="mlp", hidden=(16, 8), n_explore=2, n_episodes=2, n_train=2, batch_size=16,
                      relabel="reachability", seed=0)
    fn, rep = train(car, cfg)
    assert len(rep.records) == 2 and all(len(e) <= car.max_episode_length for e in rep.buffer.episodes)
