import copy

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfris_sagin.baselines import HybridSingleLearner
from mfris_sagin.chimera import COMBOS, ChimeraLearner, learning_reward, select_best, symlog
from mfris_sagin.config import desk_config
from mfris_sagin.experiment import make_env, run_episode
from mfris_sagin.pretrain import identity_compressors


def small_cfg(**kw):
    base = dict(environment__episode_length=6, agent__batch_size=4, agent__hidden=[8])
    base.update(kw)
    return desk_config(**base)


def test_combos_cover_every_pairing():
    assert sorted(COMBOS) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_select_best_ties_keep_first():
    assert select_best([1.0, 3.0, 3.0, 2.0]) == 1
    assert select_best([5.0, 5.0, 5.0, 5.0]) == 0
    assert select_best([-1.0, -2.0, -0.5, -0.5]) == 2


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8))
def test_select_best_is_first_argmax(vals):
    assert select_best(vals) == int(np.argmax(vals))


def test_symlog_reward():
    assert learning_reward(-(np.e - 1), "symlog") == pytest.approx(-1.0)
    assert learning_reward(3.5, "none") == 3.5
    assert symlog(0.0) == 0.0
    with pytest.raises(ValueError):
        learning_reward(1.0, "tanh")


def test_committed_candidate_is_best_probe():
    cfg = small_cfg()
    env = make_env(cfg, 0)
    learner = ChimeraLearner(env, identity_compressors(env), cfg.agent, 0)
    obs = env.reset(11)
    learner.begin_episode(obs)
    for _ in range(3):
        shadow = copy.deepcopy(learner)
        frozen = list(env.committed)
        actions = learner.act(env, obs, explore=False)
        for i, ag in enumerate(shadow.agents):
            _, _, cands = ag.propose(obs[i], explore=False)
            probes = [env.probe_reward(i, ag.to_action(c), frozen) for c in cands]
            best = int(np.argmax(probes))
            assert learner.last_choice[i] == best
            assert env.probe_reward(i, actions[i], frozen) == pytest.approx(max(probes), rel=1e-12)
        obs, *_ = env.step(actions)


def test_probing_leaves_environment_untouched():
    cfg = small_cfg()
    env = make_env(cfg, 0)
    learner = ChimeraLearner(env, identity_compressors(env), cfg.agent, 0)
    obs = env.reset(5)
    learner.begin_episode(obs)
    before = (env.t, env.battery.copy(), [c.copy() for c in env.observations()])
    learner.act(env, obs, explore=True)
    assert env.t == before[0]
    assert np.array_equal(env.battery, before[1])
    assert all(np.array_equal(a, b) for a, b in zip(env.observations(), before[2]))


def test_transitions_are_pushed_one_slot_late():
    cfg = small_cfg(environment__episode_length=3)
    env = make_env(cfg, 0)
    learner = ChimeraLearner(env, identity_compressors(env), cfg.agent, 0)
    subs = [s for ag in learner.agents for s in ag.subs]
    obs = env.reset(1)
    learner.begin_episode(obs)
    sizes = []
    done = False
    while not done:
        acts = learner.act(env, obs, True)
        sizes.append(len(subs[0].buffer))
        obs, r, _, done = env.step(acts)
        learner.observe(r, obs, done)
    # slot t stores the transition of slot t-1; the last one is closed by done
    assert sizes == [0, 1, 2]
    assert all(len(s.buffer) == 3 for s in subs)
    assert all(s.pending is None for s in subs)


def test_stored_next_input_is_next_slot_input():
    cfg = small_cfg(environment__episode_length=4)
    env = make_env(cfg, 0)
    learner = ChimeraLearner(env, identity_compressors(env), cfg.agent, 0)
    obs = env.reset(2)
    learner.begin_episode(obs)
    s = learner.agents[0].dqn[1]
    staged = []
    done = False
    while not done:
        acts = learner.act(env, obs, True)
        staged.append(s.pending[0].copy())
        obs, r, _, done = env.step(acts)
        learner.observe(r, obs, done)
    buf = s.buffer
    for t in range(len(staged) - 1):
        assert np.array_equal(buf.obs[t], staged[t])
        assert np.array_equal(buf.next_obs[t], staged[t + 1])


def test_twin_off_matches_single_hybrid_bitwise():
    cfg = small_cfg(method__twin=False, agent__batch_size=8)
    env_a, env_b = make_env(cfg, 3), make_env(cfg, 3)
    a = ChimeraLearner(env_a, identity_compressors(env_a), cfg.agent, 3, twin=False)
    b = HybridSingleLearner(env_b, cfg.agent, 3)
    for ep in range(3):
        ra = run_episode(env_a, a, 100 + ep)
        rb = run_episode(env_b, b, 100 + ep)
        assert ra == rb
    for i in range(env_a.n_agents):
        na = a.nets()[f"agent{i}"]
        nb = b.nets()[f"agent{i}"]
        for key in ("dqn", "ddpg"):
            for name, net in na[key].items():
                assert np.array_equal(net.flat(), nb[key][name].flat())


def test_twin_learner_exposes_four_subnetworks():
    cfg = small_cfg()
    env = make_env(cfg, 0)
    learner = ChimeraLearner(env, identity_compressors(env), cfg.agent, 0)
    nets = learner.nets()
    assert set(nets) == {f"agent{i}" for i in range(env.n_agents)}
    assert set(nets["agent0"]) == {"dqn_primal", "dqn_dual", "ddpg_primal", "ddpg_dual"}
    ids = [id(net) for ag in nets.values() for sub in ag.values() for net in sub.values()]
    assert len(ids) == len(set(ids))
