"""Update-rule behavior: fixed points, descent, policy-gradient sign, entropy
pressure, soft target sync, and the training loop's accounting/determinism."""

import dataclasses

import numpy as np
import pytest

from deskdrive.algos import Hyperparams, Transition, train
from deskdrive.algos.actor_critic import OnPolicyACLearner
from deskdrive.algos.maac import MaacLearner
from deskdrive.algos.value import ValueLearner
from deskdrive.env import make
from deskdrive.neural import mlp_forward


def synthetic_batch(rng, n=2, d=5, size=16, done_rate=0.2):
    batch = []
    for _ in range(size):
        batch.append(
            Transition(
                obs=rng.normal(size=(n, d)),
                actions=rng.integers(0, 4, size=n),
                rewards=rng.normal(size=n) * 0.1,
                team_reward=float(rng.normal() * 0.1),
                next_obs=rng.normal(size=(n, d)),
                done=bool(rng.random() < done_rate),
            )
        )
    return batch


def flat_params(nets):
    return np.concatenate([p.flatten() for p in nets.values()])


HP = Hyperparams(episodes=10, batch=8, hidden=8, lr=0.01, gamma=0.9, tau=0.05)


class TestValueCriticUpdates:
    @pytest.mark.parametrize("variant", ["idqn", "vdn", "qmix"])
    def test_zero_network_fixed_point(self, variant):
        # Q == 0 everywhere, rewards 0 => y == Q, loss 0, parameters unchanged.
        rng = np.random.default_rng(0)
        learner = ValueLearner(variant, 2, 5, 4, HP, rng)
        for net in learner.networks().values():
            for w in net.weights:
                w[:] = 0.0
            for b in net.biases:
                b[:] = 0.0
        learner.q_targets = [q.copy() for q in learner.q_nets]
        if variant == "qmix":
            learner.mixer_target = learner.mixer.copy()
        batch = synthetic_batch(rng)
        for tr in batch:
            tr.rewards[:] = 0.0
            tr.team_reward = 0.0
        before = flat_params(learner.networks())
        loss = learner.critic_update(batch)
        assert loss == 0.0
        assert np.array_equal(flat_params(learner.networks()), before)

    @pytest.mark.parametrize("variant", ["idqn", "vdn", "qmix"])
    def test_loss_decreases_on_frozen_batch(self, variant):
        rng = np.random.default_rng(1)
        learner = ValueLearner(variant, 2, 5, 4, HP, rng)
        batch = synthetic_batch(rng, size=32)
        losses = [learner.critic_update(batch) for _ in range(50)]
        assert losses[-1] < losses[0]
        assert losses[-1] < 0.5 * losses[0] + 1e-9

    def test_tau_one_hard_copy(self):
        rng = np.random.default_rng(2)
        hp = dataclasses.replace(HP, tau=1.0)
        learner = ValueLearner("idqn", 2, 5, 4, hp, rng)
        learner.critic_update(synthetic_batch(rng))
        for q, t in zip(learner.q_nets, learner.q_targets):
            assert all(np.array_equal(a, b) for a, b in zip(q.weights, t.weights))

    def test_empty_batch_rejected(self):
        learner = ValueLearner("vdn", 2, 5, 4, HP, np.random.default_rng(0))
        with pytest.raises(ValueError):
            learner.critic_update([])


class TestOnPolicyUpdates:
    @pytest.mark.parametrize("variant", ["maddpg", "coma"])
    def test_critic_loss_decreases(self, variant):
        rng = np.random.default_rng(3)
        learner = OnPolicyACLearner(variant, 2, 5, 4, HP, rng)
        batch = synthetic_batch(rng, size=24)
        losses = [learner.critic_update(batch) for _ in range(50)]
        assert losses[-1] < losses[0]

    def test_zero_weight_leaves_actor_unchanged(self):
        rng = np.random.default_rng(4)
        learner = OnPolicyACLearner("maddpg", 2, 5, 4, HP, rng)
        # critic forced to zero -> every policy-gradient weight is zero
        for w in learner.critic.weights:
            w[:] = 0.0
        for b in learner.critic.biases:
            b[:] = 0.0
        before = [a.copy() for a in learner.actors]
        learner.policy_update(synthetic_batch(rng))
        for a, b in zip(learner.actors, before):
            assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
            assert all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))

    def test_positive_weight_raises_action_probability(self):
        rng = np.random.default_rng(5)
        learner = OnPolicyACLearner("maddpg", 2, 5, 4, HP, rng)
        # critic forced to a positive constant output
        for w in learner.critic.weights:
            w[:] = 0.0
        for b in learner.critic.biases:
            b[:] = 0.0
        learner.critic.biases[-1][:] = 1.0
        tr = synthetic_batch(rng, size=1)[0]
        tr.actions = np.array([2, 1])
        before = [learner.policy(i, tr.obs[i]).copy() for i in range(2)]
        learner.policy_update([tr])
        after = [learner.policy(i, tr.obs[i]) for i in range(2)]
        assert after[0][2] > before[0][2]
        assert after[1][1] > before[1][1]

    def test_coma_advantage_weighted_update_runs(self):
        rng = np.random.default_rng(6)
        learner = OnPolicyACLearner("coma", 3, 5, 4, HP, rng)
        batch = synthetic_batch(rng, n=3, size=12)
        c = learner.critic_update(batch)
        a = learner.policy_update(batch)
        assert np.isfinite(c) and np.isfinite(a)


class TestMaacUpdates:
    def test_critic_loss_decreases(self):
        rng = np.random.default_rng(7)
        hp = dataclasses.replace(HP, alpha_ent=0.01)
        learner = MaacLearner(2, 5, 4, hp, rng)
        batch = synthetic_batch(rng, size=16)
        upd = np.random.default_rng(8)
        losses = [learner.critic_update(batch, upd) for _ in range(60)]
        assert np.mean(losses[-10:]) < np.mean(losses[:10])

    def test_large_entropy_weight_pushes_toward_uniform(self):
        rng = np.random.default_rng(9)
        hp = dataclasses.replace(HP, alpha_ent=50.0, lr=0.02)
        learner = MaacLearner(2, 5, 4, hp, rng)
        # bias one actor strongly toward action 0
        learner.actors[0].biases[-1][:] = np.array([5.0, 0.0, 0.0, 0.0])
        batch = synthetic_batch(rng, size=16)
        obs0 = np.stack([tr.obs[0] for tr in batch])

        def mean_entropy():
            probs, _ = mlp_forward(learner.actors[0], obs0)
            p = np.maximum(probs, 1e-12)
            return float(np.mean(-np.sum(p * np.log(p), axis=1)))

        before = mean_entropy()
        upd = np.random.default_rng(10)
        for _ in range(100):
            learner.policy_update(batch, upd)
        assert mean_entropy() > before

    def test_empty_batch_rejected(self):
        learner = MaacLearner(2, 5, 4, HP, np.random.default_rng(0))
        with pytest.raises(ValueError):
            learner.critic_update([], np.random.default_rng(0))


class TestTrainLoop:
    def test_episode_accounting(self):
        env = make("lane_change")
        hp = Hyperparams(episodes=10, batch=16, hidden=8)
        log = train("idqn", env, hp, seed=1)
        assert len(log.records) == 10
        assert [r.episode for r in log.records] == list(range(10))

    def test_same_seed_identical_logs(self):
        logs = []
        for _ in range(2):
            env = make("lane_change")
            hp = Hyperparams(episodes=6, batch=16, hidden=8)
            log = train("vdn", env, hp, seed=5)
            logs.append([dataclasses.asdict(r) for r in log.records])
        assert logs[0] == logs[1]

    def test_unknown_algo(self):
        from deskdrive.algos import TrainingError

        env = make("lane_change")
        with pytest.raises(TrainingError):
            train("dqn++", env, Hyperparams(episodes=1), seed=0)

    @pytest.mark.parametrize("algo", ["qmix", "maddpg", "coma", "maac"])
    def test_all_algos_run_briefly(self, algo):
        env = make("lane_change")
        hp = Hyperparams(episodes=3, batch=8, hidden=8)
        log = train(algo, env, hp, seed=2)
        assert len(log.records) == 3
        for r in log.records:
            assert np.isfinite(r.mean_step_reward)
            assert 0.0 <= r.success_rate <= 1.0
            assert 0.0 <= r.mean_speed <= env.cfg.v_max + 1e-12

    def test_epsilon_schedule(self):
        hp = Hyperparams(episodes=1000, eps_start=1.0, eps_end=0.05, eps_decay_frac=0.6)
        assert hp.epsilon(0) == 1.0
        assert hp.epsilon(600) == pytest.approx(0.05)
        assert hp.epsilon(999) == pytest.approx(0.05)
        assert hp.epsilon(300) == pytest.approx(0.525)
