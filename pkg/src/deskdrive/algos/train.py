"""Episode-driven training harness for the six baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env import Env
from .actor_critic import OnPolicyACLearner
from .common import Hyperparams, ReplayBuffer, Transition
from .maac import MaacLearner
from .value import ValueLearner

ALGOS = ("idqn", "vdn", "qmix", "maddpg", "coma", "maac")
VALUE_BASED = ("idqn", "vdn", "qmix")
ON_POLICY = ("maddpg", "coma")


class TrainingError(RuntimeError):
    pass


@dataclass
class EpisodeRecord:
    episode: int
    mean_step_reward: float
    collision: int
    success_rate: float
    mean_speed: float
    epsilon: float
    loss_critic: float
    loss_actor: float


@dataclass
class TrainingLog:
    algo: str
    scenario: str
    seed: int
    records: list[EpisodeRecord] = field(default_factory=list)
    learner: object | None = None  # trained networks, for checkpointing


def build_learner(algo: str, env: Env, hp: Hyperparams, rng: np.random.Generator):
    n, d, a = env.n_learners, env.obs_len, env.n_actions
    if algo in VALUE_BASED:
        return ValueLearner(algo, n, d, a, hp, rng)
    if algo in ON_POLICY:
        return OnPolicyACLearner(algo, n, d, a, hp, rng)
    if algo == "maac":
        return MaacLearner(n, d, a, hp, rng)
    raise TrainingError(f"unknown algorithm {algo!r}; choose from {ALGOS}")


def run_episode(
    algo: str,
    learner,
    env: Env,
    hp: Hyperparams,
    eps: float,
    env_seed: int,
    action_rng: np.random.Generator,
    update_rng: np.random.Generator,
    replay: ReplayBuffer | None,
) -> tuple[EpisodeRecord, list[Transition]]:
    obs = env.reset(env_seed)
    transitions: list[Transition] = []
    team_rewards: list[float] = []
    speeds: list[float] = []
    critic_losses: list[float] = []
    actor_losses: list[float] = []
    collided = False
    last_info: dict = {}

    done = False
    while not done:
        if algo in VALUE_BASED:
            actions = learner.act(obs, eps, action_rng)
        else:
            actions = learner.act(obs, action_rng)
        next_obs, rewards, dones, info = env.step(actions)
        tr = Transition(
            obs=np.stack(obs),
            actions=np.asarray(actions, dtype=np.int64),
            rewards=np.array([rewards.r_total[rid] for rid in env.learner_ids]),
            team_reward=rewards.team_reward,
            next_obs=np.stack(next_obs),
            done=dones[0],
        )
        transitions.append(tr)
        team_rewards.append(rewards.team_reward)
        speeds.append(float(np.mean(list(info["speeds"].values()))))
        if info["collisions"]:
            collided = True
        if replay is not None:
            replay.push(tr)
            if len(replay) >= hp.batch:
                batch = replay.sample(hp.batch, update_rng)
                if algo == "maac":
                    critic_losses.append(learner.critic_update(batch, update_rng))
                    actor_losses.append(learner.policy_update(batch, update_rng))
                else:
                    critic_losses.append(learner.critic_update(batch))
        obs = next_obs
        done = dones[0]
        last_info = info

    if algo in ON_POLICY:
        critic_losses.append(learner.critic_update(transitions))
        actor_losses.append(learner.policy_update(transitions))

    eligible = env.cfg.success_eligible_ids()
    success = last_info.get("success", {})
    success_rate = float(np.mean([1.0 if success.get(rid, False) else 0.0 for rid in eligible])) if eligible else 0.0
    loss_critic = float(np.mean(critic_losses)) if critic_losses else 0.0
    loss_actor = float(np.mean(actor_losses)) if actor_losses else 0.0
    for name, val in (("critic", loss_critic), ("actor", loss_actor)):
        if not np.isfinite(val):
            raise TrainingError(f"nonfinite {name} loss; aborting (algo={algo})")
    record = EpisodeRecord(
        episode=0,  # filled by the caller
        mean_step_reward=float(np.mean(team_rewards)),
        collision=1 if collided else 0,
        success_rate=success_rate,
        mean_speed=float(np.mean(speeds)),
        epsilon=eps,
        loss_critic=loss_critic,
        loss_actor=loss_actor,
    )
    return record, transitions


def train(algo: str, env: Env, hp: Hyperparams, seed: int) -> TrainingLog:
    """Run hp.episodes training episodes; fully deterministic given the seed."""
    if algo not in ALGOS:
        raise TrainingError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    hp.validate()
    streams = np.random.SeedSequence(seed).spawn(3)
    init_rng = np.random.default_rng(streams[0])
    action_rng = np.random.default_rng(streams[1])
    update_rng = np.random.default_rng(streams[2])

    learner = build_learner(algo, env, hp, init_rng)
    replay = ReplayBuffer(hp.buffer_capacity) if algo not in ON_POLICY else None
    log = TrainingLog(algo=algo, scenario=env.cfg.name, seed=seed, learner=learner)
    for ep in range(hp.episodes):
        eps = hp.epsilon(ep) if algo in VALUE_BASED else 0.0
        env_seed = int(seed * 1_000_003 + ep)
        record, _ = run_episode(algo, learner, env, hp, eps, env_seed, action_rng, update_rng, replay)
        record.episode = ep
        log.records.append(record)
    return log
