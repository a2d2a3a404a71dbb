"""Centralized-critic policy-gradient learners.

Two on-policy variants share the machinery: a plain centralized actor-critic
(score-function gradient weighted by the joint-action Q) and the
counterfactual variant, whose critic scores every candidate action of one
robot against the fixed actions of the others.
"""

from __future__ import annotations

import numpy as np

from ..neural import (
    LINEAR,
    SOFTMAX,
    AdamState,
    MLPParams,
    accumulate_grads,
    adam_step,
    init_mlp,
    mlp_backward,
    mlp_forward,
    soft_update,
    zero_grads_like,
)
from .common import Hyperparams, Transition, categorical_sample, collate

_LOG_FLOOR = 1e-12


def coma_advantage(q_row: np.ndarray, pi: np.ndarray, a_i: int) -> float:
    """Counterfactual advantage: Q at the taken action minus the
    policy-expected Q over that robot's candidate actions."""
    q_row = np.asarray(q_row, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if q_row.shape != pi.shape:
        raise ValueError("q_row and pi must have matching lengths")
    if abs(float(pi.sum()) - 1.0) > 1e-6 or np.any(pi < 0):
        raise ValueError("pi is not a probability vector")
    return float(q_row[a_i] - float(pi @ q_row))


def onehot_rows(actions: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((len(actions), n), dtype=np.float64)
    out[np.arange(len(actions)), actions] = 1.0
    return out


def joint_action_onehot(actions: np.ndarray, n_actions: int, mask_agent: int | None = None) -> np.ndarray:
    """(B, n_agents) int actions -> (B, n_agents*n_actions) one-hot blocks;
    ``mask_agent`` zeroes that robot's block."""
    B, n_agents = actions.shape
    out = np.zeros((B, n_agents * n_actions), dtype=np.float64)
    for i in range(n_agents):
        if i == mask_agent:
            continue
        out[np.arange(B), i * n_actions + actions[:, i]] = 1.0
    return out


class OnPolicyACLearner:
    """maddpg (centralized scalar critic) or coma (counterfactual critic);
    both update from the most recent episode."""

    def __init__(self, variant: str, n_agents: int, obs_dim: int, n_actions: int, hp: Hyperparams, rng: np.random.Generator):
        if variant not in ("maddpg", "coma"):
            raise ValueError(f"unknown actor-critic variant {variant!r}")
        self.variant = variant
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hp = hp
        self.actors = [init_mlp([obs_dim, hp.hidden, hp.hidden, n_actions], SOFTMAX, rng) for _ in range(n_agents)]
        self.actor_opt = [AdamState.for_params(a) for a in self.actors]
        state_dim = obs_dim * n_agents
        if variant == "maddpg":
            critic_in = state_dim + n_agents * n_actions
            critic_out = 1
        else:
            critic_in = state_dim + n_agents * n_actions + n_agents
            critic_out = n_actions
        self.critic = init_mlp([critic_in, hp.hidden, hp.hidden, critic_out], LINEAR, rng)
        self.critic_target = self.critic.copy()
        self.critic_opt = AdamState.for_params(self.critic)

    # -- acting ---------------------------------------------------------

    def policy(self, i: int, obs: np.ndarray) -> np.ndarray:
        probs, _ = mlp_forward(self.actors[i], obs)
        return probs

    def act(self, obs: list[np.ndarray], rng: np.random.Generator) -> list[int]:
        return [categorical_sample(self.policy(i, o), rng) for i, o in enumerate(obs)]

    def greedy(self, obs: list[np.ndarray]) -> list[int]:
        return [int(np.argmax(self.policy(i, o))) for i, o in enumerate(obs)]

    # -- critic ---------------------------------------------------------

    def _coma_inputs(self, state: np.ndarray, actions: np.ndarray, agent: int) -> np.ndarray:
        B = state.shape[0]
        ident = np.zeros((B, self.n_agents), dtype=np.float64)
        ident[:, agent] = 1.0
        return np.concatenate(
            [state, joint_action_onehot(actions, self.n_actions, mask_agent=agent), ident], axis=1
        )

    def coma_q_rows(self, state: np.ndarray, actions: np.ndarray, agent: int, target: bool = False):
        net = self.critic_target if target else self.critic
        return mlp_forward(net, self._coma_inputs(state, actions, agent))

    def critic_update(self, episode: list[Transition]) -> float:
        if not episode:
            raise ValueError("empty batch")
        data = collate(episode)
        B = len(episode)
        hp = self.hp
        not_done = 1.0 - data["done"]
        reward = data["team"]
        actions = data["actions"]
        next_actions = np.vstack([actions[1:], np.zeros((1, self.n_agents), dtype=actions.dtype)])

        if self.variant == "maddpg":
            x = np.concatenate([data["state"], joint_action_onehot(actions, self.n_actions)], axis=1)
            q, cache = mlp_forward(self.critic, x)
            q = q[:, 0]
            greedy_next = np.stack(
                [np.argmax(mlp_forward(self.actors[i], data["next_obs"][:, i, :])[0], axis=1) for i in range(self.n_agents)],
                axis=1,
            )
            xn = np.concatenate([data["next_state"], joint_action_onehot(greedy_next, self.n_actions)], axis=1)
            qn, _ = mlp_forward(self.critic_target, xn)
            y = reward + hp.gamma * qn[:, 0] * not_done
            err = q - y
            loss = float(np.mean(err**2))
            grads, _ = mlp_backward(self.critic, cache, (2.0 * err / B)[:, None])
            adam_step(self.critic, grads, self.critic_opt, hp.lr)
        else:
            total = zero_grads_like(self.critic)
            loss = 0.0
            for i in range(self.n_agents):
                q_rows, cache = self.coma_q_rows(data["state"], actions, i)
                pred = q_rows[np.arange(B), actions[:, i]]
                next_rows, _ = self.coma_q_rows(data["next_state"], next_actions, i, target=True)
                boot = next_rows[np.arange(B), next_actions[:, i]]
                y = reward + hp.gamma * boot * not_done
                err = pred - y
                loss += float(np.mean(err**2))
                upstream = np.zeros_like(q_rows)
                upstream[np.arange(B), actions[:, i]] = 2.0 * err / B
                grads, _ = mlp_backward(self.critic, cache, upstream)
                total = accumulate_grads(total, grads)
            loss /= self.n_agents
            adam_step(self.critic, total, self.critic_opt, hp.lr)

        soft_update(self.critic_target, self.critic, hp.tau)
        return loss

    # -- actors ----------------------------------------------------------

    def _actor_step(self, i: int, obs_i: np.ndarray, actions_i: np.ndarray, weight: np.ndarray) -> float:
        """One score-function ascent step: maximize mean(weight * log pi(a))."""
        B = len(actions_i)
        probs, cache = mlp_forward(self.actors[i], obs_i)
        taken = np.maximum(probs[np.arange(B), actions_i], _LOG_FLOOR)
        loss = -float(np.mean(weight * np.log(taken)))
        upstream = np.zeros_like(probs)
        upstream[np.arange(B), actions_i] = -weight / (taken * B)
        grads, _ = mlp_backward(self.actors[i], cache, upstream)
        adam_step(self.actors[i], grads, self.actor_opt[i], self.hp.lr)
        return loss

    def policy_update(self, episode: list[Transition]) -> float:
        if not episode:
            raise ValueError("empty batch")
        data = collate(episode)
        B = len(episode)
        actions = data["actions"]
        losses = []
        if self.variant == "maddpg":
            x = np.concatenate([data["state"], joint_action_onehot(actions, self.n_actions)], axis=1)
            q, _ = mlp_forward(self.critic, x)
            weight = q[:, 0]
            for i in range(self.n_agents):
                losses.append(self._actor_step(i, data["obs"][:, i, :], actions[:, i], weight))
        else:
            for i in range(self.n_agents):
                q_rows, _ = self.coma_q_rows(data["state"], actions, i)
                probs, _ = mlp_forward(self.actors[i], data["obs"][:, i, :])
                expected = np.sum(probs * q_rows, axis=1)
                advantage = q_rows[np.arange(B), actions[:, i]] - expected
                losses.append(self._actor_step(i, data["obs"][:, i, :], actions[:, i], advantage))
        return float(np.mean(losses))

    def networks(self) -> dict[str, MLPParams]:
        nets = {f"actor_{i}": self.actors[i] for i in range(self.n_agents)}
        nets["critic"] = self.critic
        return nets

    def load_networks(self, nets: dict[str, MLPParams]) -> None:
        for i in range(self.n_agents):
            self.actors[i] = nets[f"actor_{i}"]
        if "critic" in nets:
            self.critic = nets["critic"]
            self.critic_target = nets["critic"].copy()
