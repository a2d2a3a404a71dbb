"""Attention-critic learner with per-robot critics and maximum-entropy
actor updates.

Each robot's critic encodes every robot's (observation, action) pair, scores
the other robots with a shared bilinear query/key map, and feeds the
attention-weighted transformed values into a per-robot Q head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..neural import (
    LINEAR,
    SOFTMAX,
    AdamState,
    ArrayAdam,
    MLPParams,
    adam_step,
    init_mlp,
    mlp_backward,
    mlp_forward,
    relu,
    soft_update,
    soft_update_array,
    softmax,
)
from .common import Hyperparams, Transition, categorical_sample, collate

_LOG_FLOOR = 1e-12


@dataclass
class AttentionParams:
    """Shared attention maps plus per-robot encoder and head networks."""

    W_q: np.ndarray  # (d_att, d_e)
    W_k: np.ndarray  # (d_att, d_e)
    V: np.ndarray  # (d_v, d_e)
    g: list[MLPParams] = field(default_factory=list)  # per-robot (obs+act) encoders
    f: list[MLPParams] = field(default_factory=list)  # per-robot Q heads
    nonlinearity: str = "relu"

    def copy(self) -> "AttentionParams":
        return AttentionParams(
            W_q=self.W_q.copy(),
            W_k=self.W_k.copy(),
            V=self.V.copy(),
            g=[p.copy() for p in self.g],
            f=[p.copy() for p in self.f],
            nonlinearity=self.nonlinearity,
        )


def maac_attention(e: list[np.ndarray], g_enc: list[np.ndarray], p: AttentionParams, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Attend over the other robots: weights alpha_j proportional to
    exp(e_j^T W_k^T W_q e_i) over j != i, output the alpha-weighted sum of the
    nonlinearly transformed value projections of g_enc. Returns (x_i, alpha)
    with alpha ordered by ascending j skipping i."""
    n = len(e)
    if n < 2:
        raise ValueError("attention needs at least two robots")
    if not 0 <= i < n:
        raise ValueError(f"target robot {i} out of range")
    others = [j for j in range(n) if j != i]
    query = p.W_q @ np.asarray(e[i], dtype=np.float64)
    scores = np.array([float((p.W_k @ np.asarray(e[j], dtype=np.float64)) @ query) for j in others])
    alpha = softmax(scores)
    vals = np.stack([relu(p.V @ np.asarray(g_enc[j], dtype=np.float64)) for j in others])
    x_i = alpha @ vals
    return x_i, alpha


def maac_baseline(q_over_own_actions: np.ndarray, pi: np.ndarray) -> float:
    """Policy-expected Q over one robot's own candidate actions."""
    q = np.asarray(q_over_own_actions, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if q.shape != pi.shape:
        raise ValueError("q and pi must have matching lengths")
    if abs(float(pi.sum()) - 1.0) > 1e-6 or np.any(pi < 0):
        raise ValueError("pi is not a probability vector")
    return float(pi @ q)


def batched_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(B, n_actions) rows -> one sampled index per row."""
    u = rng.random(probs.shape[0])
    cs = np.cumsum(probs, axis=1)
    return np.minimum((cs < u[:, None]).sum(axis=1), probs.shape[1] - 1)


class MaacLearner:
    def __init__(self, n_agents: int, obs_dim: int, n_actions: int, hp: Hyperparams, rng: np.random.Generator):
        if n_agents < 2:
            raise ValueError("attention critic needs at least two robots")
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hp = hp
        d = hp.hidden
        self.actors = [init_mlp([obs_dim, d, d, n_actions], SOFTMAX, rng) for _ in range(n_agents)]
        self.actor_opt = [AdamState.for_params(a) for a in self.actors]
        bound = np.sqrt(6.0 / (d + d))
        self.attn = AttentionParams(
            W_q=rng.uniform(-bound, bound, size=(d, d)),
            W_k=rng.uniform(-bound, bound, size=(d, d)),
            V=rng.uniform(-bound, bound, size=(d, d)),
            g=[init_mlp([obs_dim + n_actions, d, d], LINEAR, rng) for _ in range(n_agents)],
            f=[init_mlp([2 * d, d, 1], LINEAR, rng) for _ in range(n_agents)],
        )
        self.attn_target = self.attn.copy()
        self.g_opt = [AdamState.for_params(p) for p in self.attn.g]
        self.f_opt = [AdamState.for_params(p) for p in self.attn.f]
        self.wq_opt = ArrayAdam.for_array(self.attn.W_q)
        self.wk_opt = ArrayAdam.for_array(self.attn.W_k)
        self.v_opt = ArrayAdam.for_array(self.attn.V)

    # -- acting -----------------------------------------------------------

    def policy(self, i: int, obs: np.ndarray) -> np.ndarray:
        probs, _ = mlp_forward(self.actors[i], obs)
        return probs

    def act(self, obs: list[np.ndarray], rng: np.random.Generator) -> list[int]:
        return [categorical_sample(self.policy(i, o), rng) for i, o in enumerate(obs)]

    def greedy(self, obs: list[np.ndarray]) -> list[int]:
        return [int(np.argmax(self.policy(i, o))) for i, o in enumerate(obs)]

    # -- batched critic ----------------------------------------------------

    def _encode(self, attn: AttentionParams, obs: np.ndarray, act_onehot: np.ndarray):
        """obs (B, n, d_o), act_onehot (B, n, A) -> encodings, keys, raw/relu
        values shared by every target robot's critic."""
        encs, caches = [], []
        for j in range(self.n_agents):
            inp = np.concatenate([obs[:, j, :], act_onehot[:, j, :]], axis=1)
            enc, cache = mlp_forward(attn.g[j], inp)
            encs.append(enc)
            caches.append(cache)
        keys = [enc @ attn.W_k.T for enc in encs]
        vals_raw = [enc @ attn.V.T for enc in encs]
        vals = [relu(v) for v in vals_raw]
        return {"encs": encs, "g_caches": caches, "keys": keys, "vals_raw": vals_raw, "vals": vals}

    def critic_forward(self, attn: AttentionParams, obs: np.ndarray, act_onehot: np.ndarray):
        """Q values (B, n) for every robot under the given joint actions."""
        shared = self._encode(attn, obs, act_onehot)
        qs = np.empty((obs.shape[0], self.n_agents))
        per_agent = []
        for i in range(self.n_agents):
            others = [j for j in range(self.n_agents) if j != i]
            query = shared["encs"][i] @ attn.W_q.T  # (B, d)
            scores = np.stack([np.sum(shared["keys"][j] * query, axis=1) for j in others], axis=1)
            alpha = softmax(scores)  # (B, n-1)
            x = np.zeros_like(query)
            for c, j in enumerate(others):
                x += alpha[:, c : c + 1] * shared["vals"][j]
            u = np.concatenate([shared["encs"][i], x], axis=1)
            q, f_cache = mlp_forward(attn.f[i], u)
            qs[:, i] = q[:, 0]
            per_agent.append({"others": others, "query": query, "alpha": alpha, "x": x, "f_cache": f_cache})
        return qs, {"shared": shared, "per_agent": per_agent, "obs": obs, "act_onehot": act_onehot}

    def critic_backward(self, cache: dict, d_qs: np.ndarray):
        """Gradients of sum(d_qs * qs) for every critic parameter."""
        attn = self.attn
        shared = cache["shared"]
        n = self.n_agents
        d_encs = [np.zeros_like(e) for e in shared["encs"]]
        d_keys = [np.zeros_like(k) for k in shared["keys"]]
        d_vals = [np.zeros_like(v) for v in shared["vals"]]
        dWq = np.zeros_like(attn.W_q)
        f_grads = []
        for i in range(n):
            pa = cache["per_agent"][i]
            others = pa["others"]
            grads_f, du = mlp_backward(attn.f[i], pa["f_cache"], d_qs[:, i : i + 1])
            f_grads.append(grads_f)
            d = attn.W_q.shape[1]
            d_enc_i, dx = du[:, :d], du[:, d:]
            d_encs[i] += d_enc_i
            alpha = pa["alpha"]
            d_alpha = np.stack([np.sum(dx * shared["vals"][j], axis=1) for j in others], axis=1)
            for c, j in enumerate(others):
                d_vals[j] += alpha[:, c : c + 1] * dx
            d_scores = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
            d_query = np.zeros_like(pa["query"])
            for c, j in enumerate(others):
                d_keys[j] += d_scores[:, c : c + 1] * pa["query"]
                d_query += d_scores[:, c : c + 1] * shared["keys"][j]
            dWq += d_query.T @ shared["encs"][i]
            d_encs[i] += d_query @ attn.W_q
        dWk = np.zeros_like(attn.W_k)
        dV = np.zeros_like(attn.V)
        g_grads = []
        for j in range(n):
            dWk += d_keys[j].T @ shared["encs"][j]
            d_encs[j] += d_keys[j] @ attn.W_k
            d_val_raw = d_vals[j] * (shared["vals_raw"][j] > 0.0)
            dV += d_val_raw.T @ shared["encs"][j]
            d_encs[j] += d_val_raw @ attn.V
            grads_g, _ = mlp_backward(attn.g[j], shared["g_caches"][j], d_encs[j])
            g_grads.append(grads_g)
        return {"f": f_grads, "g": g_grads, "W_q": dWq, "W_k": dWk, "V": dV}

    def q_for_candidates(self, attn: AttentionParams, obs: np.ndarray, act_onehot: np.ndarray, agent: int) -> np.ndarray:
        """(B, n_actions): robot ``agent``'s Q for each of its own candidate
        actions with the other robots' actions fixed."""
        shared = self._encode(attn, obs, act_onehot)
        others = [j for j in range(self.n_agents) if j != agent]
        B = obs.shape[0]
        out = np.empty((B, self.n_actions))
        for a in range(self.n_actions):
            onehot = np.zeros((B, self.n_actions))
            onehot[:, a] = 1.0
            inp = np.concatenate([obs[:, agent, :], onehot], axis=1)
            enc_a, _ = mlp_forward(attn.g[agent], inp)
            query = enc_a @ attn.W_q.T
            scores = np.stack([np.sum(shared["keys"][j] * query, axis=1) for j in others], axis=1)
            alpha = softmax(scores)
            x = np.zeros_like(query)
            for c, j in enumerate(others):
                x += alpha[:, c : c + 1] * shared["vals"][j]
            q, _ = mlp_forward(attn.f[agent], np.concatenate([enc_a, x], axis=1))
            out[:, a] = q[:, 0]
        return out

    # -- updates -----------------------------------------------------------

    def _onehots(self, actions: np.ndarray) -> np.ndarray:
        B, n = actions.shape
        out = np.zeros((B, n, self.n_actions))
        b_idx = np.repeat(np.arange(B), n)
        a_idx = np.tile(np.arange(n), B)
        out[b_idx, a_idx, actions.ravel()] = 1.0
        return out

    def critic_update(self, batch: list[Transition], rng: np.random.Generator) -> float:
        if not batch:
            raise ValueError("empty batch")
        data = collate(batch)
        B = len(batch)
        hp = self.hp
        not_done = 1.0 - data["done"]

        next_actions = np.empty((B, self.n_agents), dtype=np.int64)
        next_logpi = np.empty((B, self.n_agents))
        for i in range(self.n_agents):
            probs, _ = mlp_forward(self.actors[i], data["next_obs"][:, i, :])
            next_actions[:, i] = batched_categorical(probs, rng)
            next_logpi[:, i] = np.log(np.maximum(probs[np.arange(B), next_actions[:, i]], _LOG_FLOOR))
        next_q, _ = self.critic_forward(self.attn_target, data["next_obs"], self._onehots(next_actions))

        qs, cache = self.critic_forward(self.attn, data["obs"], self._onehots(data["actions"]))
        y = data["rewards"] + hp.gamma * (next_q - hp.alpha_ent * next_logpi) * not_done[:, None]
        err = qs - y
        loss = float(np.mean(err**2))
        grads = self.critic_backward(cache, 2.0 * err / (B * self.n_agents))
        for i in range(self.n_agents):
            adam_step(self.attn.g[i], grads["g"][i], self.g_opt[i], hp.lr)
            adam_step(self.attn.f[i], grads["f"][i], self.f_opt[i], hp.lr)
        self.wq_opt.update(self.attn.W_q, grads["W_q"], hp.lr)
        self.wk_opt.update(self.attn.W_k, grads["W_k"], hp.lr)
        self.v_opt.update(self.attn.V, grads["V"], hp.lr)
        self._sync_targets(hp.tau)
        return loss

    def _sync_targets(self, tau: float) -> None:
        for i in range(self.n_agents):
            soft_update(self.attn_target.g[i], self.attn.g[i], tau)
            soft_update(self.attn_target.f[i], self.attn.f[i], tau)
        soft_update_array(self.attn_target.W_q, self.attn.W_q, tau)
        soft_update_array(self.attn_target.W_k, self.attn.W_k, tau)
        soft_update_array(self.attn_target.V, self.attn.V, tau)

    def policy_update(self, batch: list[Transition], rng: np.random.Generator) -> float:
        """Max-entropy score-function step: weight = -alpha_ent*log pi + Q - b
        at freshly sampled joint actions."""
        if not batch:
            raise ValueError("empty batch")
        data = collate(batch)
        B = len(batch)
        hp = self.hp

        probs_all = []
        sampled = np.empty((B, self.n_agents), dtype=np.int64)
        for i in range(self.n_agents):
            probs, _ = mlp_forward(self.actors[i], data["obs"][:, i, :])
            probs_all.append(probs)
            sampled[:, i] = batched_categorical(probs, rng)
        onehots = self._onehots(sampled)
        qs, _ = self.critic_forward(self.attn, data["obs"], onehots)

        losses = []
        for i in range(self.n_agents):
            q_cand = self.q_for_candidates(self.attn, data["obs"], onehots, i)
            baseline = np.sum(probs_all[i] * q_cand, axis=1)
            taken = np.maximum(probs_all[i][np.arange(B), sampled[:, i]], _LOG_FLOOR)
            weight = -hp.alpha_ent * np.log(taken) + qs[:, i] - baseline
            probs, cache = mlp_forward(self.actors[i], data["obs"][:, i, :])
            taken_now = np.maximum(probs[np.arange(B), sampled[:, i]], _LOG_FLOOR)
            loss = -float(np.mean(weight * np.log(taken_now)))
            upstream = np.zeros_like(probs)
            upstream[np.arange(B), sampled[:, i]] = -weight / (taken_now * B)
            grads, _ = mlp_backward(self.actors[i], cache, upstream)
            adam_step(self.actors[i], grads, self.actor_opt[i], hp.lr)
            losses.append(loss)
        return float(np.mean(losses))

    def networks(self) -> dict[str, MLPParams]:
        nets = {f"actor_{i}": self.actors[i] for i in range(self.n_agents)}
        for i in range(self.n_agents):
            nets[f"critic_g_{i}"] = self.attn.g[i]
            nets[f"critic_f_{i}"] = self.attn.f[i]
        return nets

    def load_networks(self, nets: dict[str, MLPParams]) -> None:
        for i in range(self.n_agents):
            self.actors[i] = nets[f"actor_{i}"]
