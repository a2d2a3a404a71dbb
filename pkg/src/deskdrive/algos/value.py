"""Value-based learners: independent Q-learning plus additive and monotonic
value decomposition of the team Q-value."""

from __future__ import annotations

import numpy as np

from ..neural import (
    LINEAR,
    AdamState,
    MLPParams,
    adam_step,
    init_mlp,
    mlp_backward,
    mlp_forward,
    relu,
    soft_update,
)
from .common import Hyperparams, Transition, collate, select_action_eps_greedy


def vdn_total(q_values) -> float:
    """Team Q as the exact sum of per-robot chosen Q-values."""
    q = list(q_values)
    if not q:
        raise ValueError("vdn_total needs at least one Q-value")
    return float(np.sum(q))


class QmixMixer:
    """State-conditioned one-hidden-layer mixing of per-robot Q-values.

    Hypernetworks (single-hidden-layer MLPs) produce the mixing weights from
    the joint state; weights pass through an absolute value, which makes
    d(q_total)/d(q_i) >= 0 by construction.
    """

    def __init__(self, n_agents: int, state_dim: int, rng: np.random.Generator, embed: int = 32, hyper_hidden: int = 32):
        self.n_agents = n_agents
        self.state_dim = state_dim
        self.embed = embed
        self.hyper_w1 = init_mlp([state_dim, hyper_hidden, n_agents * embed], LINEAR, rng)
        self.hyper_b1 = init_mlp([state_dim, hyper_hidden, embed], LINEAR, rng)
        self.hyper_w2 = init_mlp([state_dim, hyper_hidden, embed], LINEAR, rng)
        self.hyper_b2 = init_mlp([state_dim, hyper_hidden, 1], LINEAR, rng)

    def nets(self) -> dict[str, MLPParams]:
        return {
            "hyper_w1": self.hyper_w1,
            "hyper_b1": self.hyper_b1,
            "hyper_w2": self.hyper_w2,
            "hyper_b2": self.hyper_b2,
        }

    def copy(self) -> "QmixMixer":
        dup = QmixMixer.__new__(QmixMixer)
        dup.n_agents = self.n_agents
        dup.state_dim = self.state_dim
        dup.embed = self.embed
        dup.hyper_w1 = self.hyper_w1.copy()
        dup.hyper_b1 = self.hyper_b1.copy()
        dup.hyper_w2 = self.hyper_w2.copy()
        dup.hyper_b2 = self.hyper_b2.copy()
        return dup

    def forward(self, qs: np.ndarray, state: np.ndarray) -> tuple[np.ndarray, dict]:
        """qs: (B, n), state: (B, state_dim) -> (q_total (B,), cache)."""
        B = qs.shape[0]
        w1_raw, c_w1 = mlp_forward(self.hyper_w1, state)
        b1, c_b1 = mlp_forward(self.hyper_b1, state)
        w2_raw, c_w2 = mlp_forward(self.hyper_w2, state)
        b2, c_b2 = mlp_forward(self.hyper_b2, state)
        w1 = np.abs(w1_raw).reshape(B, self.n_agents, self.embed)
        w2 = np.abs(w2_raw)
        z = np.einsum("bn,bne->be", qs, w1) + b1
        h = relu(z)
        q_total = np.sum(h * w2, axis=1) + b2[:, 0]
        cache = {
            "qs": qs, "w1_raw": w1_raw, "w1": w1, "w2_raw": w2_raw, "w2": w2,
            "z": z, "h": h,
            "c_w1": c_w1, "c_b1": c_b1, "c_w2": c_w2, "c_b2": c_b2,
        }
        return q_total, cache

    def backward(self, cache: dict, d_qtot: np.ndarray) -> tuple[np.ndarray, dict]:
        """Gradients of sum(d_qtot * q_total) w.r.t. per-robot Qs and all
        hypernetwork parameters."""
        B = d_qtot.shape[0]
        dh = d_qtot[:, None] * cache["w2"]
        dw2 = d_qtot[:, None] * cache["h"]
        db2 = d_qtot[:, None]
        dz = dh * (cache["z"] > 0.0)
        db1 = dz
        dw1 = np.einsum("bn,be->bne", cache["qs"], dz)
        dqs = np.einsum("bne,be->bn", cache["w1"], dz)
        dw1_raw = (dw1 * np.sign(cache["w1_raw"]).reshape(B, self.n_agents, self.embed)).reshape(B, -1)
        dw2_raw = dw2 * np.sign(cache["w2_raw"])
        g_w1, _ = mlp_backward(self.hyper_w1, cache["c_w1"], dw1_raw)
        g_b1, _ = mlp_backward(self.hyper_b1, cache["c_b1"], db1)
        g_w2, _ = mlp_backward(self.hyper_w2, cache["c_w2"], dw2_raw)
        g_b2, _ = mlp_backward(self.hyper_b2, cache["c_b2"], db2)
        return dqs, {"hyper_w1": g_w1, "hyper_b1": g_b1, "hyper_w2": g_w2, "hyper_b2": g_b2}


def qmix_total(q_values, state: np.ndarray, mixer: QmixMixer) -> float:
    """Mix one sample of per-robot Q-values under the given joint state."""
    q = np.asarray(list(q_values), dtype=np.float64)
    if q.shape != (mixer.n_agents,):
        raise ValueError(f"expected {mixer.n_agents} Q-values, got {q.shape}")
    total, _ = mixer.forward(q[None, :], np.asarray(state, dtype=np.float64)[None, :])
    return float(total[0])


class ValueLearner:
    """IDQN / VDN / QMIX: per-robot Q-networks, optional mixing, target copies,
    soft target sync."""

    def __init__(self, variant: str, n_agents: int, obs_dim: int, n_actions: int, hp: Hyperparams, rng: np.random.Generator):
        if variant not in ("idqn", "vdn", "qmix"):
            raise ValueError(f"unknown value-learner variant {variant!r}")
        self.variant = variant
        self.n_agents = n_agents
        self.n_actions = n_actions
        self.hp = hp
        sizes = [obs_dim, hp.hidden, hp.hidden, n_actions]
        self.q_nets = [init_mlp(sizes, LINEAR, rng) for _ in range(n_agents)]
        self.q_targets = [q.copy() for q in self.q_nets]
        self.opt = [AdamState.for_params(q) for q in self.q_nets]
        self.mixer: QmixMixer | None = None
        if variant == "qmix":
            self.mixer = QmixMixer(n_agents, obs_dim * n_agents, rng, embed=hp.hidden, hyper_hidden=hp.hidden)
            self.mixer_target = self.mixer.copy()
            self.mixer_opt = {name: AdamState.for_params(p) for name, p in self.mixer.nets().items()}

    def act(self, obs: list[np.ndarray], eps: float, rng: np.random.Generator) -> list[int]:
        actions = []
        for i, o in enumerate(obs):
            q, _ = mlp_forward(self.q_nets[i], o)
            actions.append(select_action_eps_greedy(q, eps, rng))
        return actions

    def greedy(self, obs: list[np.ndarray]) -> list[int]:
        return self.act(obs, 0.0, _NULL_RNG)

    def critic_update(self, batch: list[Transition]) -> float:
        if not batch:
            raise ValueError("empty batch")
        data = collate(batch)
        B = len(batch)
        hp = self.hp
        not_done = 1.0 - data["done"]
        reward = data["team"]

        chosen = []
        caches = []
        for i in range(self.n_agents):
            q_all, cache = mlp_forward(self.q_nets[i], data["obs"][:, i, :])
            caches.append((q_all, cache))
            chosen.append(q_all[np.arange(B), data["actions"][:, i]])
        next_max = []
        for i in range(self.n_agents):
            nq, _ = mlp_forward(self.q_targets[i], data["next_obs"][:, i, :])
            next_max.append(nq.max(axis=1))

        if self.variant == "idqn":
            loss = 0.0
            for i in range(self.n_agents):
                y = reward + hp.gamma * next_max[i] * not_done
                err = chosen[i] - y
                loss += float(np.mean(err**2))
                self._apply_agent_grad(i, caches[i], 2.0 * err / B, data["actions"][:, i])
            loss /= self.n_agents
        else:
            qs = np.stack(chosen, axis=1)  # (B, n)
            if self.variant == "vdn":
                q_tot = qs.sum(axis=1)
                next_tot = np.sum(np.stack(next_max, axis=1), axis=1)
                y = reward + hp.gamma * next_tot * not_done
                err = q_tot - y
                loss = float(np.mean(err**2))
                d_chosen = np.repeat((2.0 * err / B)[:, None], self.n_agents, axis=1)
            else:  # qmix
                assert self.mixer is not None
                q_tot, mix_cache = self.mixer.forward(qs, data["state"])
                next_qs = np.stack(next_max, axis=1)
                next_tot, _ = self.mixer_target.forward(next_qs, data["next_state"])
                y = reward + hp.gamma * next_tot * not_done
                err = q_tot - y
                loss = float(np.mean(err**2))
                d_chosen, mixer_grads = self.mixer.backward(mix_cache, 2.0 * err / B)
                for name, params in self.mixer.nets().items():
                    adam_step(params, mixer_grads[name], self.mixer_opt[name], hp.lr)
            for i in range(self.n_agents):
                self._apply_agent_grad(i, caches[i], d_chosen[:, i], data["actions"][:, i])

        for i in range(self.n_agents):
            soft_update(self.q_targets[i], self.q_nets[i], hp.tau)
        if self.variant == "qmix":
            for name, params in self.mixer_target.nets().items():
                soft_update(params, self.mixer.nets()[name], hp.tau)
        return loss

    def _apply_agent_grad(self, i: int, fwd, d_chosen: np.ndarray, actions: np.ndarray) -> None:
        q_all, cache = fwd
        upstream = np.zeros_like(q_all)
        upstream[np.arange(len(actions)), actions] = d_chosen
        grads, _ = mlp_backward(self.q_nets[i], cache, upstream)
        adam_step(self.q_nets[i], grads, self.opt[i], self.hp.lr)

    def networks(self) -> dict[str, MLPParams]:
        nets = {f"q_{i}": self.q_nets[i] for i in range(self.n_agents)}
        if self.mixer is not None:
            for name, p in self.mixer.nets().items():
                nets[f"mixer_{name}"] = p
        return nets

    def load_networks(self, nets: dict[str, MLPParams]) -> None:
        for i in range(self.n_agents):
            self.q_nets[i] = nets[f"q_{i}"]
            self.q_targets[i] = nets[f"q_{i}"].copy()


class _NullRng:
    """Never consulted: eps = 0 never draws."""

    def random(self):  # pragma: no cover - defensive
        raise RuntimeError("greedy action selection must not consume randomness")

    def integers(self, *a, **k):  # pragma: no cover - defensive
        raise RuntimeError("greedy action selection must not consume randomness")


_NULL_RNG = _NullRng()
