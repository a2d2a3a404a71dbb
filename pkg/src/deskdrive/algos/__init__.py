"""MARL baselines: value decomposition, centralized-critic policy gradients,
and the attention critic, plus replay and exploration plumbing."""

from __future__ import annotations

from .actor_critic import OnPolicyACLearner, coma_advantage
from .common import (
    Hyperparams,
    ReplayBuffer,
    ReplayError,
    Transition,
    categorical_sample,
    collate,
    select_action_eps_greedy,
    td_target,
)
from .maac import AttentionParams, MaacLearner, maac_attention, maac_baseline
from .train import ALGOS, ON_POLICY, VALUE_BASED, TrainingError, TrainingLog, build_learner, train
from .value import QmixMixer, ValueLearner, qmix_total, vdn_total


def critic_update(variant: str, batch, learner, rng=None) -> float:
    """Dispatch one critic update to the matching learner."""
    if variant in VALUE_BASED:
        return learner.critic_update(batch)
    if variant in ("maddpg", "coma", "centralized_ac"):
        return learner.critic_update(batch)
    if variant == "maac":
        return learner.critic_update(batch, rng)
    raise TrainingError(f"unknown critic variant {variant!r}")


def policy_update(variant: str, batch, learner, rng=None) -> float:
    """Dispatch one actor update to the matching learner."""
    if variant in ("maddpg", "coma", "centralized_ac"):
        return learner.policy_update(batch)
    if variant == "maac":
        return learner.policy_update(batch, rng)
    raise TrainingError(f"unknown policy variant {variant!r}")


__all__ = [
    "ALGOS",
    "ON_POLICY",
    "VALUE_BASED",
    "AttentionParams",
    "Hyperparams",
    "MaacLearner",
    "OnPolicyACLearner",
    "QmixMixer",
    "ReplayBuffer",
    "ReplayError",
    "Transition",
    "TrainingError",
    "TrainingLog",
    "ValueLearner",
    "build_learner",
    "categorical_sample",
    "collate",
    "coma_advantage",
    "critic_update",
    "maac_attention",
    "maac_baseline",
    "policy_update",
    "qmix_total",
    "select_action_eps_greedy",
    "td_target",
    "train",
    "vdn_total",
]
