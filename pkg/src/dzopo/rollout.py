"""Episodic policy evaluation: one rollout, per-agent discounted returns."""

from __future__ import annotations

import numpy as np

from . import environment as envmod
from .policy import JointPolicy


def evaluate(
    env_params: envmod.EnvParams,
    theta: np.ndarray,
    policy: JointPolicy,
    gamma: float,
    t_max: int,
    seed,
    trace: list | None = None,
) -> np.ndarray:
    """Run one episode under the joint policy and return per-agent returns.

    The return of agent i is sum_t gamma^(t-1) r_i(t) over the t_max steps.
    Deterministic given the seed. When ``trace`` is a list, per-step rows
    (t, agent, resource, demand, reward) are appended to it.
    """
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    state, obs = envmod.reset(env_params, seed)
    padded = policy.pad_theta(theta)
    returns = np.zeros(env_params.n_agents)
    discount = 1.0
    for t in range(t_max):
        transfer = policy.transfer_matrix(padded, obs)
        state, obs, rewards = envmod.step(state, transfer)
        returns += discount * rewards
        discount *= gamma
        if trace is not None:
            for i in range(env_params.n_agents):
                trace.append((t + 1, i, float(state.resources[i]), float(state.demand_now[i]), float(rewards[i])))
    return returns
