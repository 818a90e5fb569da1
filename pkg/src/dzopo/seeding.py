"""Deterministic seed-splitting.

Every random draw in the package flows through a named substream derived
from a single master seed, so runs are reproducible and per-agent streams
stay independent without any shared RNG state.
"""

from __future__ import annotations

import numpy as np

# Stream tags; distinct first path element keeps streams disjoint.
DIRECTION_STREAM = 0
ENV_STREAM = 1
DEMAND_PARAM_STREAM = 2


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return a Generator for the substream identified by ``path``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))


def direction_rng(master_seed: int, episode: int, agent: int) -> np.random.Generator:
    """Per-agent, per-episode stream for exploration directions."""
    return substream(master_seed, DIRECTION_STREAM, episode, agent)


def env_seed(master_seed: int, episode: int) -> np.random.SeedSequence:
    """Seed for the environment noise of one episode."""
    return np.random.SeedSequence([int(master_seed), ENV_STREAM, int(episode)])


def demand_param_seed(master_seed: int) -> np.random.SeedSequence:
    """Seed fixing the per-agent demand parameters for a whole run."""
    return np.random.SeedSequence([int(master_seed), DEMAND_PARAM_STREAM])
