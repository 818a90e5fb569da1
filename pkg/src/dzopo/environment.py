"""Grid resource-allocation environment with partial observations.

Each agent holds a local resource stock, faces a noisy sinusoidal demand,
and ships fractions of its stock to its grid neighbors each step. Shortage
is penalized quadratically; the agent observes only its own stock and demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import graph as graphs


@dataclass(frozen=True)
class EnvParams:
    rows: int = 4
    cols: int = 4
    amplitude_range: tuple = (0.5, 1.5)
    frequency_range: tuple = (0.3, 0.7)
    phase_range: tuple = (0.0, 2.0 * np.pi)
    demand_noise_std: float = 0.05
    initial_resource: float = 1.0
    horizon: int = 30
    # When True the action simplex has a self-keep slot; otherwise agents
    # ship their entire stock to neighbors every step.
    include_keep_action: bool = True
    # If set, demand parameters (A, omega, phi) are drawn from this seed
    # instead of the reset seed, so they stay fixed across episodes of a run.
    demand_param_seed: object = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.demand_noise_std < 0:
            raise ValueError("demand_noise_std must be >= 0")

    @property
    def n_agents(self) -> int:
        return self.rows * self.cols

    def grid(self) -> graphs.CommGraph:
        """Resource-flow topology: 4-neighbor lattice, row-major indexing."""
        return graphs.build_grid(self.rows, self.cols)


@dataclass
class EnvState:
    resources: np.ndarray
    time: int
    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray
    demand_now: np.ndarray  # realized d(t) for the current time index
    rng: np.random.Generator
    params: EnvParams


def _deterministic_demand(state: EnvState, t) -> np.ndarray:
    return state.amplitude * np.sin(state.frequency * t + state.phase)


def demand(state: EnvState, agent: int, t: int) -> float:
    """Demand sample for one agent: A sin(omega t + phi) plus Gaussian noise.

    Draws from the state RNG; used by tests and the per-step vector draw.
    """
    base = float(state.amplitude[agent] * np.sin(state.frequency[agent] * t + state.phase[agent]))
    if state.params.demand_noise_std > 0:
        base += float(state.rng.normal(0.0, state.params.demand_noise_std))
    return base


def _draw_demand_vector(state: EnvState, t: int) -> np.ndarray:
    d = _deterministic_demand(state, t)
    if state.params.demand_noise_std > 0:
        d = d + state.rng.normal(0.0, state.params.demand_noise_std, size=d.shape)
    return d


def observations(state: EnvState) -> np.ndarray:
    """(N, 2) array of local observations o_i = [m_i, d_i]."""
    return np.stack([state.resources, state.demand_now], axis=1)


def reset(params: EnvParams, seed) -> tuple:
    """Start an episode: full stocks, demand parameters and d(0) drawn from seed."""
    rng = np.random.default_rng(seed)
    n = params.n_agents
    param_rng = rng if params.demand_param_seed is None else np.random.default_rng(params.demand_param_seed)
    amplitude = param_rng.uniform(*params.amplitude_range, size=n)
    frequency = param_rng.uniform(*params.frequency_range, size=n)
    phase = param_rng.uniform(*params.phase_range, size=n)
    state = EnvState(
        resources=np.full(n, float(params.initial_resource)),
        time=0,
        amplitude=amplitude,
        frequency=frequency,
        phase=phase,
        demand_now=np.zeros(n),
        rng=rng,
        params=params,
    )
    state.demand_now = _draw_demand_vector(state, 0)
    return state, observations(state)


def validate_actions(params: EnvParams, transfer: np.ndarray, atol: float = 1e-9) -> None:
    """Check an N x N transfer-fraction matrix against the action contract.

    transfer[i, j] is the fraction of agent i's stock sent to j; the diagonal
    is the keep fraction. Rows must be sub-unit simplexes supported on grid
    neighbors (plus the diagonal iff keep actions are enabled).
    """
    n = params.n_agents
    if transfer.shape != (n, n):
        raise ValueError(f"expected transfer matrix of shape ({n},{n}), got {transfer.shape}")
    if np.any(transfer < -atol) or np.any(transfer > 1 + atol):
        raise ValueError("transfer fractions must lie in [0, 1]")
    if np.any(np.abs(transfer.sum(axis=1) - 1.0) > atol):
        raise ValueError("per-agent fractions must sum to 1")
    allowed = params.grid().adjacency()
    if params.include_keep_action:
        allowed = allowed | np.eye(n, dtype=bool)
    if np.any(transfer[~allowed] != 0.0):
        raise ValueError("nonzero fraction on a non-edge")


def step(state: EnvState, transfer: np.ndarray) -> tuple:
    """Advance one step under the given transfer fractions.

    All transfers are computed from the pre-step stocks simultaneously, then
    the realized demand d(t) is subtracted. Reward is 0 for a nonnegative
    post-transition stock and -m^2 for a shortage.
    """
    if state.time >= state.params.horizon:
        raise RuntimeError("episode already finished")
    validate_actions(state.params, transfer)
    m_next = transfer.T @ state.resources - state.demand_now
    rewards = np.where(m_next >= 0.0, 0.0, -np.square(m_next))
    state = replace(state, resources=m_next, time=state.time + 1)
    state.demand_now = _draw_demand_vector(state, state.time)
    return state, observations(state), rewards
