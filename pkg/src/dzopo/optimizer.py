"""Distributed residual-feedback zeroth-order policy optimization.

One episode: every agent perturbs its local policy along a private Gaussian
direction, rolls out the joint perturbed policy, then estimates the global
return by consensus averaging of local returns (optionally re-initialized by
value tracking) and takes a rank-one ascent step along its own direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import environment as envmod
from . import graph as graphs
from . import rollout, seeding
from .estimators import EstimatorKind
from .policy import FeatureBasis, JointPolicy, sample_direction

CONSTANT = "constant"
DIMINISHING = "diminishing"


def stepsize(schedule: str, alpha0: float, k: int) -> float:
    """Stepsize for episode k: constant alpha0, or alpha0 / sqrt(k+1)."""
    if k < 0:
        raise ValueError(f"episode index must be >= 0, got {k}")
    if schedule == CONSTANT:
        return alpha0
    if schedule == DIMINISHING:
        return alpha0 / math.sqrt(k + 1)
    raise ValueError(f"unknown stepsize schedule {schedule!r}")


@dataclass
class ConsensusState:
    """Cross-episode state of the residual/tracking recursions."""

    mu_prev: np.ndarray  # previous episode's consensus output, 0 before episode 0
    j_prev: np.ndarray  # previous episode's local returns (tracking re-init)

    @classmethod
    def initial(cls, n_agents: int) -> "ConsensusState":
        return cls(np.zeros(n_agents), np.zeros(n_agents))


@dataclass
class EpisodeRecord:
    episode: int
    returns: np.ndarray
    mean_return: float
    mu: np.ndarray
    consensus_error: float
    update_norm: float
    grad_norm: float  # norm of the stacked estimator before the stepsize
    stepsize: float
    # Network mean of mu after each consensus round (n_consensus + 1 values,
    # including the initialization), kept when record_rounds is on.
    round_means: list = field(default_factory=list)


@dataclass(frozen=True)
class OptimizerConfig:
    estimator: EstimatorKind = EstimatorKind.RESIDUAL
    tracking: bool = False
    delta: float = 0.5
    alpha0: float = 1e-3
    schedule: str = CONSTANT
    n_consensus: int = 1
    n_episodes: int = 100
    gamma: float = 0.75
    t_max: int = 30
    seed: int = 0
    record_rounds: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.n_consensus < 0:
            raise ValueError("n_consensus must be >= 0")
        if self.estimator == EstimatorKind.TWO_POINT and self.tracking:
            raise ValueError("value tracking is not defined for the two-point estimator")


def run_episode(
    theta: np.ndarray,
    state: ConsensusState,
    config: OptimizerConfig,
    mixing: graphs.MixingMatrix,
    policy: JointPolicy,
    env_params: envmod.EnvParams,
    k: int,
) -> tuple:
    """Execute one episode and return (theta_next, state_next, record)."""
    n = mixing.n_agents
    u = sample_direction(policy.dims, config.seed, episode=k)
    u_blocks = [policy.local_params(u, i) for i in range(n)]
    ep_seed = seeding.env_seed(config.seed, k)
    j = rollout.evaluate(env_params, theta + config.delta * u, policy, config.gamma, config.t_max, ep_seed)

    if config.tracking and k > 0:
        mu = state.mu_prev + j - state.j_prev
    else:
        mu = j.copy()
    round_means = [float(mu.mean())]
    for _ in range(config.n_consensus):
        mu = graphs.consensus_round(mixing, mu)
        round_means.append(float(mu.mean()))

    alpha = stepsize(config.schedule, config.alpha0, k)
    if config.estimator == EstimatorKind.RESIDUAL:
        coeff = (mu - state.mu_prev) / config.delta
    elif config.estimator == EstimatorKind.ONE_POINT:
        coeff = mu / config.delta
    elif config.estimator == EstimatorKind.TWO_POINT:
        # Second rollout at theta - delta u with common random numbers.
        j_minus = rollout.evaluate(
            env_params, theta - config.delta * u, policy, config.gamma, config.t_max, seeding.env_seed(config.seed, k)
        )
        mu_minus = graphs.consensus_rounds(mixing, j_minus, config.n_consensus)
        coeff = (mu - mu_minus) / (2.0 * config.delta)
    else:
        raise ValueError(f"unknown estimator {config.estimator!r}")

    theta_next = theta.copy()
    grad_sq = 0.0
    for i in range(n):
        lo, hi = policy.offsets[i], policy.offsets[i + 1]
        theta_next[lo:hi] += alpha * coeff[i] * u_blocks[i]
        grad_sq += coeff[i] ** 2 * float(u_blocks[i] @ u_blocks[i])

    record = EpisodeRecord(
        episode=k,
        returns=j,
        mean_return=float(j.mean()),
        mu=mu,
        consensus_error=graphs.disagreement(mu),
        update_norm=float(np.linalg.norm(theta_next - theta)),
        grad_norm=math.sqrt(grad_sq),
        stepsize=alpha,
        round_means=round_means if config.record_rounds else [],
    )
    return theta_next, ConsensusState(mu, j), record


def run(
    config: OptimizerConfig,
    mixing: graphs.MixingMatrix,
    policy: JointPolicy,
    env_params: envmod.EnvParams,
    theta0: np.ndarray | None = None,
    checkpoint_callback=None,
) -> tuple:
    """Full optimization: n_episodes episodes from theta0 (default zeros).

    Returns (theta_final, records). Deterministic given config.seed.
    """
    theta = policy.zeros() if theta0 is None else np.asarray(theta0, dtype=float).copy()
    state = ConsensusState.initial(mixing.n_agents)
    records = []
    for k in range(config.n_episodes):
        theta, state, record = run_episode(theta, state, config, mixing, policy, env_params, k)
        records.append(record)
        if checkpoint_callback is not None:
            checkpoint_callback(k, theta)
    return theta, records


def centralized_residual_reference(
    config: OptimizerConfig,
    policy: JointPolicy,
    env_params: envmod.EnvParams,
    theta0: np.ndarray | None = None,
) -> tuple:
    """Centralized residual-feedback baseline with direct access to the
    network-average return. Used to verify that the decentralized algorithm
    with exact one-round averaging reproduces it bit for bit.
    """
    n = env_params.n_agents
    avg = np.full((n, n), 1.0 / n)  # exact-average operator, same op order as a consensus round
    theta = policy.zeros() if theta0 is None else np.asarray(theta0, dtype=float).copy()
    jbar_prev = 0.0
    trajectory = [theta.copy()]
    for k in range(config.n_episodes):
        u = sample_direction(policy.dims, config.seed, episode=k)
        j = rollout.evaluate(
            env_params, theta + config.delta * u, policy, config.gamma, config.t_max, seeding.env_seed(config.seed, k)
        )
        jbar = (avg @ j)[0]
        alpha = stepsize(config.schedule, config.alpha0, k)
        theta = theta + alpha * ((jbar - jbar_prev) / config.delta) * u
        jbar_prev = jbar
        trajectory.append(theta.copy())
    return theta, trajectory


@dataclass(frozen=True)
class ScheduleInputs:
    """Analysis constants feeding the worst-case parameter calculators."""

    epsilon: float
    epsilon_j: float
    d: int
    l0: float
    k: int
    rho_w: float
    j_u: float = 0.0
    j_l: float = 0.0
    sigma: float = 0.0
    grad_norm_sq: float = 0.0  # empirical estimate of the initial squared estimator norm

    def __post_init__(self):
        if self.epsilon <= 0 or self.epsilon_j <= 0:
            raise ValueError("epsilon and epsilon_j must be > 0")
        if not (0.0 < self.rho_w < 1.0):
            raise ValueError("rho_w must be in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def _delta_alpha(ts: ScheduleInputs) -> tuple:
    delta = ts.epsilon_j / (math.sqrt(ts.d) * ts.l0)
    alpha = ts.epsilon_j**1.5 / (4.0 * ts.d**1.5 * ts.l0**2 * math.sqrt(ts.k))
    return delta, alpha


def schedule_without_tracking(ts: ScheduleInputs) -> tuple:
    """Worst-case (delta, alpha, n_c) without value tracking.

    n_c grows with the spread of the return bounds [j_l, j_u], since every
    episode's consensus restarts from raw local returns.
    """
    if ts.j_u <= ts.j_l:
        raise ValueError("j_u must exceed j_l")
    delta, alpha = _delta_alpha(ts)
    ratio = math.sqrt(ts.epsilon) * ts.epsilon_j / (math.sqrt(2.0) * ts.d**1.5 * ts.l0 * (ts.j_u - ts.j_l))
    n_c = max(math.ceil(math.log(ratio) / math.log(ts.rho_w)), 1)
    return delta, alpha, n_c


def schedule_with_tracking(ts: ScheduleInputs) -> tuple:
    """Worst-case (delta, alpha, n_c, g_squared) with value tracking.

    n_c now depends on the evaluation noise sigma rather than on [j_l, j_u]:
    tracking carries consensus progress across episodes.
    """
    delta, alpha = _delta_alpha(ts)
    g_squared = max(
        ts.grad_norm_sq,
        2.0 * ts.epsilon_j * ts.epsilon / (ts.d * ts.k)
        + 32.0 * ts.l0**2 * (ts.d + 4) ** 2
        + 16.0 * ts.d**2 * ts.l0**2 * ts.sigma**2 / ts.epsilon_j**2,
    )
    c1 = math.log(1.0 / (2.0 * math.sqrt(2.0))) / math.log(ts.rho_w)
    denom = (
        2.0 * g_squared * ts.epsilon_j
        + 64.0 * (ts.d + 4) ** 2 * ts.d * ts.l0**2
        + 32.0 * ts.d**3 * ts.l0**2 * ts.sigma**2 / ts.epsilon_j**2
    )
    c2 = math.log(math.sqrt(ts.epsilon / denom)) / math.log(ts.rho_w)
    n_c = max(math.ceil(max(c1, c2)), 1)
    return delta, alpha, n_c, g_squared


class DistributedPolicyOptimizer(BaseEstimator):
    """Estimator-style front end for the distributed optimizer.

    fit() builds the communication graph, mixing matrix, and joint policy
    from an EnvParams, runs the optimization, and stores the learned joint
    parameter in ``theta_`` and per-episode telemetry in ``history_``.
    predict() maps a batch of local observations to transfer fractions under
    the learned policy.
    """

    def __init__(
        self,
        estimator: str = "residual",
        tracking: bool = False,
        delta: float = 0.5,
        alpha0: float = 1e-3,
        schedule: str = CONSTANT,
        n_consensus: int = 1,
        n_episodes: int = 100,
        gamma: float = 0.75,
        t_max: int = 30,
        seed: int = 0,
        topology: str = "chain",
        feature_scale: float = 1.0,
        record_rounds: bool = False,
    ):
        self.estimator = estimator
        self.tracking = tracking
        self.delta = delta
        self.alpha0 = alpha0
        self.schedule = schedule
        self.n_consensus = n_consensus
        self.n_episodes = n_episodes
        self.gamma = gamma
        self.t_max = t_max
        self.seed = seed
        self.topology = topology
        self.feature_scale = feature_scale
        self.record_rounds = record_rounds

    def _config(self) -> OptimizerConfig:
        return OptimizerConfig(
            estimator=EstimatorKind(self.estimator),
            tracking=self.tracking,
            delta=self.delta,
            alpha0=self.alpha0,
            schedule=self.schedule,
            n_consensus=self.n_consensus,
            n_episodes=self.n_episodes,
            gamma=self.gamma,
            t_max=self.t_max,
            seed=self.seed,
            record_rounds=self.record_rounds,
        )

    def fit(self, env_params: envmod.EnvParams, comm_graph: graphs.CommGraph | None = None):
        if comm_graph is None:
            comm_graph = build_topology(self.topology, env_params.n_agents)
        basis = FeatureBasis(scale=self.feature_scale)
        self.policy_ = JointPolicy(env_params.grid(), basis, include_keep=env_params.include_keep_action)
        if self.topology == "complete":
            self.mixing_ = graphs.uniform_weights(comm_graph)
        else:
            self.mixing_ = graphs.metropolis_weights(comm_graph)
        self.env_params_ = env_params
        self.theta_, self.history_ = run(self._config(), self.mixing_, self.policy_, env_params)
        return self

    def predict(self, observations: np.ndarray) -> np.ndarray:
        """Transfer-fraction matrix for a full set of local observations."""
        if not hasattr(self, "theta_"):
            raise RuntimeError("call fit() before predict()")
        obs = np.asarray(observations, dtype=float)
        return self.policy_.transfer_matrix(self.policy_.pad_theta(self.theta_), obs)


def build_topology(spec: str, n_agents: int) -> graphs.CommGraph:
    """Parse a topology spec: 'chain', 'complete', 'grid RxC', or 'edges [[i,j],...]'."""
    parts = spec.split(None, 1)
    kind = parts[0]
    if kind == "chain":
        return graphs.build_chain(n_agents)
    if kind == "complete":
        return graphs.build_complete(n_agents)
    if kind == "grid":
        rows, cols = (int(x) for x in parts[1].lower().split("x"))
        g = graphs.build_grid(rows, cols)
        if g.n_agents != n_agents:
            raise ValueError(f"grid {rows}x{cols} does not cover {n_agents} agents")
        return g
    if kind == "edges":
        import json

        return graphs.from_edge_list(n_agents, json.loads(parts[1]))
    raise ValueError(f"unknown topology {spec!r}")
