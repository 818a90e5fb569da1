"""Built-in property checks, runnable from the CLI without pytest.

Each check returns None on success and raises AssertionError on failure;
`run_checks` prints one pass/fail line per check.
"""

from __future__ import annotations

import numpy as np

from . import environment as envmod
from . import estimators, graph as graphs, rollout
from .optimizer import ConsensusState, OptimizerConfig, run_episode
from .policy import FeatureBasis, JointPolicy, act


def check_mixing_matrices():
    for g in [graphs.build_chain(16), graphs.build_grid(4, 4), graphs.build_complete(8)]:
        w = graphs.metropolis_weights(g).weights
        assert np.abs(w.sum(axis=0) - 1).max() < 1e-12
        assert np.abs(w.sum(axis=1) - 1).max() < 1e-12
        assert np.abs(w - w.T).max() < 1e-12
        assert graphs.metropolis_weights(g).rho < 1


def check_consensus_mean_preserved():
    rng = np.random.default_rng(0)
    w = graphs.metropolis_weights(graphs.build_chain(16))
    for _ in range(50):
        mu = rng.uniform(-5, 5, 16)
        assert abs(graphs.consensus_round(w, mu).mean() - mu.mean()) < 1e-12


def check_consensus_geometric_decay():
    rng = np.random.default_rng(1)
    w = graphs.metropolis_weights(graphs.build_chain(16))
    for _ in range(100):
        mu = rng.uniform(-5, 5, 16)
        for _ in range(4):
            nxt = graphs.consensus_round(w, mu)
            assert graphs.disagreement(nxt) <= w.rho * graphs.disagreement(mu) + 1e-12
            mu = nxt


def check_policy_simplex():
    rng = np.random.default_rng(2)
    basis = FeatureBasis()
    for _ in range(100):
        fractions = act(rng.normal(size=2), rng.normal(size=4 * basis.n_features), basis)
        assert abs(fractions.sum() - 1) < 1e-9 and fractions.min() >= 0


def check_env_conservation():
    params = envmod.EnvParams(rows=3, cols=3, amplitude_range=(0, 0), demand_noise_std=0.0)
    state, obs = envmod.reset(params, 3)
    policy = JointPolicy(params.grid(), FeatureBasis())
    padded = policy.pad_theta(np.random.default_rng(4).normal(size=policy.dim_total))
    for _ in range(10):
        total = state.resources.sum()
        state, obs, _ = envmod.step(state, policy.transfer_matrix(padded, obs))
        assert abs(state.resources.sum() - total) < 1e-9


def check_rollout_determinism():
    params = envmod.EnvParams()
    policy = JointPolicy(params.grid(), FeatureBasis())
    theta = np.random.default_rng(5).normal(size=policy.dim_total)
    a = rollout.evaluate(params, theta, policy, 0.75, 30, 7)
    b = rollout.evaluate(params, theta, policy, 0.75, 30, 7)
    assert np.array_equal(a, b)


def check_estimator_arithmetic():
    u = np.array([0.0, 1.0, 0.0])
    assert np.allclose(estimators.one_point(2.0, 1.0, np.array([1.0, 0, 0])), [2, 0, 0])
    assert np.allclose(estimators.two_point(1.0, -1.0, 0.5, np.array([1.0, 0, 0])), [2, 0, 0])
    assert np.allclose(estimators.residual(3.0, 1.0, 1.0, u), [0, 2, 0])


def check_tracking_mean_exact():
    params = envmod.EnvParams(demand_param_seed=0)
    policy = JointPolicy(params.grid(), FeatureBasis())
    mixing = graphs.metropolis_weights(graphs.build_chain(16))
    config = OptimizerConfig(tracking=True, n_episodes=10, record_rounds=True)
    theta = policy.zeros()
    state = ConsensusState.initial(16)
    for k in range(10):
        theta, state, rec = run_episode(theta, state, config, mixing, policy, params, k)
        for mean in rec.round_means:
            assert abs(mean - rec.mean_return) < 1e-9


ALL_CHECKS = [
    check_mixing_matrices,
    check_consensus_mean_preserved,
    check_consensus_geometric_decay,
    check_policy_simplex,
    check_env_conservation,
    check_rollout_determinism,
    check_estimator_arithmetic,
    check_tracking_mean_exact,
]


def run_checks(echo=print) -> bool:
    ok = True
    for check in ALL_CHECKS:
        try:
            check()
        except AssertionError:
            echo(f"FAIL {check.__name__}")
            ok = False
        else:
            echo(f"PASS {check.__name__}")
    return ok
