import json

import numpy as np
import pytest

from dzopo import graph as graphs
from dzopo import policy as pol


class TestFeatures:
    def test_center_hit_gives_zero(self):
        basis = pol.FeatureBasis()
        phi = pol.features(basis.centers[0], basis)
        assert phi[0] == 0.0

    def test_unit_square_distance(self):
        basis = pol.FeatureBasis(centers=np.array([[1.0, 1.0]]))
        assert pol.features(np.array([0.0, 0.0]), basis)[0] == pytest.approx(2.0)

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        basis = pol.FeatureBasis()
        for _ in range(50):
            assert np.all(pol.features(rng.normal(size=2), basis) >= 0)

    def test_scale(self):
        basis = pol.FeatureBasis(centers=np.array([[1.0, 1.0]]), scale=0.5)
        assert pol.features(np.array([0.0, 0.0]), basis)[0] == pytest.approx(1.0)

    def test_default_lattice_has_nine_centers(self):
        assert pol.FeatureBasis().n_features == 9

    def test_bad_centers_rejected(self):
        with pytest.raises(ValueError):
            pol.FeatureBasis(centers=np.array([[np.inf, 0.0]]))


class TestAct:
    def test_zero_parameters_uniform(self):
        basis = pol.FeatureBasis()
        fractions = pol.act(np.array([0.3, -0.4]), np.zeros(3 * 9), basis)
        assert np.allclose(fractions, 1 / 3, atol=1e-12)

    def test_softmax_arithmetic(self):
        # Single feature equal to 1, so scores are the raw block coefficients.
        basis = pol.FeatureBasis(centers=np.array([[0.0, 0.0]]))
        theta = np.array([np.log(3.0), 0.0])
        fractions = pol.act(np.array([1.0, 0.0]), theta, basis)
        assert np.allclose(fractions, [0.75, 0.25], atol=1e-12)

    def test_shift_invariance(self):
        basis = pol.FeatureBasis(centers=np.array([[0.0, 0.0]]))
        o = np.array([1.0, 0.0])
        a1 = pol.act(o, np.array([2.0, -1.0, 0.5]), basis)
        a2 = pol.act(o, np.array([2.0 + 7, -1.0 + 7, 0.5 + 7]), basis)
        assert np.allclose(a1, a2, atol=1e-12)

    def test_probability_vector(self):
        rng = np.random.default_rng(1)
        basis = pol.FeatureBasis()
        for _ in range(200):
            fractions = pol.act(rng.normal(size=2) * 3, rng.normal(size=4 * 9) * 5, basis)
            assert abs(fractions.sum() - 1) < 1e-9
            assert np.all(fractions >= 0)

    def test_overflow_safe(self):
        basis = pol.FeatureBasis(centers=np.array([[0.0, 0.0]]))
        fractions = pol.act(np.array([30.0, 0.0]), np.array([5.0, -5.0]), basis)
        assert np.isfinite(fractions).all()

    def test_non_finite_score_raises(self):
        basis = pol.FeatureBasis(centers=np.array([[0.0, 0.0]]))
        with pytest.raises(FloatingPointError):
            pol.act(np.array([1.0, 0.0]), np.array([np.nan, 0.0]), basis)


class TestPerturb:
    def test_zero_direction_identity(self):
        theta = np.arange(5.0)
        assert np.array_equal(pol.perturb(theta, 2.0, np.zeros(5)), theta)

    def test_basis_vector(self):
        out = pol.perturb(np.zeros(4), 1.0, np.eye(4)[0])
        assert np.array_equal(out, [1, 0, 0, 0])

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        theta, u = rng.normal(size=30), rng.normal(size=30)
        back = pol.perturb(theta, 0.3, u) - 0.3 * u
        assert np.allclose(back, theta, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            pol.perturb(np.zeros(3), 1.0, np.zeros(4))


class TestSampleDirection:
    def test_deterministic(self):
        a = pol.sample_direction([3, 5], seed=7, episode=2)
        b = pol.sample_direction([3, 5], seed=7, episode=2)
        assert np.array_equal(a, b)
        assert a.shape == (8,)

    def test_episode_changes_draw(self):
        a = pol.sample_direction([4], seed=7, episode=0)
        b = pol.sample_direction([4], seed=7, episode=1)
        assert not np.array_equal(a, b)

    def test_standard_normal_moments(self):
        u = pol.sample_direction([100_000], seed=0)
        assert abs(u.mean()) < 0.02
        assert abs(u.var() - 1.0) < 0.05

    def test_chi_square_mean(self):
        d = 10
        sq = [np.sum(pol.sample_direction([d], seed=1, episode=e) ** 2) for e in range(10_000)]
        assert abs(np.mean(sq) - d) < 0.05 * d

    def test_cross_agent_independence(self):
        draws = np.array([pol.sample_direction([1, 1], seed=3, episode=e) for e in range(10_000)])
        corr = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
        assert abs(corr) < 0.05


class TestJointPolicy:
    def setup_method(self):
        self.grid = graphs.build_grid(2, 2)
        self.policy = pol.JointPolicy(self.grid, pol.FeatureBasis())

    def test_dims_follow_degrees(self):
        # Every 2x2 grid node has 2 neighbors plus the keep slot.
        assert list(self.policy.dims) == [27, 27, 27, 27]
        assert self.policy.dim_total == 108

    def test_transfer_matrix_rows_are_simplexes(self):
        rng = np.random.default_rng(3)
        theta = rng.normal(size=self.policy.dim_total)
        obs = rng.normal(size=(4, 2))
        transfer = self.policy.transfer_matrix(self.policy.pad_theta(theta), obs)
        assert np.allclose(transfer.sum(axis=1), 1.0, atol=1e-9)
        adj = self.grid.adjacency() | np.eye(4, dtype=bool)
        assert np.all(transfer[~adj] == 0)

    def test_matches_per_agent_act(self):
        rng = np.random.default_rng(4)
        theta = rng.normal(size=self.policy.dim_total)
        obs = rng.normal(size=(4, 2))
        transfer = self.policy.transfer_matrix(self.policy.pad_theta(theta), obs)
        for i in range(4):
            fractions = pol.act(obs[i], self.policy.local_params(theta, i), self.policy.basis)
            for slot, j in enumerate(self.policy.slot_targets[i]):
                assert transfer[i, j] == pytest.approx(fractions[slot], abs=1e-12)

    def test_no_keep_slot(self):
        policy = pol.JointPolicy(self.grid, pol.FeatureBasis(), include_keep=False)
        assert list(policy.dims) == [18, 18, 18, 18]
        transfer = policy.transfer_matrix(policy.pad_theta(policy.zeros()), np.zeros((4, 2)))
        assert np.all(np.diag(transfer) == 0)

    def test_checkpoint_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        theta = rng.normal(size=self.policy.dim_total)
        path = tmp_path / "policy.json"
        pol.save_policy(path, theta, self.policy, seed=42)
        loaded, header = pol.load_policy(path)
        assert np.array_equal(loaded, theta)
        assert header["seed"] == 42
        assert header["dims"] == [27, 27, 27, 27]
        with open(path) as f:
            assert "header" in json.load(f)
