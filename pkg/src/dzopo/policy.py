"""Local softmax transfer policies over squared-distance features.

Each agent scores its outgoing slots (grid neighbors, plus a keep slot when
enabled) with a linear function of squared distances between its observation
and a fixed set of feature centers, then maps scores to transfer fractions
with a softmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .graph import CommGraph


def lattice_centers(points_per_axis: int = 3, box: float = 2.0) -> np.ndarray:
    """Uniform lattice of feature centers over [-box, box]^2."""
    axis = np.linspace(-box, box, points_per_axis)
    xx, yy = np.meshgrid(axis, axis)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


@dataclass(frozen=True)
class FeatureBasis:
    centers: np.ndarray = field(default_factory=lattice_centers)
    scale: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centers must be a (P, obs_dim) array with P >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("centers must be finite")
        object.__setattr__(self, "centers", c)

    @property
    def n_features(self) -> int:
        return self.centers.shape[0]


def features(o_i: np.ndarray, basis: FeatureBasis) -> np.ndarray:
    """Length-P vector of (scaled) squared distances to each center."""
    o_i = np.asarray(o_i, dtype=float)
    return basis.scale * np.square(basis.centers - o_i).sum(axis=1)


def softmax(z: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite policy score")
    e = np.exp(z - z.max())
    return e / e.sum()


def act(o_i: np.ndarray, theta_i: np.ndarray, basis: FeatureBasis) -> np.ndarray:
    """Transfer fractions for one agent: softmax of per-slot linear scores.

    theta_i is the flat local parameter, one length-P block per slot.
    """
    phi = features(o_i, basis)
    blocks = np.asarray(theta_i, dtype=float).reshape(-1, basis.n_features)
    return softmax(blocks @ phi)


def perturb(theta: np.ndarray, delta: float, u: np.ndarray) -> np.ndarray:
    """theta + delta * u, blockwise over the stacked joint parameter."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    if theta.shape != u.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape} vs u {u.shape}")
    return theta + delta * u


def sample_direction(dims, seed: int, episode: int = 0) -> np.ndarray:
    """Stacked standard-normal exploration direction, one block per agent.

    Each agent draws its block from its own seed substream, so sampling is
    decentralized yet reproducible.
    """
    blocks = [seeding.direction_rng(seed, episode, i).standard_normal(d) for i, d in enumerate(dims)]
    return np.concatenate(blocks) if blocks else np.zeros(0)


class JointPolicy:
    """Joint policy over all agents of a grid environment.

    Precomputes the slot layout (sorted neighbor targets plus optional keep
    slot) so that evaluating all agents at once is a few vectorized ops.
    """

    def __init__(self, flow_graph: CommGraph, basis: FeatureBasis, include_keep: bool = True):
        self.graph = flow_graph
        self.basis = basis
        self.include_keep = include_keep
        n = flow_graph.n_agents
        self.slot_targets = []  # per agent: target agent index per slot, keep last
        for i in range(n):
            targets = flow_graph.neighbors(i)
            if include_keep:
                targets = targets + [i]
            if not targets:
                raise ValueError(f"agent {i} has no action slots")
            self.slot_targets.append(targets)
        self.n_slots = np.array([len(t) for t in self.slot_targets])
        self.dims = self.n_slots * basis.n_features
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.dim_total = int(self.offsets[-1])
        # Padded (N, S_max) target/mask arrays for vectorized evaluation.
        s_max = int(self.n_slots.max())
        self._targets_pad = np.zeros((n, s_max), dtype=int)
        self._mask = np.zeros((n, s_max), dtype=bool)
        for i, targets in enumerate(self.slot_targets):
            self._targets_pad[i, : len(targets)] = targets
            self._mask[i, : len(targets)] = True
        rows = np.repeat(np.arange(n), s_max).reshape(n, s_max)
        # Flat scatter indices into the N x N transfer matrix; slot targets
        # are unique per agent, so plain assignment is safe.
        self._flat_idx = (rows[self._mask] * n + self._targets_pad[self._mask])

    def local_params(self, theta: np.ndarray, i: int) -> np.ndarray:
        return np.asarray(theta)[self.offsets[i] : self.offsets[i + 1]]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim_total)

    def pad_theta(self, theta: np.ndarray) -> np.ndarray:
        """(N, S_max, P) block view of the flat joint parameter, zero padded."""
        n = self.graph.n_agents
        p = self.basis.n_features
        padded = np.zeros((n, self._mask.shape[1], p))
        for i in range(n):
            padded[i, : self.n_slots[i]] = self.local_params(theta, i).reshape(-1, p)
        return padded

    def transfer_matrix(self, padded_theta: np.ndarray, obs: np.ndarray) -> np.ndarray:
        """N x N transfer-fraction matrix for all agents at once."""
        phi = self.basis.scale * np.square(obs[:, None, :] - self.basis.centers[None]).sum(axis=2)
        z = np.einsum("nsp,np->ns", padded_theta, phi)
        if not np.all(np.isfinite(z[self._mask])):
            raise FloatingPointError("non-finite policy score")
        z = np.where(self._mask, z, -np.inf)
        z -= z.max(axis=1, keepdims=True)
        e = np.where(self._mask, np.exp(z), 0.0)
        fractions = e / e.sum(axis=1, keepdims=True)
        n = self.graph.n_agents
        transfer = np.zeros(n * n)
        transfer[self._flat_idx] = fractions[self._mask]
        return transfer.reshape(n, n)


def save_policy(path, theta: np.ndarray, policy: JointPolicy, seed=None) -> None:
    """Checkpoint: flat parameter array plus a header with the block layout."""
    payload = {
        "header": {
            "n_agents": policy.graph.n_agents,
            "dims": [int(d) for d in policy.dims],
            "slot_targets": [list(map(int, t)) for t in policy.slot_targets],
            "include_keep": policy.include_keep,
            "centers": policy.basis.centers.tolist(),
            "feature_scale": policy.basis.scale,
            "seed": seed,
        },
        "theta": np.asarray(theta, dtype=float).tolist(),
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_policy(path) -> tuple:
    """Returns (theta, header) from a checkpoint written by save_policy."""
    with open(path) as f:
        payload = json.load(f)
    return np.asarray(payload["theta"], dtype=float), payload["header"]
