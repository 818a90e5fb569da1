"""Experiment orchestration: configs, multi-run execution, CSV/JSON output.

An experiment is n_runs independent optimizations with seeds base_seed,
base_seed+1, ...; ablation cells that share a base_seed are paired by
common random numbers. Each run writes a tidy CSV; the experiment writes a
cross-run summary CSV and a JSON manifest that fully reproduces it.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import environment as envmod
from . import rollout, seeding
from .estimators import EstimatorKind
from .optimizer import OptimizerConfig, build_topology, run
from .policy import FeatureBasis, JointPolicy, save_policy
from . import graph as graphs

RUN_CSV_COLUMNS = ["episode", "run", "estimator", "tracking", "mean_return", "consensus_error", "update_norm", "stepsize"]


class ConfigError(Exception):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "experiment"
    n_runs: int = 1
    base_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    feature_scale: float = 1.0
    env: envmod.EnvParams = field(default_factory=envmod.EnvParams)
    topology: str = "chain"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("experiment.n_runs", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiment.workers", "must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "experiment": {
                "name": self.name,
                "n_runs": self.n_runs,
                "base_seed": self.base_seed,
                "output_dir": self.output_dir,
                "workers": self.workers,
                "feature_scale": self.feature_scale,
            },
            "environment": asdict(replace(self.env, demand_param_seed=None)),
            "graph": {"topology": self.topology},
            "optimizer": {**asdict(self.optimizer), "estimator": self.optimizer.estimator.value},
        }
        d["environment"].pop("demand_param_seed")
        return d

    def spec_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _coerce(path: str, raw: str, like):
    try:
        if isinstance(like, bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if isinstance(like, int) and not isinstance(like, bool):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(float(x) for x in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(path, f"cannot parse {raw!r}: {exc}") from None


def _apply_section(path: str, defaults: dict, items: dict) -> dict:
    out = dict(defaults)
    for key, raw in items.items():
        if key not in defaults:
            raise ConfigError(f"{path}.{key}", "unknown option")
        out[key] = raw if not isinstance(raw, str) else _coerce(f"{path}.{key}", raw, defaults[key])
    return out


def spec_from_mapping(sections: dict) -> ExperimentSpec:
    """Build a spec from {section: {key: value}} with string or typed values."""
    exp_defaults = {"name": "experiment", "n_runs": 1, "base_seed": 0, "output_dir": "out", "workers": 1, "feature_scale": 1.0}
    env_defaults = {f: getattr(envmod.EnvParams(), f) for f in (
        "rows", "cols", "amplitude_range", "frequency_range", "phase_range",
        "demand_noise_std", "initial_resource", "horizon", "include_keep_action",
    )}
    opt_defaults = {
        "estimator": "residual", "tracking": False, "delta": 0.5, "alpha0": 1e-3,
        "schedule": "constant", "n_consensus": 1, "n_episodes": 100,
        "gamma": 0.75, "t_max": 30, "seed": 0, "record_rounds": False,
    }
    known = {"experiment", "environment", "graph", "optimizer"}
    for sec in sections:
        if sec not in known:
            raise ConfigError(sec, "unknown section")
    exp = _apply_section("experiment", exp_defaults, sections.get("experiment", {}))
    env = _apply_section("environment", env_defaults, sections.get("environment", {}))
    opt = _apply_section("optimizer", opt_defaults, sections.get("optimizer", {}))
    topology = sections.get("graph", {}).get("topology", "chain")
    try:
        opt["estimator"] = EstimatorKind(opt["estimator"])
    except ValueError:
        raise ConfigError("optimizer.estimator", f"unknown estimator {opt['estimator']!r}") from None
    env = dict(env, horizon=opt["t_max"])
    try:
        return ExperimentSpec(
            name=exp["name"], n_runs=exp["n_runs"], base_seed=exp["base_seed"],
            output_dir=exp["output_dir"], workers=exp["workers"], feature_scale=exp["feature_scale"],
            env=envmod.EnvParams(**env), topology=topology, optimizer=OptimizerConfig(**opt),
        )
    except ValueError as exc:
        raise ConfigError("spec", str(exc)) from None


def load_spec(path, overrides=()) -> ExperimentSpec:
    """Load a spec from an INI config or a manifest JSON, applying overrides.

    Overrides are `section.key=value` strings and take precedence over the
    file, which takes precedence over defaults.
    """
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as f:
            payload = json.load(f)
        sections = payload.get("spec", payload)
    else:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError(str(path), "cannot read config file")
        sections = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    sections = {sec: dict(items) for sec, items in sections.items()}
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(ov, "override must look like section.key=value")
        key_path, value = ov.split("=", 1)
        sec, key = key_path.split(".", 1)
        sections.setdefault(sec, {})[key] = value
    return spec_from_mapping(sections)


def _run_env_params(spec: ExperimentSpec, seed: int) -> envmod.EnvParams:
    # Demand parameters are fixed per run seed; episode noise varies.
    return replace(spec.env, demand_param_seed=seeding.demand_param_seed(seed))


def _build_run(spec: ExperimentSpec):
    env0 = spec.env
    comm = build_topology(spec.topology, env0.n_agents)
    mixing = graphs.uniform_weights(comm) if spec.topology.split()[0] == "complete" else graphs.metropolis_weights(comm)
    basis = FeatureBasis(scale=spec.feature_scale)
    policy = JointPolicy(env0.grid(), basis, include_keep=env0.include_keep_action)
    return mixing, policy


def _execute_run(spec: ExperimentSpec, run_index: int):
    seed = spec.base_seed + run_index
    mixing, policy = _build_run(spec)
    config = replace(spec.optimizer, seed=seed)
    theta, records = run(config, mixing, policy, _run_env_params(spec, seed))
    return run_index, theta, records


def _write_run_csv(path, spec: ExperimentSpec, run_index: int, records) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RUN_CSV_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.episode, run_index, spec.optimizer.estimator.value, spec.optimizer.tracking,
                repr(rec.mean_return), repr(rec.consensus_error), repr(rec.update_norm), repr(rec.stepsize),
            ])


@dataclass
class RunSummary:
    episodes: np.ndarray
    median_return: np.ndarray
    q25_return: np.ndarray
    q75_return: np.ndarray
    median_consensus_error: np.ndarray
    final_returns: np.ndarray  # per run: mean return over the last 10% of episodes
    per_run_returns: np.ndarray  # (n_runs, K) matrix of mean returns


def summarize(all_records: list) -> RunSummary:
    returns = np.array([[rec.mean_return for rec in records] for records in all_records])
    errors = np.array([[rec.consensus_error for rec in records] for records in all_records])
    k = returns.shape[1]
    tail = max(1, k // 10)
    return RunSummary(
        episodes=np.arange(k),
        median_return=np.median(returns, axis=0),
        q25_return=np.quantile(returns, 0.25, axis=0),
        q75_return=np.quantile(returns, 0.75, axis=0),
        median_consensus_error=np.median(errors, axis=0),
        final_returns=returns[:, -tail:].mean(axis=1),
        per_run_returns=returns,
    )


def run_experiment(spec: ExperimentSpec) -> RunSummary:
    """Execute all runs, write per-run CSVs, summary CSV, and a manifest."""
    out = Path(spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        raise IOError(f"output directory {out} is not writable: {exc}") from exc

    started = time.time()
    results = [None] * spec.n_runs
    if spec.workers > 1 and spec.n_runs > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for run_index, theta, records in pool.map(_execute_run, [spec] * spec.n_runs, range(spec.n_runs)):
                results[run_index] = (theta, records)
    else:
        for i in range(spec.n_runs):
            _, theta, records = _execute_run(spec, i)
            results[i] = (theta, records)

    _, policy = _build_run(spec)
    all_records = []
    for i, (theta, records) in enumerate(results):
        _write_run_csv(out / f"run_{i:03d}.csv", spec, i, records)
        save_policy(out / f"policy_{i:03d}.json", theta, policy, seed=spec.base_seed + i)
        all_records.append(records)

    summary = summarize(all_records)
    with open(out / "summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["episode", "median_return", "q25_return", "q75_return", "median_consensus_error"])
        for j in range(len(summary.episodes)):
            writer.writerow([
                int(summary.episodes[j]), repr(float(summary.median_return[j])),
                repr(float(summary.q25_return[j])), repr(float(summary.q75_return[j])),
                repr(float(summary.median_consensus_error[j])),
            ])
    manifest = {
        "spec": spec.to_dict(),
        "spec_hash": spec.spec_hash(),
        "provenance": "dzopo-0.1.0",
        "wall_clock_seconds": time.time() - started,
        "final_returns": summary.final_returns.tolist(),
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return summary


def _load_run_matrix(directory) -> np.ndarray:
    directory = Path(directory)
    paths = sorted(directory.glob("run_*.csv"))
    if not paths:
        raise ValueError(f"no run CSVs found in {directory}")
    rows = []
    for p in paths:
        with open(p, newline="") as f:
            reader = csv.DictReader(f)
            rows.append([float(r["mean_return"]) for r in reader])
    return np.array(rows)


@dataclass
class ComparisonReport:
    median_difference: np.ndarray  # per-episode median(A) - median(B)
    win_rate: float  # final-window wins of A over B across paired runs
    final_a: np.ndarray
    final_b: np.ndarray


def compare(dir_a, dir_b) -> ComparisonReport:
    """Paired comparison of two experiment outputs sharing K and n_runs."""
    a = _load_run_matrix(dir_a)
    b = _load_run_matrix(dir_b)
    if a.shape != b.shape:
        raise ValueError(f"experiments do not match: {a.shape} vs {b.shape}")
    tail = max(1, a.shape[1] // 10)
    final_a = a[:, -tail:].mean(axis=1)
    final_b = b[:, -tail:].mean(axis=1)
    wins = np.where(final_a > final_b, 1.0, np.where(final_a == final_b, 0.5, 0.0))
    return ComparisonReport(
        median_difference=np.median(a, axis=0) - np.median(b, axis=0),
        win_rate=float(wins.mean()),
        final_a=final_a,
        final_b=final_b,
    )


@dataclass
class ConstantEstimates:
    """Empirical stand-ins for the analysis constants; estimates, not bounds."""

    j_u_hat: float
    j_l_hat: float
    sigma_hat: float
    grad_norm_sq_hat: float


def estimate_constants(spec: ExperimentSpec, n_probe: int) -> ConstantEstimates:
    """Probe the environment at the initial policy.

    Returns max/min observed local returns, the largest per-agent return
    standard deviation at the unperturbed initial policy, and the mean
    squared estimator norm over probe episodes with a frozen parameter.
    """
    if n_probe < 2:
        raise ValueError(f"n_probe must be >= 2, got {n_probe}")
    mixing, policy = _build_run(spec)
    env = _run_env_params(spec, spec.base_seed)
    # Frozen-parameter probe run: stepsize 0 keeps theta at theta0 while the
    # estimator machinery (perturbation, consensus, residual) runs normally.
    probe_cfg = replace(spec.optimizer, alpha0=0.0, n_episodes=n_probe, seed=spec.base_seed)
    theta0 = policy.zeros()
    _, records = run(probe_cfg, mixing, policy, env, theta0=theta0)
    all_returns = np.array([rec.returns for rec in records])
    grad_norm_sq = float(np.mean([rec.grad_norm**2 for rec in records]))

    fixed = np.array([
        rollout.evaluate(env, theta0, policy, spec.optimizer.gamma, spec.optimizer.t_max,
                         seeding.env_seed(spec.base_seed, 10_000 + p))
        for p in range(n_probe)
    ])
    return ConstantEstimates(
        j_u_hat=float(all_returns.max()),
        j_l_hat=float(all_returns.min()),
        sigma_hat=float(fixed.std(axis=0, ddof=1).max()),
        grad_norm_sq_hat=grad_norm_sq,
    )


def dump_trace_csv(path, spec: ExperimentSpec, seed: int, theta=None) -> None:
    """Write one episode trace (t, agent, m, d, reward) under a given policy."""
    _, policy = _build_run(spec)
    theta = policy.zeros() if theta is None else np.asarray(theta, dtype=float)
    trace: list = []
    rollout.evaluate(_run_env_params(spec, seed), theta, policy, spec.optimizer.gamma,
                     spec.optimizer.t_max, seeding.env_seed(seed, 0), trace=trace)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "agent", "m", "d", "reward"])
        writer.writerows(trace)
