"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 1 runtime failure.
Output paths may be rooted via the DZOPO_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .harness import ConfigError


def _resolve_output(spec: harness.ExperimentSpec) -> harness.ExperimentSpec:
    root = os.environ.get("DZOPO_OUTPUT_ROOT")
    if root and not Path(spec.output_dir).is_absolute():
        from dataclasses import replace

        return replace(spec, output_dir=str(Path(root) / spec.output_dir))
    return spec


@click.group()
def main():
    """Distributed zeroth-order policy optimization experiments."""


@main.command("run")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True, help="Override, e.g. --set optimizer.n_consensus=4")
def run_cmd(spec_path, overrides):
    """Run an experiment from an INI config or a manifest JSON."""
    try:
        spec = _resolve_output(harness.load_spec(spec_path, overrides))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    try:
        summary = harness.run_experiment(spec)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{spec.name}: {spec.n_runs} runs -> {spec.output_dir}")
    click.echo(f"final-window returns: median {float(np.median(summary.final_returns)):.4f}")


@main.command("compare")
@click.argument("dir_a", type=click.Path(exists=True))
@click.argument("dir_b", type=click.Path(exists=True))
def compare_cmd(dir_a, dir_b):
    """Paired comparison of two experiment output directories."""
    try:
        report = harness.compare(dir_a, dir_b)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"win rate of A over B: {report.win_rate:.2f}")
    click.echo(f"final medians: A {float(np.median(report.final_a)):.4f}, B {float(np.median(report.final_b)):.4f}")
    click.echo(f"mean per-episode median difference (A-B): {float(report.median_difference.mean()):.4f}")


@main.command("verify")
def verify_cmd():
    """Run the built-in property checks of every module."""
    from . import verify

    if not verify.run_checks(echo=click.echo):
        sys.exit(1)


@main.command("estimate-constants")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--n-probe", default=100, show_default=True)
@click.option("--set", "overrides", multiple=True)
def estimate_cmd(spec_path, n_probe, overrides):
    """Empirically estimate the analysis constants at the initial policy."""
    try:
        spec = harness.load_spec(spec_path, overrides)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    est = harness.estimate_constants(spec, n_probe)
    click.echo("empirical estimates (not bounds):")
    click.echo(f"  J_u_hat = {est.j_u_hat:.6g}")
    click.echo(f"  J_l_hat = {est.j_l_hat:.6g}")
    click.echo(f"  sigma_hat = {est.sigma_hat:.6g}")
    click.echo(f"  grad_norm_sq_hat = {est.grad_norm_sq_hat:.6g}")


if __name__ == "__main__":
    main()
