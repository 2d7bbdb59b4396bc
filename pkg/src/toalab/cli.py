"""Command-line entry point: one subcommand per experiment plus ``run``."""
from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .arrival import alias_free_half_width, auto_theta_grid
from .config import EXPERIMENTS, RunConfig, parse_config, write_manifest
from .errors import ToaError
from .experiments import (
    ExperimentReport,
    PacketSpec,
    make_packet,
    run_arrival_experiment,
    run_covariance_experiment,
    run_evolve_experiment,
    run_odd_experiment,
    run_symmetric_experiment,
    run_theta_step_experiment,
)
from .propagate import AbsorberSpec
from .repspace import SpatialGrid, ThetaGrid


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    """Header row plus rows of 17-significant-digit scientific floats."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, fmt="%.16e", delimiter=",", header=",".join(names), comments="")


def _theta_grid(cfg: RunConfig, psi) -> ThetaGrid:
    if cfg.theta_min is not None:
        m = cfg.theta_samples or int(round((cfg.theta_max - cfg.theta_min) / cfg.dtheta)) + 1
        return ThetaGrid.spanning(cfg.theta_min, cfg.theta_max, m)
    tg = auto_theta_grid(psi, target=1 - 1e-6, half_width=alias_free_half_width(psi),
                         dtheta=cfg.dtheta)
    if cfg.theta_samples:
        tg = ThetaGrid.spanning(tg.theta_min, tg.theta_max, cfg.theta_samples)
    return tg


def execute(cfg: RunConfig) -> ExperimentReport:
    """Run the configured experiment (``cfg`` must be resolved)."""
    g = SpatialGrid(n=cfg.n, x_min=cfg.x_min, dx=cfg.dx)
    spec = PacketSpec(cfg.packet, cfg.center, cfg.width, cfg.momentum, cfg.theta1, cfg.theta2)
    absorber = AbsorberSpec(cfg.x_center, cfg.half_width, cfg.v0, cfg.profile)
    th = cfg.thresholds
    exp = cfg.experiment
    if exp == "theta-step":
        return run_theta_step_experiment(cfg.theta1, cfg.theta2, cfg.radius, cfg.x_probe, grid=g,
                                         delta=cfg.delta, absorber=absorber, dt=cfg.dt,
                                         thresholds=th)
    psi = make_packet(spec, g)
    if exp == "odd":
        return run_odd_experiment(spec, absorber, _theta_grid(cfg, psi), cfg.t_total, cfg.dt,
                                  grid=g, thresholds=th)
    if exp == "symmetric":
        return run_symmetric_experiment(spec, absorber, _theta_grid(cfg, psi), cfg.t_total, cfg.dt,
                                        grid=g, thresholds=th)
    if exp == "covariance":
        return run_covariance_experiment(psi, cfg.shift, _theta_grid(cfg, psi), thresholds=th)
    if exp == "evolve":
        return run_evolve_experiment(psi, absorber, cfg.t_total, cfg.dt, thresholds=th)
    return run_arrival_experiment(psi, _theta_grid(cfg, psi), spec=spec, seed=cfg.seed,
                                  ensemble=cfg.ensemble, thresholds=th)


def format_summary(report: ExperimentReport) -> str:
    lines = [f"experiment: {report.name}"]
    for m in report.metrics:
        status = "PASS" if m.passed else "FAIL"
        lines.append(f"{status} {m.name} = {m.value:.6g} (require {m.op} {m.threshold:g}; {m.basis})")
    for k, v in report.info.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, list):
            v = "[" + ", ".join(f"{u:.6g}" for u in v) + "]"
        lines.append(f"info {k} = {v}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> int:
    """Execute a run and write CSVs, manifest and summary.  Returns the exit status."""
    cfg = cfg.resolved()
    out = Path(cfg.out)
    t0 = time.perf_counter()
    try:
        report = execute(cfg)
    except ToaError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    wall = time.perf_counter() - t0
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, cols in report.series.items():
            write_csv(out / name, cols)
        write_manifest(cfg, out / "manifest.txt", version=__version__, wall_time=wall)
        (out / "summary.txt").write_text(format_summary(report))
    except OSError as exc:
        click.echo(f"error: cannot write outputs to {out}: {exc}", err=True)
        return 2
    click.echo(format_summary(report), nl=False)
    return 0 if report.passed else 1


# -- click wiring -------------------------------------------------------------

_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="key = value configuration file"),
    click.option("--out", help="output directory"),
    click.option("--n", type=int, help="grid size (power of two)"),
    click.option("--dx", type=float, help="grid spacing"),
    click.option("--x-min", type=float, help="leftmost grid point"),
    click.option("--theta-min", type=float, help="theta axis start (auto if unset)"),
    click.option("--theta-max", type=float, help="theta axis end"),
    click.option("--theta-samples", type=int, help="theta axis sample count"),
    click.option("--v0", type=float, help="absorber strength"),
    click.option("--half-width", type=float, help="absorber half width"),
    click.option("--dt", type=float, help="time step"),
    click.option("--t-total", type=float, help="propagation time"),
    click.option("--seed", type=int, help="random seed"),
    click.option("--center", type=float, help="packet (left lobe) center"),
    click.option("--width", type=float, help="packet width sigma"),
    click.option("--momentum", type=float, help="packet mean momentum"),
    click.option("--theta1", type=float, help="theta-step lower edge"),
    click.option("--theta2", type=float, help="theta-step upper edge"),
    click.option("--set", "extra", multiple=True, metavar="KEY=VALUE",
                 help="any other configuration key"),
]


def _common(fn):
    for opt in reversed(_OPTIONS):
        fn = opt(fn)
    return fn


def _invoke(experiment: str | None, config_path, extra, **flags) -> None:
    overrides = {k: v for k, v in flags.items() if v is not None}
    for item in extra:
        if "=" not in item:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if experiment is not None:
        overrides["experiment"] = experiment
    try:
        cfg = parse_config(config_path, overrides)
    except ToaError as exc:
        raise click.UsageError(str(exc)) from None
    sys.exit(run(cfg))


@click.group()
@click.version_option(__version__, prog_name="toalab")
def main():
    """Quantum time-of-arrival laboratory."""


@main.command("run")
@click.option("--experiment", type=click.Choice(EXPERIMENTS), help="experiment selector")
@_common
def run_cmd(experiment, config_path, extra, **flags):
    """Run the experiment named in the config or by --experiment."""
    _invoke(experiment, config_path, extra, **flags)


def _experiment_command(name: str, doc: str):
    @_common
    def cmd(config_path, extra, **flags):
        _invoke(name, config_path, extra, **flags)

    cmd.__doc__ = doc
    main.command(name)(cmd)


_experiment_command("odd", "Odd packet: spectral peaks vs vanishing current and absorption.")
_experiment_command("symmetric", "Even packet under a screen: shape distortion without current.")
_experiment_command("theta-step", "Step state in theta: far fraction, tail growth, early absorption.")
_experiment_command("covariance", "Time-shift covariance under pseudoenergy and free evolution.")
_experiment_command("evolve", "Screen propagation with norm and absorption bookkeeping.")
_experiment_command("arrival", "Spectral and POVM arrival densities of a packet.")


if __name__ == "__main__":
    main()
