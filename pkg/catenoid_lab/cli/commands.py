from typing import Callable, Optional
import logging
import platform
import sys
import time

import click
import jinja2
import numpy as np
import pydantic
import scipy
import sympy
import yaml

from catenoid_lab import __version__
from catenoid_lab.core import config as settings
from catenoid_lab.core.exceptions import AuditFailedError, LabError, NumericalTerminationError
from catenoid_lab.core.geometry import envelope_constants
from catenoid_lab.models.models import ConeRegion, RunMode, TerminationReason
from catenoid_lab.schemas.schemas import EvolveConfig, Manifest, RunConfig
from catenoid_lab.services.cylindrical_service import CylindricalService
from catenoid_lab.services.experiment_service import (
    build_background,
    convergence_study,
    existence_window,
    identity_audit,
    make_initial_data,
    specs_from_config,
)
from catenoid_lab.services.picard_service import PicardService
from catenoid_lab.services.solver_service import SolverService
from catenoid_lab.storage.storage import RunRepository
from catenoid_lab.utils.file_handler import build_run_config, ensure_output_directory
from catenoid_lab.utils.plotting import render_line_plot

logger = logging.getLogger(__name__)

Pipeline = Callable[[RunConfig, RunRepository], Optional[str]]


def package_versions() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "pydantic": pydantic.VERSION,
        "click": click.__version__,
        "jinja2": jinja2.__version__,
        "pyyaml": yaml.__version__,
    }


def _argv() -> list:
    ctx = click.get_current_context(silent=True)
    if ctx is not None and isinstance(ctx.find_root().obj, dict) and "argv" in ctx.find_root().obj:
        return list(ctx.find_root().obj["argv"])
    return sys.argv[1:]


def _execute(mode: RunMode, config_path, output, overrides, threads, pipeline: Pipeline, **fields) -> None:
    """
    Resolve the configuration, run the pipeline and always leave a manifest behind.
    Errors are recorded in error.json and re-raised for exit-code mapping.
    """
    start = time.perf_counter()
    argv = _argv()
    run_config = None
    repo = None
    termination = None
    try:
        try:
            run_config = build_run_config(
                config_path, overrides, mode=mode.value, output_dir=output, threads=threads, **fields
            )
        finally:
            repo = RunRepository(ensure_output_directory(run_config.output_dir if run_config else output))
        logger.info(f"🚀 Starting {mode.value} run in {repo.run_dir} with {run_config.threads} thread(s)")
        termination = pipeline(run_config, repo)
    except LabError as exc:
        termination = getattr(exc, "termination", termination)
        if repo is not None:
            repo.write_error(exc.to_record())
        raise
    except Exception as exc:
        if repo is not None:
            repo.write_error({"success": False, "message": str(exc), "error_code": "unexpected_error", "exit_code": 1})
        raise
    finally:
        if repo is not None:
            manifest = Manifest(
                package="catenoid-lab",
                version=__version__,
                mode=mode,
                argv=argv,
                config=run_config.model_dump(mode="json", by_alias=True) if run_config else {},
                versions=package_versions(),
                threads=run_config.threads if run_config else (threads or settings.DEFAULT_THREADS),
                wall_time_seconds=time.perf_counter() - start,
                termination=termination,
            )
            repo.write_manifest(manifest)
    logger.info(f"✅ {mode.value} run finished in {time.perf_counter() - start:.2f}s")


# Pipelines
def run_evolve(run_config: RunConfig, repo: RunRepository) -> str:
    cfg = run_config.evolve
    bg = build_background(cfg)
    init, k0 = make_initial_data(cfg.perturbation, bg.grid)
    solver = SolverService()
    traj = solver.evolve(init, bg, cfg)

    repo.write_diagnostics(traj.records)
    if cfg.checkpoints:
        for index, state in enumerate(traj.snapshots):
            repo.write_checkpoint(state, bg.kind, index)

    times = [record.t for record in traj.records]
    render_line_plot(
        repo.run_dir / "plots" / "energy.svg",
        "Energy and cumulative cone flux",
        times,
        {"energy": [r.energy for r in traj.records], "flux": [r.flux_cumulative for r in traj.records]},
    )
    render_line_plot(
        repo.run_dir / "plots" / "bootstrap.svg",
        "Derivative norm sums",
        times,
        {"plain": [sum(r.plain_norms) for r in traj.records], "boosted": [sum(r.boosted_norms) for r in traj.records]},
    )
    render_line_plot(
        repo.run_dir / "plots" / "support.svg",
        "Support of the perturbation",
        times,
        {"inner": [r.support[0] for r in traj.records], "outer": [r.support[1] for r in traj.records]},
    )

    summary = {
        "termination": traj.termination.value,
        "message": traj.message,
        "end_time": traj.final.t,
        "kappa0": k0,
        "snapshots": len(traj.snapshots),
        **envelope_constants(bg),
    }
    if cfg.cone is not None:
        audit = solver.diagnostics.energy_audit(traj, bg, ConeRegion(x0=cfg.cone.x0, R=cfg.cone.R))
        repo.write_json("energy_audit.json", audit.model_dump())
    repo.write_json("summary.json", summary)

    if traj.termination != TerminationReason.COMPLETED:
        raise NumericalTerminationError(traj.termination.value, traj.final.t)
    return traj.termination.value


def run_evolve_cyl(run_config: RunConfig, repo: RunRepository) -> str:
    cfg = run_config.cylinder
    service = CylindricalService()
    traj = service.evolve_cylindrical(service.make_state(cfg), cfg)
    repo.write_csv(
        "cylinder.csv",
        ["t", "min_psi", "max_abs_w", "max_abs_w_t", "hyperbolicity_slack", "positive_definite"],
        ([float(v) for v in record.csv_values()] for record in traj.records),
    )
    render_line_plot(
        repo.run_dir / "plots" / "neck.svg",
        "Neck radius min psi",
        [record.t for record in traj.records],
        {"min psi": [record.min_psi for record in traj.records]},
    )
    if traj.termination != TerminationReason.COMPLETED and not cfg.exploratory:
        raise NumericalTerminationError(traj.termination.value, traj.final.t)
    return traj.termination.value


def run_picard(run_config: RunConfig, repo: RunRepository) -> None:
    cfg = run_config.picard
    evolve_cfg = EvolveConfig(
        background=cfg.background,
        perturbation=cfg.perturbation,
        dr=cfg.dr,
        t_end=cfg.t_end,
        r_min=cfg.r_min,
        r_max=cfg.r_max,
    )
    bg = build_background(evolve_cfg)
    init, _ = make_initial_data(cfg.perturbation, bg.grid)
    iterates, deltas = PicardService().picard_iterate(init, bg, cfg)
    direct = SolverService().integrate(init, bg, init.t + cfg.t_end, cfg.cfl_safety, cfg.hyperbolicity_margin)

    rows = []
    for k, delta in enumerate(deltas, start=1):
        ratio = delta / deltas[k - 2] if k >= 2 and deltas[k - 2] > 0.0 else float("nan")
        rows.append([k, delta, ratio])
    repo.write_csv("picard.csv", ["k", "delta", "ratio"], rows)
    repo.write_json(
        "picard_summary.json",
        {
            "k_max": cfg.k_max,
            "final_delta": deltas[-1],
            "limit_vs_evolve": float(np.max(np.abs(iterates[-1].eps - direct.eps))),
        },
    )
    return None


def run_sweep(run_config: RunConfig, repo: RunRepository) -> None:
    cfg = run_config.sweep
    result = existence_window(specs_from_config(cfg), cfg, threads=run_config.threads)
    header = ["lambda", "amplitude", "kappa0", "end_time", "termination", "B1", "B2", "B3", "min_slack"]
    repo.write_csv(
        "sweep.csv",
        header,
        (
            [row.lam, row.amplitude, row.kappa0, row.end_time, row.termination.value, row.B1, row.B2, row.B3, row.min_slack]
            for row in result.rows
        ),
    )
    completed = sum(row.termination == TerminationReason.COMPLETED for row in result.rows)
    repo.write_json(
        "sweep_summary.json",
        {"c1": result.c1, "runs": len(result.rows), "completed": completed, "rows": [r.model_dump(mode="json") for r in result.rows]},
    )
    return None


def run_audit(run_config: RunConfig, repo: RunRepository, trajectory_dir: Optional[str] = None) -> None:
    trajectory = bg = None
    if trajectory_dir:
        trajectory, bg = RunRepository(trajectory_dir).load_trajectory()
    report = identity_audit(run_config.audit, trajectory, bg)
    repo.write_json("audit.json", {"passed": report.passed, **report.model_dump(mode="json")})
    if not report.passed:
        raise AuditFailedError(report.failed)
    return None


def run_converge(run_config: RunConfig, repo: RunRepository) -> None:
    rows = convergence_study(run_config.convergence)
    repo.write_csv(
        "convergence.csv",
        ["dr", "error", "order"],
        ([row.dr, row.error, row.order if row.order is not None else ""] for row in rows),
    )
    return None


# Command surface
def common_options(func):
    func = click.option("--threads", type=click.IntRange(min=1), default=None, help="BLAS/OpenMP threads for one run, worker processes for sweeps.")(func)
    func = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config entry.")(func)
    func = click.option("--output", "-o", type=click.Path(file_okay=False), default=None, help="Run directory.")(func)
    func = click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML run config.")(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="catenoid-lab")
def cli():
    """Numerical laboratory for timelike minimal surface perturbations of the catenoid."""


@cli.command()
@common_options
def evolve(config_path, output, overrides, threads):
    """Evolve a radial perturbation of the catenoid."""
    _execute(RunMode.EVOLVE, config_path, output, overrides, threads, run_evolve)


@cli.command("evolve-cyl")
@common_options
def evolve_cyl(config_path, output, overrides, threads):
    """Evolve an axially symmetric perturbation of psi = cosh z."""
    _execute(RunMode.EVOLVE_CYL, config_path, output, overrides, threads, run_evolve_cyl)


@cli.command()
@common_options
def picard(config_path, output, overrides, threads):
    """Run the linear iteration scheme and report successive differences."""
    _execute(RunMode.PICARD, config_path, output, overrides, threads, run_picard)


@cli.command()
@common_options
def sweep(config_path, output, overrides, threads):
    """Existence-window sweep over lambda and kappa0 or amplitude."""
    _execute(RunMode.SWEEP, config_path, output, overrides, threads, run_sweep)


@cli.command()
@common_options
@click.option("--trajectory", type=click.Path(exists=True, file_okay=False), default=None, help="Stored evolve run to audit.")
def audit(config_path, output, overrides, threads, trajectory):
    """Check the structural identities, optionally on a stored trajectory."""
    _execute(
        RunMode.AUDIT,
        config_path,
        output,
        overrides,
        threads,
        lambda run_config, repo: run_audit(run_config, repo, trajectory),
    )


@cli.command()
@common_options
def converge(config_path, output, overrides, threads):
    """Grid-refinement study against the d'Alembert oracle or by self-comparison."""
    _execute(RunMode.CONVERGE, config_path, output, overrides, threads, run_converge)
