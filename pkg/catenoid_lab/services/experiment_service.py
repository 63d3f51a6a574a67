from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Callable, List, Optional, Tuple
import logging

import numpy as np
import sympy

from catenoid_lab.core import config as settings
from catenoid_lab.core.equations import assemble_rhs
from catenoid_lab.core.exceptions import GridTooSmallError, LabError
from catenoid_lab.core.geometry import background_coeffs
from catenoid_lab.core.reference import dalembert_reference
from catenoid_lab.core.symbol import (
    cylindrical_coefficients,
    cylindrical_verdict,
    gamma_bounds_check,
    graph_vector,
    metric_from_gradient,
)
from catenoid_lab.models.models import (
    BackgroundCoeffs,
    BackgroundKind,
    ConeRegion,
    ConvergenceMode,
    GammaField,
    ProfileName,
    RadialGrid,
    RadialState,
    Trajectory,
)
from catenoid_lab.schemas.schemas import (
    AuditCheck,
    AuditConfig,
    AuditReport,
    ConvergenceConfig,
    ConvergenceRow,
    EvolveConfig,
    PerturbationSpec,
    SweepConfig,
    SweepResult,
    SweepRow,
)
from catenoid_lab.services.diagnostics_service import DiagnosticsService
from catenoid_lab.services.solver_service import SolverService

logger = logging.getLogger(__name__)

_S = sympy.Symbol("s", real=True)
_QUADRATURE_NODES = 400


# Profiles on (1, 2)
def _bump_expr(lo, hi):
    x = (2 * _S - lo - hi) / (hi - lo)
    return sympy.exp(-1 / (1 - x ** 2))


def profile_expr(name: ProfileName) -> sympy.Expr:
    name = ProfileName(name)
    if name == ProfileName.BUMP:
        return _bump_expr(1, 2)
    if name == ProfileName.DOUBLE_BUMP:
        return _bump_expr(1, 2) * _bump_expr(sympy.Rational(6, 5), 2)
    return sympy.Integer(0)


def profile_support(name: ProfileName) -> Optional[Tuple[float, float]]:
    name = ProfileName(name)
    if name == ProfileName.BUMP:
        return 1.0, 2.0
    if name == ProfileName.DOUBLE_BUMP:
        return 1.2, 2.0
    return None


@lru_cache(maxsize=None)
def profile_function(name: ProfileName, order: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """
    Numpy evaluator of the order-th derivative, zero outside the open support.
    """
    support = profile_support(name)
    expr = sympy.diff(profile_expr(name), _S, order)
    compiled = sympy.lambdify(_S, expr, "numpy")

    def evaluate(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        if support is None:
            return out
        inside = (s > support[0]) & (s < support[1])
        if np.any(inside):
            with np.errstate(all="ignore"):
                values = np.broadcast_to(compiled(s[inside]), s[inside].shape)
            # underflowed exponentials times large polynomials at the support edge
            out[inside] = np.where(np.isfinite(values), values, 0.0)
        return out

    return evaluate


@lru_cache(maxsize=None)
def profile_norms(name: ProfileName, max_order: int) -> Tuple[float, ...]:
    """
    ||d^k profile||_{L^2(s ds)} on (1, 2) for k = 0..max_order, by Gauss-Legendre quadrature.
    """
    support = profile_support(name)
    if support is None:
        return tuple(0.0 for _ in range(max_order + 1))
    nodes, weights = np.polynomial.legendre.leggauss(_QUADRATURE_NODES)
    lo, hi = support
    s = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * weights * s
    return tuple(
        float(np.sqrt(np.sum(w * profile_function(name, k)(s) ** 2))) for k in range(max_order + 1)
    )


def kappa0(spec: PerturbationSpec) -> float:
    """
    |a| (sum_{1..N} ||f^(k)|| + sum_{0..N-1} ||g^(k)||) in L^2(s ds) on (1, 2).
    Outgoing data use g = -f'.
    """
    f_norms = profile_norms(spec.profile_f, spec.N)
    if spec.outgoing:
        g_part = sum(f_norms[1 : spec.N + 1])
    else:
        g_part = sum(profile_norms(spec.profile_g, spec.N)[: spec.N])
    return abs(spec.amplitude) * (sum(f_norms[1 : spec.N + 1]) + g_part)


def make_initial_data(spec: PerturbationSpec, grid: RadialGrid) -> Tuple[RadialState, float]:
    """
    eps = a f(r / lambda), eps_t = a lambda^-1 g(r / lambda) sampled on the grid, with kappa0.
    """
    lam = spec.lam
    if not (grid.r_min < lam and grid.r_max > 2.0 * lam + 2.0 * grid.dr):
        raise GridTooSmallError(
            f"Grid [{grid.r_min:g}, {grid.r_max:g}] does not cover [lambda, 2 lambda] = [{lam:g}, {2 * lam:g}] with margin"
        )
    s = grid.r / lam
    a = spec.amplitude
    eps = a * profile_function(spec.profile_f, 0)(s)
    if spec.outgoing:
        eps_t = -a / lam * profile_function(spec.profile_f, 1)(s)
    else:
        eps_t = a / lam * profile_function(spec.profile_g, 0)(s)
    eps[[0, -1]] = 0.0
    eps_t[[0, -1]] = 0.0
    return RadialState(t=0.0, eps=eps, eps_t=eps_t, grid=grid), kappa0(spec)


def build_grid(config: EvolveConfig) -> RadialGrid:
    return RadialGrid.from_spacing(config.resolved_r_min(), config.resolved_r_max(), config.dr)


def build_background(config: EvolveConfig) -> BackgroundCoeffs:
    return background_coeffs(build_grid(config), config.background)


# Existence window
def specs_from_config(config: SweepConfig) -> List[PerturbationSpec]:
    """
    One spec per (lambda, axis value). A kappa0 axis is converted to amplitudes through
    the unit-amplitude norm of the profile pair.
    """
    specs = []
    for lam in config.lambdas:
        base = PerturbationSpec(lam=lam, amplitude=1.0, profile_f=config.profile_f, profile_g=config.profile_g)
        if config.amplitudes is not None:
            amplitudes = list(config.amplitudes)
        else:
            unit = kappa0(base)
            targets = config.kappa0 if config.kappa0 is not None else [1e-3]
            amplitudes = [target / unit if unit > 0.0 else 0.0 for target in targets]
        specs.extend(base.model_copy(update={"amplitude": amplitude}) for amplitude in amplitudes)
    return specs


def run_sweep_job(job: Tuple[PerturbationSpec, SweepConfig]) -> SweepRow:
    """
    Single existence-window run; top level so that worker processes can import it.
    """
    spec, config = job
    evolve_config = EvolveConfig(
        background=BackgroundKind.CATENOID,
        perturbation=spec,
        dr=config.dr,
        c1=config.c1,
        record_every=config.record_every,
    )
    bg = build_background(evolve_config)
    init, k0 = make_initial_data(spec, bg.grid)
    solver = SolverService()
    traj = solver.evolve(init, bg, evolve_config)
    try:
        B1, B2, B3 = solver.diagnostics.bootstrap_norms(traj, bg, delta=config.delta, N=config.bootstrap_order)
    except LabError as exc:
        # flows past a breakdown cannot be differenced in time
        logger.warning(f"Bootstrap norms unavailable for lambda = {spec.lam:g}: {exc.detail}")
        B1 = B2 = B3 = float("nan")
    return SweepRow(
        lam=spec.lam,
        amplitude=spec.amplitude,
        kappa0=k0,
        end_time=traj.final.t,
        termination=traj.termination,
        B1=B1,
        B2=B2,
        B3=B3,
        min_slack=min(record.hyperbolicity_slack for record in traj.records),
    )


def existence_window(specs: List[PerturbationSpec], config: SweepConfig, threads: int = 1) -> SweepResult:
    """
    Evolve every spec to t = lambda - C1; rows keep the order of specs.
    """
    jobs = [(spec, config) for spec in specs]
    logger.info(f"🚀 Existence-window sweep: {len(jobs)} runs, C1 = {config.c1:g}, threads = {threads}")
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_sweep_job, jobs))
    else:
        rows = [run_sweep_job(job) for job in jobs]
    for row in rows:
        logger.info(f"lambda = {row.lam:g}, kappa0 = {row.kappa0:.3e}: {row.termination.value} at t = {row.end_time:.4g}")
    return SweepResult(rows=rows, c1=config.c1)


# Convergence studies
def _observed_orders(errors: List[float]) -> List[Optional[float]]:
    orders: List[Optional[float]] = [None]
    for coarse, fine in zip(errors, errors[1:]):
        orders.append(float(np.log2(coarse / fine)) if coarse > 0.0 and fine > 0.0 else None)
    return orders


def _gaussian(config: ConvergenceConfig) -> Callable[[np.ndarray], np.ndarray]:
    def u0(r):
        return config.amplitude * np.exp(-(((np.asarray(r) - config.center) / config.width) ** 2))

    return u0


def convergence_study(config: ConvergenceConfig) -> List[ConvergenceRow]:
    """
    dalembert: planar free wave against the half-line oracle.
    richardson: nested grids halving dr, differences of successive levels at the coarse points.
    """
    solver = SolverService()
    u0 = _gaussian(config)
    margin = 0.0

    if ConvergenceMode(config.mode) == ConvergenceMode.DALEMBERT:
        r_min = config.r_min if config.r_min is not None else 0.0
        errors, spacings = [], []
        for level in range(config.levels):
            dr = config.base_dr / 2 ** level
            grid = RadialGrid.from_spacing(r_min, config.r_max, dr)
            bg = background_coeffs(grid, BackgroundKind.PLANAR)
            eps = u0(grid.r)
            eps[[0, -1]] = 0.0
            init = RadialState(t=0.0, eps=eps, eps_t=np.zeros(grid.n), grid=grid)
            final = solver.integrate(init, bg, config.t_end, config.cfl_safety, margin)
            exact = dalembert_reference(u0, lambda r: np.zeros_like(np.asarray(r, dtype=float)), config.t_end, grid.r)
            errors.append(float(np.max(np.abs(final.eps - exact))))
            spacings.append(dr)
    else:
        r_min = config.r_min if config.r_min is not None else (
            0.0 if config.background == BackgroundKind.PLANAR else 1.0 + settings.COLLAR_OFFSET
        )
        cells = int(np.ceil((config.r_max - r_min) / config.base_dr - 1e-9))
        r_max = r_min + cells * config.base_dr
        solutions = []
        for level in range(config.levels):
            grid = RadialGrid(r_min=r_min, r_max=r_max, n=cells * 2 ** level + 1)
            bg = background_coeffs(grid, config.background)
            eps = u0(grid.r)
            eps[[0, -1]] = 0.0
            init = RadialState(t=0.0, eps=eps, eps_t=np.zeros(grid.n), grid=grid)
            final = solver.integrate(init, bg, config.t_end, config.cfl_safety, margin)
            solutions.append(final.eps[:: 2 ** level])
        errors = [float(np.max(np.abs(a - b))) for a, b in zip(solutions, solutions[1:])]
        spacings = [config.base_dr / 2 ** level for level in range(config.levels - 1)]

    rows = [
        ConvergenceRow(dr=dr, error=error, order=order)
        for dr, error, order in zip(spacings, errors, _observed_orders(errors))
    ]
    for row in rows:
        logger.info(f"dr = {row.dr:.4g}: error = {row.error:.3e}, order = {row.order}")
    return rows


# Identity audit
def _symbol_checks(rng: np.random.Generator, samples: int) -> Tuple[float, float]:
    """
    Worst relative reconstruction error of g by (T, gamma) and worst sandwich slack
    over random timelike graph gradients with |X_hat^0| <= 0.9.
    """
    worst_error = 0.0
    worst_slack = np.inf
    for _ in range(samples):
        phi_x, phi_y = rng.normal(scale=2.0, size=2)
        x0 = rng.uniform(-0.9, 0.9)
        phi_t = x0 * np.sqrt(1.0 + phi_x ** 2 + phi_y ** 2)
        symbol = metric_from_gradient(graph_vector(phi_t, phi_x, phi_y))

        xi = rng.normal(size=4)
        exact = symbol.quadratic(xi)
        error = abs(exact - symbol.completed_square(xi)) / max(float(xi @ xi), 1e-300)
        worst_error = max(worst_error, error)

        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        lower, value, upper = gamma_bounds_check(symbol, n)
        worst_slack = min(worst_slack, value - lower, upper - value)
    return worst_error, float(worst_slack)


def _determinant_check(rng: np.random.Generator, samples: int) -> Tuple[float, bool]:
    """
    M^4 [(A + C^2)(B + D^2) - (E - CD)^2] = M L^2 with L = M - psi_t^2, relative error.
    """
    psi_t = rng.uniform(-0.9, 0.9, samples)
    psi_z = rng.normal(scale=2.0, size=samples)
    p = rng.normal(scale=2.0, size=samples)
    A, B, C, D, E, M = cylindrical_coefficients(psi_t, psi_z, p)
    lhs = M ** 4 * ((A + C ** 2) * (B + D ** 2) - (E - C * D) ** 2)
    L = M - psi_t ** 2
    rhs = M * L ** 2
    return float(np.max(np.abs(lhs - rhs) / rhs)), bool(np.all(cylindrical_verdict(A, B, C, D, E)))


def _commutator_field(t, r):
    return np.sin(r - 2.0 * t) * np.exp(-((r - 10.0) ** 2) / 8.0)


def identity_audit(
    config: AuditConfig,
    trajectory: Optional[Trajectory] = None,
    bg: Optional[BackgroundCoeffs] = None,
) -> AuditReport:
    """
    Algebraic identity checks on seeded random samples, plus null-form and energy checks
    on a stored trajectory when one is given.
    """
    diagnostics = DiagnosticsService()
    rng = np.random.default_rng(config.seed)
    checks: List[AuditCheck] = []
    extras = {}

    def add(name: str, value: float, tolerance: float, passed: bool):
        checks.append(AuditCheck(name=name, value=value, tolerance=tolerance, passed=bool(passed)))

    reconstruction, sandwich = _symbol_checks(rng, config.samples)
    add("symbol_reconstruction", reconstruction, 1e-12, reconstruction < 1e-12)
    add("gamma_sandwich", sandwich, -1e-12, sandwich >= -1e-12)

    determinant, verdict = _determinant_check(rng, config.samples)
    add("cylindrical_determinant", determinant, 1e-12, determinant < 1e-12)
    add("cylindrical_positivity", float(verdict), 1.0, verdict)

    static_bg = background_coeffs(RadialGrid.from_spacing(1.0 + settings.COLLAR_OFFSET, 200.0, 0.05))
    static = float(np.max(np.abs(assemble_rhs(RadialState.zeros(static_bg.grid), static_bg))))
    add("static_residual", static, 1e-12, static < 1e-12)

    t, r = sympy.symbols("t r", positive=True)
    test_expr = sympy.sin(r - 2 * t) * sympy.exp(-(r - 10) ** 2 / 8)
    for which in GammaField:
        exact = diagnostics.symbolic_commutator(test_expr, which)
        add(f"symbolic_commutator_{which.value}", 0.0 if exact == 0 else 1.0, 0.0, exact == 0)

        residuals = [
            diagnostics.commutator_residual(_commutator_field, which, dr=0.05 / 2 ** level)
            for level in range(config.commutator_levels)
        ]
        order = float(np.log2(residuals[-2] / residuals[-1]))
        extras[f"commutator_{which.value}_residual"] = residuals[-1]
        add(f"commutator_order_{which.value}", order, 0.2, abs(order - 2.0) <= 0.2)

    if trajectory is not None:
        worst = max(max(diagnostics.nullform_residual(state)) for state in trajectory.snapshots)
        add("nullform_residual", worst, config.nullform_tolerance, worst < config.nullform_tolerance)
        if bg is not None:
            extras["log_weighted_ratio"] = max(
                diagnostics.log_weighted_ratio(state, bg) for state in trajectory.snapshots
            )
        if bg is not None and config.cone is not None:
            cone = ConeRegion(x0=config.cone.x0, R=config.cone.R)
            audit = diagnostics.energy_audit(trajectory, bg, cone)
            if audit.times:
                min_flux = float(min(audit.H))
                add("cone_flux_nonnegative", min_flux, -1e-8, min_flux >= -1e-8)
                if audit.E[0] > 0.0:
                    extras["balance_residual_ratio"] = max(audit.balance_residual) / audit.E[0]
                extras["gronwall_holds"] = float(audit.gronwall_holds)

    report = AuditReport(checks=checks, extras=extras)
    if report.passed:
        logger.info(f"✅ Identity audit passed ({len(checks)} checks)")
    else:
        logger.warning(f"⚠️ Identity audit failed: {', '.join(report.failed)}")
    return report
