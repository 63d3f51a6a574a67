from typing import Dict, List, Optional, Tuple
import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from catenoid_lab.core import config as settings
from catenoid_lab.models.models import (
    BackgroundKind,
    ConvergenceMode,
    ProfileName,
    RunMode,
    TerminationReason,
)


# Base Schemas
class BaseSchema(BaseModel):
    model_config = ConfigDict(use_enum_values=False, extra="forbid", populate_by_name=True)


# Initial data
class PerturbationSpec(BaseSchema):
    lam: float = Field(20.0, alias="lambda", gt=1.0)
    amplitude: float = 0.0
    profile_f: ProfileName = ProfileName.BUMP
    profile_g: ProfileName = ProfileName.ZERO
    N: int = Field(settings.KAPPA_ORDER, ge=1, le=16)
    outgoing: bool = False


class ConeSpec(BaseSchema):
    x0: float
    R: float = Field(..., gt=0.0)


# Run configurations
class EvolveConfig(BaseSchema):
    background: BackgroundKind = BackgroundKind.CATENOID
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
    dr: float = Field(0.05, gt=0.0)
    t_end: Optional[float] = Field(None, ge=0.0)
    c1: float = settings.EXISTENCE_C1
    r_min: Optional[float] = Field(None, ge=0.0)
    r_max: Optional[float] = None
    cfl_safety: float = Field(settings.CFL_SAFETY, gt=0.0, le=1.0)
    hyperbolicity_margin: float = Field(settings.HYPERBOLICITY_MARGIN, ge=0.0, lt=1.0)
    blowup_factor: float = Field(settings.BLOWUP_FACTOR, gt=1.0)
    record_every: int = Field(settings.RECORD_EVERY, ge=1)
    record_order: int = Field(settings.RECORD_ORDER, ge=1, le=settings.MAX_DERIVATIVE_ORDER)
    support_threshold_rel: float = Field(settings.SUPPORT_REL_THRESHOLD, gt=0.0)
    collar_threshold_rel: float = Field(settings.COLLAR_REL_THRESHOLD, gt=0.0)
    collar_buffer: float = Field(0.5, ge=0.0)
    exploratory: bool = False
    cone: Optional[ConeSpec] = None
    checkpoints: bool = True

    def resolved_t_end(self) -> float:
        if self.t_end is not None:
            return self.t_end
        return max(self.perturbation.lam - self.c1, 0.0)

    def resolved_r_min(self) -> float:
        if self.r_min is not None:
            return self.r_min
        if self.background == BackgroundKind.PLANAR:
            return 0.0
        return 1.0 + settings.COLLAR_OFFSET

    def resolved_r_max(self) -> float:
        if self.r_max is not None:
            return self.r_max
        lam = self.perturbation.lam
        return 2.0 * lam + self.resolved_t_end() + settings.OUTER_PADDING_CELLS * self.dr


class CylConfig(BaseSchema):
    z_max: float = Field(4.0, gt=0.0)
    nz: int = Field(401, ge=5)
    t_end: float = Field(10.0, ge=0.0)
    amplitude: float = 0.0
    width: float = Field(1.0, gt=0.0)
    velocity_amplitude: float = 0.0
    cfl_safety: float = Field(settings.CFL_SAFETY, gt=0.0, le=1.0)
    hyperbolicity_margin: float = Field(settings.HYPERBOLICITY_MARGIN, ge=0.0, lt=1.0)
    psi_floor: float = Field(settings.CYL_PSI_FLOOR, ge=0.0)
    record_every: int = Field(settings.RECORD_EVERY, ge=1)
    exploratory: bool = False


class PicardConfig(BaseSchema):
    background: BackgroundKind = BackgroundKind.FLAT
    perturbation: PerturbationSpec = Field(default_factory=lambda: PerturbationSpec(lam=5.0, amplitude=1e-3))
    dr: float = Field(0.05, gt=0.0)
    t_end: float = Field(0.5, gt=0.0)
    k_max: int = Field(8, ge=1)
    r_min: Optional[float] = Field(None, ge=0.0)
    r_max: Optional[float] = None
    cfl_safety: float = Field(settings.CFL_SAFETY, gt=0.0, le=1.0)
    hyperbolicity_margin: float = Field(settings.HYPERBOLICITY_MARGIN, ge=0.0, lt=1.0)


class SweepConfig(BaseSchema):
    lambdas: List[float] = Field(default_factory=lambda: [20.0, 40.0, 80.0])
    kappa0: Optional[List[float]] = None
    amplitudes: Optional[List[float]] = None
    profile_f: ProfileName = ProfileName.BUMP
    profile_g: ProfileName = ProfileName.ZERO
    c1: float = settings.EXISTENCE_C1
    dr: float = Field(0.05, gt=0.0)
    delta: float = Field(settings.DECAY_DELTA, ge=0.0)
    bootstrap_order: int = Field(settings.BOOTSTRAP_ORDER, ge=1, le=settings.MAX_DERIVATIVE_ORDER)
    record_every: int = Field(settings.RECORD_EVERY, ge=1)

    @model_validator(mode="after")
    def check_axis(self):
        if self.kappa0 is not None and self.amplitudes is not None:
            raise ValueError("give either kappa0 or amplitudes, not both")
        return self


class ConvergenceConfig(BaseSchema):
    mode: ConvergenceMode = ConvergenceMode.DALEMBERT
    base_dr: float = Field(0.1, gt=0.0)
    levels: int = Field(3, ge=2)
    t_end: float = Field(5.0, gt=0.0)
    amplitude: float = 1e-6
    center: float = 30.0
    width: float = Field(3.0, gt=0.0)
    r_min: Optional[float] = None
    r_max: float = 60.0
    background: BackgroundKind = BackgroundKind.CATENOID
    cfl_safety: float = Field(settings.CFL_SAFETY, gt=0.0, le=1.0)


class AuditConfig(BaseSchema):
    samples: int = Field(10000, ge=1)
    seed: int = settings.GLOBAL_SEED
    cone: Optional[ConeSpec] = None
    nullform_tolerance: float = settings.NULLFORM_TOLERANCE
    commutator_levels: int = Field(3, ge=2)


class RunConfig(BaseSchema):
    mode: RunMode = RunMode.EVOLVE
    output_dir: str = settings.OUTPUT_DIR
    threads: int = Field(settings.DEFAULT_THREADS, ge=1)
    evolve: EvolveConfig = Field(default_factory=EvolveConfig)
    cylinder: CylConfig = Field(default_factory=CylConfig)
    picard: PicardConfig = Field(default_factory=PicardConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    convergence: ConvergenceConfig = Field(default_factory=ConvergenceConfig)
    audit: AuditConfig = Field(default_factory=AuditConfig)


# Diagnostics records
class DiagnosticsRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    energy: float
    flux_cumulative: float
    plain_norms: List[float]
    boosted_norms: List[float]
    linf_weighted: float
    support: Tuple[float, float]
    hyperbolicity_slack: float
    nullform_residual: float

    @field_validator("t", "energy", "flux_cumulative", "linf_weighted", "hyperbolicity_slack", "nullform_residual")
    @classmethod
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("diagnostics entries must be finite")
        return v

    @field_validator("plain_norms", "boosted_norms")
    @classmethod
    def validate_norms(cls, v):
        # nan marks orders that are undefined on non-hyperbolic data
        if any(math.isinf(x) for x in v):
            raise ValueError("norms must not be infinite")
        return v

    def csv_header(self) -> List[str]:
        return (
            ["t", "energy", "flux_cumulative"]
            + [f"plain_norm_{k + 1}" for k in range(len(self.plain_norms))]
            + [f"boosted_norm_{k}" for k in range(len(self.boosted_norms))]
            + ["linf_weighted", "support_lo", "support_hi", "hyperbolicity_slack", "nullform_residual"]
        )

    def csv_values(self) -> List[float]:
        return (
            [self.t, self.energy, self.flux_cumulative]
            + list(self.plain_norms)
            + list(self.boosted_norms)
            + [self.linf_weighted, self.support[0], self.support[1], self.hyperbolicity_slack, self.nullform_residual]
        )


class CylRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    min_psi: float
    max_abs_w: float
    max_abs_w_t: float
    hyperbolicity_slack: float
    positive_definite: bool

    def csv_values(self) -> List[float]:
        return [self.t, self.min_psi, self.max_abs_w, self.max_abs_w_t, self.hyperbolicity_slack, float(self.positive_definite)]


# Experiment results
class SweepRow(BaseModel):
    lam: float
    amplitude: float
    kappa0: float
    end_time: float
    termination: TerminationReason
    B1: float
    B2: float
    B3: float
    min_slack: float


class SweepResult(BaseModel):
    rows: List[SweepRow]
    c1: float


class ConvergenceRow(BaseModel):
    dr: float
    error: float
    order: Optional[float] = None


class EnergyAudit(BaseModel):
    times: List[float]
    E: List[float]
    H: List[float]
    R: List[float]
    G: List[float]
    balance_residual: List[float]
    sqrt_energy: List[float]
    gronwall_envelope: List[float]
    gronwall_holds: bool


class AuditCheck(BaseModel):
    name: str
    value: float
    tolerance: float
    passed: bool


class AuditReport(BaseModel):
    checks: List[AuditCheck]
    extras: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


class Manifest(BaseModel):
    package: str
    version: str
    mode: RunMode
    argv: List[str]
    config: dict
    versions: Dict[str, str]
    threads: int
    wall_time_seconds: float
    termination: Optional[str] = None
