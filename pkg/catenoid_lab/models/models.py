from functools import cached_property
from typing import List, Optional, Tuple
import enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Enums for run modes, tags and named choices
class TerminationReason(str, enum.Enum):
    COMPLETED = "completed"
    HYPERBOLICITY_LOST = "hyperbolicity_lost"
    NAN = "nan"
    NORM_BLOWUP = "norm_blowup"
    SUPPORT_HIT_COLLAR = "support_hit_collar"


class BackgroundKind(str, enum.Enum):
    CATENOID = "catenoid"
    FLAT = "flat"
    PLANAR = "planar"


class RunMode(str, enum.Enum):
    EVOLVE = "evolve"
    EVOLVE_CYL = "evolve-cyl"
    PICARD = "picard"
    SWEEP = "sweep"
    AUDIT = "audit"
    CONVERGE = "converge"


class ProfileName(str, enum.Enum):
    BUMP = "bump"
    DOUBLE_BUMP = "double_bump"
    ZERO = "zero"


class GammaField(str, enum.Enum):
    BOOST = "gamma1"
    SCALING = "gamma2"


class ConvergenceMode(str, enum.Enum):
    DALEMBERT = "dalembert"
    RICHARDSON = "richardson"


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# Base for immutable containers holding numpy arrays
class NumericModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# Geometry
class CatenoidPoint(NumericModel):
    r: float = Field(..., ge=1.0)
    Q: float
    Q_r: float
    Q_rr: float
    derivative_unbounded: bool = False


class RadialGrid(NumericModel):
    r_min: float = Field(..., ge=0.0)
    r_max: float
    n: int = Field(..., ge=3)

    @model_validator(mode="after")
    def check_extent(self):
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")
        return self

    @classmethod
    def from_spacing(cls, r_min: float, r_max: float, dr: float) -> "RadialGrid":
        """
        Uniform grid with spacing dr; r_max is moved up to the next grid point.
        """
        n = int(np.ceil((r_max - r_min) / dr - 1e-9)) + 1
        return cls(r_min=r_min, r_max=r_min + (n - 1) * dr, n=max(n, 3))

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.n - 1)

    @cached_property
    def r(self) -> np.ndarray:
        return _readonly(np.linspace(self.r_min, self.r_max, self.n))


class BackgroundCoeffs(NumericModel):
    grid: RadialGrid
    kind: BackgroundKind
    q: np.ndarray
    qr: np.ndarray
    qrr: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    b1: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    sqrt_factor: np.ndarray
    curvature: float = 1.0

    @field_validator("q", "qr", "qrr", "c1", "c2", "b1", "c3", "c4", "sqrt_factor")
    @classmethod
    def validate_array(cls, v):
        arr = _readonly(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError("background coefficients must be finite")
        return arr


# Solver states
class RadialState(NumericModel):
    t: float
    eps: np.ndarray
    eps_t: np.ndarray
    grid: RadialGrid

    @field_validator("eps", "eps_t")
    @classmethod
    def validate_field(cls, v):
        arr = _readonly(v)
        if arr.ndim != 1:
            raise ValueError("fields must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("fields must be finite")
        return arr

    @model_validator(mode="after")
    def check_length(self):
        if self.eps.size != self.grid.n or self.eps_t.size != self.grid.n:
            raise ValueError(f"field length must match grid size {self.grid.n}")
        return self

    @classmethod
    def zeros(cls, grid: RadialGrid, t: float = 0.0) -> "RadialState":
        return cls(t=t, eps=np.zeros(grid.n), eps_t=np.zeros(grid.n), grid=grid)

    @property
    def max_amplitude(self) -> float:
        return float(max(np.max(np.abs(self.eps)), np.max(np.abs(self.eps_t))))


class ZGrid(NumericModel):
    z_max: float = Field(..., gt=0.0)
    n: int = Field(..., ge=5)

    @property
    def dz(self) -> float:
        return 2.0 * self.z_max / (self.n - 1)

    @cached_property
    def z(self) -> np.ndarray:
        return _readonly(np.linspace(-self.z_max, self.z_max, self.n))


class CylState(NumericModel):
    t: float
    w: np.ndarray
    w_t: np.ndarray
    grid: ZGrid

    @field_validator("w", "w_t")
    @classmethod
    def validate_field(cls, v):
        arr = _readonly(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError("fields must be finite")
        return arr

    @model_validator(mode="after")
    def check_positivity(self):
        if self.w.size != self.grid.n or self.w_t.size != self.grid.n:
            raise ValueError(f"field length must match grid size {self.grid.n}")
        if np.any(self.psi <= 0.0):
            raise ValueError("psi = cosh z + w must stay positive")
        return self

    @property
    def psi(self) -> np.ndarray:
        return np.cosh(self.grid.z) + self.w


# Symbols
class SpacetimeVector(NumericModel):
    x0: float
    x_prime: Tuple[float, float, float]

    @property
    def norm_prime(self) -> float:
        return float(np.linalg.norm(self.x_prime))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x0, *self.x_prime], dtype=float)


class Symbol(NumericModel):
    g: np.ndarray
    T: np.ndarray
    gamma: np.ndarray
    x_hat: np.ndarray

    @property
    def hat_x0(self) -> float:
        return float(self.x_hat[0])

    def quadratic(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.g @ xi)

    def completed_square(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        shift = xi[0] + self.T @ xi[1:]
        return float(-shift ** 2 + xi[1:] @ self.gamma @ xi[1:])


class CylSymbol(NumericModel):
    A: float
    B: float
    C: float
    D: float
    E: float
    M: float = Field(..., gt=0.0)


# Diagnostics regions
class ConeRegion(NumericModel):
    """
    Backward cone section S_t = {r : |r - x0| < R - t}.
    """
    x0: float
    R: float = Field(..., gt=0.0)
    t: float = 0.0

    @model_validator(mode="after")
    def check_open(self):
        if not self.R - self.t > 0.0:
            raise ValueError("cone section is empty: R - t must be positive")
        return self

    def interval(self, t: Optional[float] = None) -> Optional[Tuple[float, float]]:
        t = self.t if t is None else t
        half = self.R - t
        if half <= 0.0:
            return None
        return self.x0 - half, self.x0 + half


# Trajectories
class Trajectory(NumericModel):
    snapshots: List[RadialState]
    records: list
    termination: TerminationReason
    background: BackgroundKind = BackgroundKind.CATENOID
    message: Optional[str] = None

    @model_validator(mode="after")
    def check_times(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if len(self.records) != len(self.snapshots):
            raise ValueError("one diagnostics record per snapshot is required")
        return self

    @property
    def final(self) -> RadialState:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


class CylTrajectory(NumericModel):
    snapshots: List[CylState]
    records: list
    termination: TerminationReason
    message: Optional[str] = None

    @model_validator(mode="after")
    def check_times(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        return self

    @property
    def final(self) -> CylState:
        return self.snapshots[-1]
