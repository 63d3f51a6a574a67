from typing import Optional


class LabError(Exception):
    """
    Base error for the laboratory. Carries a stable error code and the CLI exit code.
    """
    error_code = "lab_error"
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_record(self) -> dict:
        return {
            "success": False,
            "message": self.detail,
            "error_code": self.error_code,
            "exit_code": self.exit_code,
        }


class DomainError(LabError, ValueError):
    error_code = "domain_error"
    exit_code = 2


class DegenerateDirectionError(DomainError):
    error_code = "degenerate_direction"


class NonHyperbolicError(LabError):
    error_code = "non_hyperbolic"
    exit_code = 3


class HyperbolicityLostError(NonHyperbolicError):
    """
    Raised when the timelike slack drops below the margin somewhere on the grid.
    """
    error_code = "hyperbolicity_lost"

    def __init__(self, slack: float, index: int, position: float, margin: float):
        super().__init__(
            f"Hyperbolicity lost: slack {slack:.6g} < margin {margin:g} at index {index} (r = {position:.6g})"
        )
        self.slack = slack
        self.index = index
        self.position = position
        self.margin = margin


class CFLViolationError(LabError):
    error_code = "cfl_violation"
    exit_code = 3


class NaNProducedError(LabError):
    error_code = "nan_produced"
    exit_code = 3


class UnsupportedOrderError(LabError):
    error_code = "unsupported_order"
    exit_code = 2


class GridTooSmallError(LabError):
    error_code = "grid_too_small"
    exit_code = 2


class ConfigurationError(LabError):
    error_code = "configuration_error"
    exit_code = 2


class StorageError(LabError):
    error_code = "storage_error"
    exit_code = 4


class NumericalTerminationError(LabError):
    """
    A run ended with a termination tag other than completed.
    """
    error_code = "numerical_termination"
    exit_code = 3

    def __init__(self, termination: str, t: Optional[float] = None):
        where = f" at t = {t:.6g}" if t is not None else ""
        super().__init__(f"Run terminated with '{termination}'{where}")
        self.termination = termination
        self.t = t

    def to_record(self) -> dict:
        record = super().to_record()
        record["termination"] = self.termination
        return record


class AuditFailedError(LabError):
    error_code = "audit_failed"
    exit_code = 3

    def __init__(self, failed_checks: list):
        super().__init__(f"Identity audit failed: {', '.join(failed_checks)}")
        self.failed_checks = failed_checks
