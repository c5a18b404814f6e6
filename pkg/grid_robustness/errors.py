"""Exception hierarchy for grid-robustness.

Input errors subclass ValueError and map to CLI exit code 2; numerical failures
subclass RuntimeError and map to exit code 3.
"""

from typing import Optional


class GridRobustnessError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3
    module = "grid_robustness"


class InputError(GridRobustnessError, ValueError):
    exit_code = 2


class NumericalError(GridRobustnessError, RuntimeError):
    exit_code = 3


class CaseFormatError(InputError):
    """A case file violates the schema or a GridCase invariant."""

    module = "network"

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class HypothesisError(InputError):
    """Arguments fall outside the region where the sector bound holds."""

    module = "gain"


class ProblemError(InputError):
    module = "optimizer"


class ConfigError(InputError):
    module = "cli"


class EquilibriumError(NumericalError):
    module = "network"


class SmallSignalInstabilityError(NumericalError):
    module = "lure"

    def __init__(self, eigenvalue: complex, detail: Optional[str] = None):
        self.eigenvalue = eigenvalue
        super().__init__(f"Linearization is not small-signal stable: {detail or f'eigenvalue {complex(eigenvalue):.6g} has real part >= -tol'}")


class GainComputationError(NumericalError):
    module = "gain"


class CertificationError(NumericalError):
    module = "optimizer"


class SynchronismLossError(NumericalError):
    """The simulated trajectory left the synchronous region."""

    module = "simulator"

    def __init__(self, message: str, time: Optional[float] = None):
        self.time = time
        super().__init__(message)
