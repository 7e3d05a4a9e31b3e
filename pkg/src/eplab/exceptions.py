from __future__ import annotations

from typing import Optional


class LabError(RuntimeError):
    pass


class DomainError(LabError, ValueError):
    pass


class ConfigError(LabError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DopingSignError(ConfigError):
    pass


class CompatibilityError(ConfigError):
    pass


class HypothesisViolation(LabError):
    pass


class AdmissibilityError(LabError):
    """A state left the set where the formulation is defined.

    ``index`` is the flat index of the first failing element when the check ran
    over an array, None for scalar input.
    """

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        super().__init__(message)
        self.index = index


class VacuumError(AdmissibilityError):
    pass


class NoSubsonicRoot(AdmissibilityError):
    pass


class SonicDegeneracy(AdmissibilityError):
    pass


class SonicBreakdown(AdmissibilityError):
    pass


class InadmissibleStateError(AdmissibilityError):
    pass


class SegmentInadmissibleError(AdmissibilityError):
    def __init__(self, message: str, t: float, node: tuple[int, int]) -> None:
        super().__init__(message)
        self.t = t
        self.node = node


class DivergenceError(LabError):
    pass


class SingularAssemblyError(LabError):
    pass


class SolverBreakdown(LabError):
    pass
