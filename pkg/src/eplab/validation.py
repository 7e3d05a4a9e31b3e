"""Validation of run inputs before they reach the solvers.

Provides checks that report every problem at once rather than stopping at the
first one:
- Corner compatibility of boundary data with the doping case
- Structural hypotheses of the pressure law used by the uniqueness experiments

Usage:
    from eplab.validation import check_boundary_compatibility

    result = check_boundary_compatibility(boundary, ell=1.0)
    if not result.passed:
        for issue in result.issues:
            print(f"ERROR: {issue}")
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .gas import PressureLaw, uniqueness_condition_residual

if TYPE_CHECKING:
    from .grid import BoundaryData

# Derivative values below this are treated as vanishing at the wall corners
CORNER_TOLERANCE = 1e-10


@dataclass
class ValidationResult:
    """Result of a validation check."""

    passed: bool
    issues: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stats: dict[str, float] = field(default_factory=dict)

    def __str__(self) -> str:
        status = "PASSED" if self.passed else "FAILED"
        lines = [f"Validation {status}"]
        if self.issues:
            lines.append(f"  Issues ({len(self.issues)}):")
            for issue in self.issues:
                lines.append(f"    - {issue}")
        if self.warnings:
            lines.append(f"  Warnings ({len(self.warnings)}):")
            for warning in self.warnings:
                lines.append(f"    - {warning}")
        return "\n".join(lines)


def check_boundary_compatibility(boundary: "BoundaryData", ell: float) -> ValidationResult:
    """Corner conditions at the endpoints x2 = 0 and x2 = ell of the cross-section.

    Electric case: h0' vanishes at both endpoints.
    Gravitational case: g0, h0, vL and their first two derivatives vanish there.
    """
    issues: list[str] = []
    stats: dict[str, float] = {}
    ends = np.array([0.0, ell])

    if boundary.case == "electric":
        worst = float(np.max(np.abs(boundary.h0.derivative(ends, 1))))
        stats["h0_prime_corner"] = worst
        if worst > CORNER_TOLERANCE:
            issues.append(f"electric case needs h0'(x2) = 0 at x2 in {{0, ell}}; got {worst:.3g}")
    else:
        for name, fn in (("g0", boundary.g0), ("h0", boundary.h0), ("vL", boundary.vL)):
            for order in (0, 1, 2):
                vals = fn(ends) if order == 0 else fn.derivative(ends, order)
                worst = float(np.max(np.abs(vals)))
                stats[f"{name}_d{order}_corner"] = worst
                if worst > CORNER_TOLERANCE:
                    issues.append(
                        f"gravitational case needs d^{order} {name} = 0 at x2 in {{0, ell}}; "
                        f"got {worst:.3g}"
                    )
    return ValidationResult(passed=not issues, issues=issues, stats=stats)


def check_uniqueness_hypothesis(law: PressureLaw, tol: float = 1e-6) -> ValidationResult:
    """d/drho (rho p''/p') <= 0 on a log grid of densities."""
    grid = np.logspace(-3, 3, 61)
    residual = np.asarray(uniqueness_condition_residual(law, grid))
    worst = float(residual.max())
    result = ValidationResult(passed=worst <= tol, stats={"max_residual": worst})
    if not result.passed:
        rho = float(grid[int(np.argmax(residual))])
        result.issues.append(f"d/drho(rho p''/p') = {worst:.3g} > 0 at rho = {rho:.3g}")
    return result
