"""Structured vertex-centred grid on the nozzle [0, L] x [0, ell].

Nodes are stored row-major by x1 then x2, so node (i, j) has flat index
i * (ny + 1) + j. Boundary nodes own half control volumes; the trapezoid
weights ``weights`` are the control-volume areas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .exceptions import CompatibilityError, DomainError, LabError
from .expressions import BasisExpansion
from .validation import ValidationResult, check_boundary_compatibility

MIN_CELLS = 4


@dataclass(frozen=True)
class NozzleGrid:
    L: float
    ell: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < MIN_CELLS or self.ny < MIN_CELLS:
            raise DomainError(f"grid needs nx, ny >= {MIN_CELLS}, got {self.nx} x {self.ny}")
        if self.L <= 0 or self.ell <= 0:
            raise DomainError("nozzle length and width must be positive")

    @property
    def hx(self) -> float:
        return self.L / self.nx

    @property
    def hy(self) -> float:
        return self.ell / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def size(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.nx + 1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(0.0, self.ell, self.ny + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def node(self, flat_index: int) -> tuple[int, int]:
        i, j = divmod(int(flat_index), self.ny + 1)
        return i, j

    def describe_node(self, flat_index: int) -> str:
        i, j = self.node(flat_index)
        return f"node (i={i}, j={j}) at (x1, x2) = ({self.x1[i]:.6g}, {self.x2[j]:.6g})"

    @property
    def wx(self) -> np.ndarray:
        return control_widths(self.nx, self.hx)

    @property
    def wy(self) -> np.ndarray:
        return control_widths(self.ny, self.hy)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.wx, self.wy)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def gradient_operators(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Second-order nodal d/dx1 and d/dx2 (one-sided on the boundary)."""
        dx = sp.kron(gradient_1d(self.nx, self.hx), sp.identity(self.ny + 1), format="csr")
        dy = sp.kron(sp.identity(self.nx + 1), gradient_1d(self.ny, self.hy), format="csr")
        return dx, dy

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Nodal gradient, shape (nx+1, ny+1, 2); matches the solver's discrete gradient."""
        g1 = np.gradient(values, self.hx, axis=0, edge_order=2)
        g2 = np.gradient(values, self.hy, axis=1, edge_order=2)
        return np.stack([g1, g2], axis=-1)


def control_widths(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def gradient_1d(n: int, h: float) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i in range(1, n):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0, n, n, n]
    cols += [0, 1, 2, n - 2, n - 1, n]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h, 0.5 / h, -2.0 / h, 1.5 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))


@dataclass(frozen=True)
class Field2D:
    grid: NozzleGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise LabError(f"non-finite field value at {self.grid.describe_node(bad)}")
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def max_abs_diff(self, other: "Field2D") -> float:
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True)
class BoundaryData:
    """Perturbation data: g0 (mass flux) and h0 (potential) on the inlet, vL on the outlet."""

    g0: BasisExpansion
    h0: BasisExpansion
    vL: BasisExpansion
    case: Literal["electric", "gravitational"] = "electric"

    @staticmethod
    def zero(ell: float, case: Literal["electric", "gravitational"] = "electric") -> "BoundaryData":
        z = BasisExpansion(period=ell)
        return BoundaryData(g0=z, h0=z, vL=z, case=case)

    def scaled(self, eps: float) -> "BoundaryData":
        return BoundaryData(
            g0=self.g0.scaled(eps), h0=self.h0.scaled(eps), vL=self.vL.scaled(eps), case=self.case
        )

    def compatibility(self, ell: float) -> ValidationResult:
        return check_boundary_compatibility(self, ell)

    def require_compatible(self, ell: float) -> None:
        result = self.compatibility(ell)
        if not result.passed:
            raise CompatibilityError("; ".join(result.issues))

    def stream_trace(self, x2: np.ndarray) -> np.ndarray:
        """psi perturbation on the inlet: int_0^x2 g0."""
        return self.g0.antiderivative(x2)
