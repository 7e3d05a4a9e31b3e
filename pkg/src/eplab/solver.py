"""Linearize-and-iterate solver for the subsonic nozzle problem.

Unknowns are the perturbations (U, V) = (phi - phi_bar, Phi - Phi_bar) in the
potential formulation and (psi - J x2, Phi - Phi_bar) in the stream formulation.
Each step solves the linear problem

    div(a grad U + c V) = div F,     kappa lap V - dB/dz V - dB/dq . grad U = f

whose coefficients are the background Jacobians and whose right-hand sides are
the exact Taylor remainders of the previous iterate. The discrete operators act
on A(state) - A(background), so the 1D background is an exact discrete
equilibrium and the divergence part is conservative: summing the first equation
over a column of control volumes telescopes to the inlet flux.

Usage:
    from eplab.solver import NozzleProblem, PicardConfig, picard_solve

    state, report = picard_solve(problem, PicardConfig(tol=1e-10))
    print(report.converged, state.margin_min)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .background import BackgroundProfile, DopingProfile
from .config import DEFAULT_LINEAR_RTOL
from .exceptions import (
    AdmissibilityError,
    DivergenceError,
    DomainError,
    InadmissibleStateError,
    SingularAssemblyError,
    SolverBreakdown,
)
from .formulations import (
    Formulation,
    PointwiseModel,
    background_gradient,
    background_primary,
    build_model,
)
from .gas import PressureLaw
from .grid import BoundaryData, Field2D, NozzleGrid
from .potential import Jacobians

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100

# Consecutive growing updates before the iteration is declared divergent
DIVERGENCE_WINDOW = 5

# Smallest background ellipticity accepted by the assembly
ELLIPTICITY_FLOOR = 1e-12

# Updates below this are round-off dominated and excluded from ratio estimates
NOISE_FLOOR = 1e-11

MAX_REFINEMENT_STEPS = 3


# =============================================================================
# Problem description
# =============================================================================


@dataclass(frozen=True)
class NozzleProblem:
    formulation: Formulation
    law: PressureLaw
    doping: DopingProfile
    background: BackgroundProfile
    grid: NozzleGrid
    boundary: BoundaryData

    def __post_init__(self) -> None:
        if len(self.background.x1) != self.grid.nx + 1:
            raise DomainError(
                f"background has {len(self.background.x1) - 1} steps but grid has "
                f"nx = {self.grid.nx}; integrate with nsteps = nx"
            )
        if not np.isclose(self.background.L, self.grid.L):
            raise DomainError("background and grid lengths differ")

    @cached_property
    def model(self) -> PointwiseModel:
        return build_model(self.formulation, self.law, self.background)

    def with_boundary(self, boundary: BoundaryData) -> "NozzleProblem":
        return NozzleProblem(
            formulation=self.formulation,
            law=self.law,
            doping=self.doping,
            background=self.background,
            grid=self.grid,
            boundary=boundary,
        )


@dataclass(frozen=True)
class BackgroundField:
    """Background state and its Jacobians at every node."""

    z: np.ndarray
    q: np.ndarray
    A: np.ndarray
    B: np.ndarray
    jac: Jacobians


def background_field(problem: NozzleProblem) -> BackgroundField:
    ny1 = problem.grid.ny + 1
    z = np.repeat(problem.background.Phi_bar[:, None], ny1, axis=1)
    q1d = background_gradient(problem.formulation, problem.background)
    q = np.repeat(q1d[:, None, :], ny1, axis=1)
    model = problem.model
    A, B = model.flux(z, q)
    return BackgroundField(z=z, q=q, A=A, B=B, jac=model.jacobians(z, q))


@dataclass(frozen=True)
class LinearCoefficients:
    """Background coefficients of the linear operators, one value per x1 node.

    The off-diagonal entry of dA/dq vanishes at the background state.
    """

    a11: np.ndarray
    a22: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    dBdz: np.ndarray
    dBdq1: np.ndarray
    dBdq2: np.ndarray
    kappa: np.ndarray
    kappa_prime: np.ndarray

    @property
    def lambda0(self) -> float:
        return float(min(self.a11.min(), self.a22.min()))

    @property
    def Lambda0(self) -> float:
        return float(max(self.a11.max(), self.a22.max()))


def linear_coefficients(
    problem: NozzleProblem, bfield: Optional[BackgroundField] = None
) -> LinearCoefficients:
    bf = bfield or background_field(problem)
    jac = bf.jac
    a11 = jac.dA_dq[:, 0, 0, 0]
    a22 = jac.dA_dq[:, 0, 1, 1]
    weakest = np.minimum(a11, a22)
    if np.any(weakest <= ELLIPTICITY_FLOOR):
        i = int(np.argmin(weakest))
        raise SingularAssemblyError(
            f"background coefficient matrix not elliptic at x1 = {problem.grid.x1[i]:.6g}"
        )
    x1 = problem.grid.x1
    w = problem.doping.w(x1)
    wp = problem.doping.w.derivative(x1)
    s = problem.model.poisson_sign
    return LinearCoefficients(
        a11=a11.copy(),
        a22=a22.copy(),
        c1=jac.dA_dz[:, 0, 0].copy(),
        c2=jac.dA_dz[:, 0, 1].copy(),
        dBdz=jac.dB_dz[:, 0].copy(),
        dBdq1=jac.dB_dq[:, 0, 0].copy(),
        dBdq2=jac.dB_dq[:, 0, 1].copy(),
        kappa=s / w,
        kappa_prime=-s * wp / (w * w),
    )


# =============================================================================
# Taylor remainders
# =============================================================================


@dataclass(frozen=True)
class Remainders:
    F: np.ndarray  # (nx+1, ny+1, 2)
    f: np.ndarray  # (nx+1, ny+1)


def taylor_remainders(
    problem: NozzleProblem,
    Psi: np.ndarray,
    dphi: np.ndarray,
    bfield: Optional[BackgroundField] = None,
) -> Remainders:
    """Second-order remainders of A and B about the background.

    -F = A(bg + (Psi, dphi)) - A(bg) - dA/dq dphi - dA/dz Psi
     f = B(bg + (Psi, dphi)) - B(bg) - dB/dq . dphi - dB/dz Psi
    """
    bf = bfield or background_field(problem)
    model = problem.model
    z = bf.z + Psi
    q = bf.q + dphi
    try:
        A, B = model.flux(z, q)
        margin = model.margin(z, q)
    except AdmissibilityError as e:
        where = problem.grid.describe_node(e.index) if e.index is not None else "unknown node"
        raise InadmissibleStateError(f"{e} at {where}", index=e.index) from e
    bad = ~(margin > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise InadmissibleStateError(
            f"state left the subsonic set (margin {margin.flat[idx]:.3g}) at "
            f"{problem.grid.describe_node(idx)}",
            index=idx,
        )
    jac = bf.jac
    lin_A = np.einsum("...ij,...j->...i", jac.dA_dq, dphi) + jac.dA_dz * Psi[..., None]
    lin_B = np.einsum("...i,...i->...", jac.dB_dq, dphi) + jac.dB_dz * Psi
    return Remainders(F=-(A - bf.A - lin_A), f=B - bf.B - lin_B)


# =============================================================================
# Assembly
# =============================================================================


def _diffusion_1d(coef_face: np.ndarray, h: float, widths: np.ndarray) -> sp.csr_matrix:
    """Row i: sum over faces of c (u_right - u_left) / h, signed outward, per unit width."""
    c = coef_face / h
    main = np.zeros(len(widths))
    main[:-1] -= c
    main[1:] -= c
    m = sp.diags([c, main, c], [-1, 0, 1], format="csr")
    return sp.csr_matrix(sp.diags(1.0 / widths) @ m)


def _average_div_1d(coef_face: np.ndarray, widths: np.ndarray) -> sp.csr_matrix:
    """Row i: divergence of face values c (v_left + v_right) / 2, per unit width."""
    half = 0.5 * coef_face
    main = np.zeros(len(widths))
    main[:-1] += half
    main[1:] -= half
    m = sp.diags([-half, main, half], [-1, 0, 1], format="csr")
    return sp.csr_matrix(sp.diags(1.0 / widths) @ m)


def _faces(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:-1] + values[1:])


@dataclass(frozen=True)
class LinearBoundaryValues:
    """Discrete boundary data of one linear solve.

    Only the Dirichlet nodes of ``u_dirichlet`` and the inlet row of
    ``v_dirichlet`` are read. ``g_in`` is the total flux perturbation through
    the inlet (potential case); ``v_out`` is dPhi/dx1 on the outlet.
    """

    u_dirichlet: np.ndarray
    v_dirichlet: np.ndarray
    g_in: np.ndarray
    v_out: np.ndarray

    @staticmethod
    def zeros(grid: NozzleGrid) -> "LinearBoundaryValues":
        return LinearBoundaryValues(
            u_dirichlet=np.zeros(grid.shape),
            v_dirichlet=np.zeros(grid.shape),
            g_in=np.zeros(grid.ny + 1),
            v_out=np.zeros(grid.ny + 1),
        )


def boundary_values(problem: NozzleProblem) -> LinearBoundaryValues:
    grid, bd = problem.grid, problem.boundary
    x2 = grid.x2
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)
    v[0, :] = bd.h0(x2)
    if problem.formulation is Formulation.STREAM:
        trace = bd.stream_trace(x2)
        u[0, :] = trace
        u[:, 0] = 0.0
        u[:, -1] = trace[-1]
        g_in = np.zeros(grid.ny + 1)
    else:
        g_in = bd.g0(x2)
    return LinearBoundaryValues(u_dirichlet=u, v_dirichlet=v, g_in=g_in, v_out=bd.vL(x2))


class LinearizedOperator:
    """The background-linearized operator with Dirichlet unknowns eliminated.

    The sparse LU factorization is computed once and reused by every solve.
    """

    def __init__(
        self,
        problem: NozzleProblem,
        bfield: Optional[BackgroundField] = None,
        linear_rtol: float = DEFAULT_LINEAR_RTOL,
    ) -> None:
        self.problem = problem
        self.bfield = bfield or background_field(problem)
        self.coefficients = linear_coefficients(problem, self.bfield)
        self.linear_rtol = linear_rtol
        self._lu: Optional[spla.SuperLU] = None

        grid = problem.grid
        nx1, ny1 = grid.shape
        N = grid.size
        co = self.coefficients
        wx, wy = grid.wx, grid.wy
        Ix, Iy = sp.identity(nx1, format="csr"), sp.identity(ny1, format="csr")

        def per_node(values: np.ndarray) -> sp.dia_matrix:
            return sp.diags(np.repeat(values, ny1))

        Ty = _diffusion_1d(np.ones(grid.ny), grid.hy, wy)
        My = _average_div_1d(np.ones(grid.ny), wy)
        Tx1 = _diffusion_1d(np.ones(grid.nx), grid.hx, wx)
        Mx1 = _average_div_1d(np.ones(grid.nx), wx)
        self.Dx, self.Dy = grid.gradient_operators()

        K_UU = sp.kron(_diffusion_1d(_faces(co.a11), grid.hx, wx), Iy) + sp.kron(
            sp.diags(co.a22), Ty
        )
        K_UV = sp.kron(_average_div_1d(_faces(co.c1), wx), Iy) + sp.kron(sp.diags(co.c2), My)
        laplacian = sp.kron(Tx1, Iy) + sp.kron(Ix, Ty)
        K_VV = per_node(co.kappa) @ laplacian - per_node(co.dBdz)
        K_VU = -(per_node(co.dBdq1) @ self.Dx + per_node(co.dBdq2) @ self.Dy)
        self.matrix = sp.csr_matrix(sp.bmat([[K_UU, K_UV], [K_VU, K_VV]]))
        self.div_x = sp.csr_matrix(sp.kron(Mx1, Iy))
        self.div_y = sp.csr_matrix(sp.kron(Ix, My))

        i_idx, j_idx = np.divmod(np.arange(N), ny1)
        if problem.formulation is Formulation.POTENTIAL:
            u_fixed = i_idx == grid.nx
        else:
            u_fixed = (i_idx == 0) | (j_idx == 0) | (j_idx == grid.ny)
        v_fixed = i_idx == 0
        self.u_fixed, self.v_fixed = u_fixed, v_fixed
        fixed = np.concatenate([u_fixed, v_fixed])
        self.fixed_idx = np.flatnonzero(fixed)
        self.free_idx = np.flatnonzero(~fixed)
        rows = self.matrix[self.free_idx]
        self.A_free = sp.csc_matrix(rows[:, self.free_idx])
        self.A_fixed = sp.csr_matrix(rows[:, self.fixed_idx])

    @property
    def lu(self) -> spla.SuperLU:
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A_free)
            except RuntimeError as e:
                raise SingularAssemblyError(f"linearized operator is singular: {e}") from e
        return self._lu

    def rhs(self, rem: Remainders, bvals: LinearBoundaryValues) -> np.ndarray:
        grid = self.problem.grid
        ny1 = grid.ny + 1
        b1 = self.div_x @ rem.F[..., 0].ravel() + self.div_y @ rem.F[..., 1].ravel()
        b2 = rem.f.ravel().copy()
        if self.problem.formulation is Formulation.POTENTIAL:
            b1[:ny1] += bvals.g_in / grid.wx[0]
        b2[-ny1:] -= self.coefficients.kappa[-1] * bvals.v_out / grid.wx[-1]
        return np.concatenate([b1, b2])

    def fixed_values(self, bvals: LinearBoundaryValues) -> np.ndarray:
        return np.concatenate(
            [bvals.u_dirichlet.ravel()[self.u_fixed], bvals.v_dirichlet.ravel()[self.v_fixed]]
        )

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        N = self.problem.grid.size
        shape = self.problem.grid.shape
        return x[:N].reshape(shape), x[N:].reshape(shape)

    def residual(
        self, U: np.ndarray, V: np.ndarray, bvals: LinearBoundaryValues
    ) -> tuple[np.ndarray, Remainders]:
        """Discrete nonlinear residual at the free rows."""
        rem = taylor_remainders(self.problem, V, self.problem.grid.gradient(U), self.bfield)
        x = np.concatenate([U.ravel(), V.ravel()])
        return (self.matrix @ x - self.rhs(rem, bvals))[self.free_idx], rem

    def remainder_jacobian(self, U: np.ndarray, V: np.ndarray) -> sp.csr_matrix:
        """d(rhs)/d(U, V): the part of the Newton matrix coming from F and f."""
        bf = self.bfield
        full = self.problem.model.jacobians(bf.z + V, bf.q + self.problem.grid.gradient(U))
        dq = full.dA_dq - bf.jac.dA_dq
        dz = full.dA_dz - bf.jac.dA_dz
        dBq = full.dB_dq - bf.jac.dB_dq
        dBz = full.dB_dz - bf.jac.dB_dz

        def d(values: np.ndarray) -> sp.dia_matrix:
            return sp.diags(values.ravel())

        dF_dU = [-(d(dq[..., i, 0]) @ self.Dx + d(dq[..., i, 1]) @ self.Dy) for i in (0, 1)]
        dF_dV = [-d(dz[..., i]) for i in (0, 1)]
        db1_dU = self.div_x @ dF_dU[0] + self.div_y @ dF_dU[1]
        db1_dV = self.div_x @ dF_dV[0] + self.div_y @ dF_dV[1]
        df_dU = d(dBq[..., 0]) @ self.Dx + d(dBq[..., 1]) @ self.Dy
        return sp.csr_matrix(sp.bmat([[db1_dU, db1_dV], [df_dU, d(dBz)]]))

    def solve_free(self, b: np.ndarray) -> np.ndarray:
        x = self.lu.solve(b)
        b_norm = float(np.max(np.abs(b))) if b.size else 0.0
        for _ in range(MAX_REFINEMENT_STEPS + 1):
            r = b - self.A_free @ x
            r_norm = float(np.max(np.abs(r))) if r.size else 0.0
            if r_norm <= self.linear_rtol * b_norm or r_norm == 0.0:
                return x
            x = x + self.lu.solve(r)
        raise SolverBreakdown(
            f"linear residual {r_norm:.3g} exceeds {self.linear_rtol:g} * |b| = "
            f"{self.linear_rtol * b_norm:.3g}; |A|_1 ~ {spla.onenormest(self.A_free):.3g}"
        )

    def solve(
        self, rem: Remainders, bvals: LinearBoundaryValues
    ) -> tuple[np.ndarray, np.ndarray]:
        system = self.system(rem, bvals)
        return self.split(self.expand(system.rhs, system.fixed))

    def system(self, rem: Remainders, bvals: LinearBoundaryValues) -> "LinearSystem":
        fixed = self.fixed_values(bvals)
        b = self.rhs(rem, bvals)[self.free_idx] - self.A_fixed @ fixed
        return LinearSystem(operator=self, rhs=b, fixed=fixed)

    def expand(self, b_free: np.ndarray, fixed: np.ndarray) -> np.ndarray:
        x = np.empty(2 * self.problem.grid.size)
        x[self.free_idx] = self.solve_free(b_free)
        x[self.fixed_idx] = fixed
        return x


@dataclass(frozen=True)
class LinearSystem:
    operator: LinearizedOperator
    rhs: np.ndarray
    fixed: np.ndarray

    @property
    def matrix(self) -> sp.csc_matrix:
        return self.operator.A_free


def assemble_linear_system(
    problem: NozzleProblem,
    F: np.ndarray,
    f: np.ndarray,
    bvals: Optional[LinearBoundaryValues] = None,
    operator: Optional[LinearizedOperator] = None,
) -> LinearSystem:
    op = operator or LinearizedOperator(problem)
    bv = bvals if bvals is not None else boundary_values(problem)
    return op.system(Remainders(F=np.asarray(F, float), f=np.asarray(f, float)), bv)


def solve_linear(system: LinearSystem) -> tuple[Field2D, Field2D]:
    op = system.operator
    U, V = op.split(op.expand(system.rhs, system.fixed))
    grid = op.problem.grid
    return Field2D(grid, U), Field2D(grid, V)


# =============================================================================
# Solution state and iteration report
# =============================================================================


@dataclass(frozen=True)
class SolutionState:
    formulation: Formulation
    grid: NozzleGrid
    primary: Field2D
    Phi: Field2D
    rho: Field2D
    u1: Field2D
    u2: Field2D
    mach: Field2D
    grad: np.ndarray
    perturbation: Field2D
    Phi_perturbation: Field2D
    margin_min: float
    rho_min: float
    rho_max: float
    lambda0: float
    Lambda0: float

    @property
    def subsonic(self) -> bool:
        return self.margin_min > 0

    @property
    def delta_star(self) -> Optional[float]:
        return self.margin_min if self.formulation is Formulation.POTENTIAL else None

    @property
    def lambda_star(self) -> Optional[float]:
        return self.margin_min if self.formulation is Formulation.STREAM else None

    def distance(self, other: "SolutionState") -> float:
        return max(self.primary.max_abs_diff(other.primary), self.Phi.max_abs_diff(other.Phi))

    def to_frame(self) -> pd.DataFrame:
        X1, X2 = self.grid.mesh()
        return pd.DataFrame(
            {
                "x1": X1.ravel(),
                "x2": X2.ravel(),
                "phi_or_psi": self.primary.flat,
                "Phi": self.Phi.flat,
                "rho": self.rho.flat,
                "u1": self.u1.flat,
                "u2": self.u2.flat,
                "mach": self.mach.flat,
            }
        )


def reconstruct_state(problem: NozzleProblem, U: np.ndarray, V: np.ndarray) -> SolutionState:
    grid = problem.grid
    model = problem.model
    bf = background_field(problem)
    primary = background_primary(problem.formulation, problem.background, grid.x2) + U
    Phi = bf.z + V
    grad = bf.q + grid.gradient(U)
    try:
        rho = model.density(Phi, grad)
        margin = model.margin(Phi, grad)
        jac = model.jacobians(Phi, grad)
    except AdmissibilityError as e:
        where = grid.describe_node(e.index) if e.index is not None else "unknown node"
        raise InadmissibleStateError(f"{e} at {where}", index=e.index) from e
    u = model.velocity(grad, rho)
    speed = np.sqrt(np.einsum("...i,...i->...", u, u))
    mach = speed / np.sqrt(model.sound_speed_sq(rho))
    eig = np.linalg.eigvalsh(jac.dA_dq)
    return SolutionState(
        formulation=problem.formulation,
        grid=grid,
        primary=Field2D(grid, primary),
        Phi=Field2D(grid, Phi),
        rho=Field2D(grid, rho),
        u1=Field2D(grid, u[..., 0]),
        u2=Field2D(grid, u[..., 1]),
        mach=Field2D(grid, mach),
        grad=grad,
        perturbation=Field2D(grid, U),
        Phi_perturbation=Field2D(grid, V),
        margin_min=float(margin.min()),
        rho_min=float(rho.min()),
        rho_max=float(rho.max()),
        lambda0=float(eig[..., 0].min()),
        Lambda0=float(eig[..., 1].max()),
    )


@dataclass
class IterationReport:
    """Residual history of the nonlinear iteration."""

    method: str
    residual_history: list[float] = field(default_factory=list)
    contraction_ratios: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    nonlinear_residual: float = float("nan")

    def record(self, update: float) -> None:
        if self.residual_history:
            prev = self.residual_history[-1]
            self.contraction_ratios.append(update / prev if prev > 0 else float("nan"))
        self.residual_history.append(update)
        self.iterations = len(self.residual_history)

    def consecutive_growth(self) -> int:
        count = 0
        hist = self.residual_history
        for k in range(len(hist) - 1, 0, -1):
            if hist[k] > hist[k - 1]:
                count += 1
            else:
                break
        return count

    @property
    def contraction_estimate(self) -> float:
        """Largest quotient whose update is above the round-off floor."""
        ratios = [
            r
            for r, upd in zip(self.contraction_ratios, self.residual_history[1:])
            if upd >= NOISE_FLOOR and np.isfinite(r)
        ]
        return max(ratios) if ratios else 0.0

    def to_frame(self) -> pd.DataFrame:
        ratios = [float("nan")] + list(self.contraction_ratios)
        return pd.DataFrame(
            {
                "iter": np.arange(1, self.iterations + 1),
                "residual": self.residual_history,
                "ratio": ratios[: self.iterations],
            }
        )


# =============================================================================
# Nonlinear iteration
# =============================================================================


@dataclass(frozen=True)
class PicardConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    damping: float = 1.0
    method: Literal["picard", "newton"] = "picard"
    linear_rtol: float = DEFAULT_LINEAR_RTOL

    def __post_init__(self) -> None:
        if not (0.0 < self.damping <= 1.0):
            raise DomainError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol <= 0 or self.max_iter < 1:
            raise DomainError("tol must be positive and max_iter >= 1")


def _check_growth(report: IterationReport) -> None:
    last = report.residual_history[-1]
    if not np.isfinite(last):
        raise DivergenceError(f"non-finite update at iteration {report.iterations}")
    if report.consecutive_growth() >= DIVERGENCE_WINDOW:
        raise DivergenceError(
            f"update grew for {DIVERGENCE_WINDOW} consecutive iterations "
            f"(last {last:.3g} at iteration {report.iterations})"
        )


def picard_solve(
    problem: NozzleProblem,
    config: Optional[PicardConfig] = None,
    initial: Optional[tuple[np.ndarray, np.ndarray]] = None,
    operator: Optional[LinearizedOperator] = None,
) -> tuple[SolutionState, IterationReport]:
    """Iterate (U, V) <- solve(L, remainders(U, V)) until the update is below tol.

    ``initial`` is a perturbation guess (U0, V0); the background is used when None.
    Convergence also requires the discrete nonlinear residual to be <= 10 tol.
    """
    config = config or PicardConfig()
    problem.boundary.require_compatible(problem.grid.ell)
    op = operator or LinearizedOperator(problem, linear_rtol=config.linear_rtol)
    bvals = boundary_values(problem)
    shape = problem.grid.shape
    if initial is None:
        U, V = np.zeros(shape), np.zeros(shape)
    else:
        U = np.asarray(initial[0], dtype=float).reshape(shape).copy()
        V = np.asarray(initial[1], dtype=float).reshape(shape).copy()

    if config.method == "newton":
        report, U, V = _newton(op, bvals, config, U, V)
    else:
        report = IterationReport(method="picard")
        omega = config.damping
        for _ in range(config.max_iter):
            rem = taylor_remainders(problem, V, problem.grid.gradient(U), op.bfield)
            U_new, V_new = op.solve(rem, bvals)
            if omega < 1.0:
                U_new = U + omega * (U_new - U)
                V_new = V + omega * (V_new - V)
            update = max(float(np.max(np.abs(U_new - U))), float(np.max(np.abs(V_new - V))))
            U, V = U_new, V_new
            report.record(update)
            log.debug("picard iteration %d: update=%.3e", report.iterations, update)
            _check_growth(report)
            if update <= config.tol:
                r, _ = op.residual(U, V, bvals)
                report.nonlinear_residual = float(np.max(np.abs(r))) if r.size else 0.0
                if report.nonlinear_residual <= 10.0 * config.tol:
                    report.converged = True
                    break

    if not report.converged:
        log.warning(
            "%s iteration stopped after %d iterations without convergence (last update %.3g)",
            report.method, report.iterations, report.residual_history[-1],
        )
    state = reconstruct_state(problem, U, V)
    log.info(
        "%s %s solve: converged=%s iterations=%d margin_min=%.6g",
        problem.formulation.value, report.method, report.converged, report.iterations,
        state.margin_min,
    )
    return state, report


def _newton(
    op: LinearizedOperator,
    bvals: LinearBoundaryValues,
    config: PicardConfig,
    U: np.ndarray,
    V: np.ndarray,
) -> tuple[IterationReport, np.ndarray, np.ndarray]:
    report = IterationReport(method="newton")
    x = np.concatenate([U.ravel(), V.ravel()])
    x[op.fixed_idx] = op.fixed_values(bvals)
    free = op.free_idx
    for _ in range(config.max_iter):
        Ug, Vg = op.split(x)
        r, _ = op.residual(Ug, Vg, bvals)
        jac = (op.matrix - op.remainder_jacobian(Ug, Vg))[free][:, free]
        try:
            delta = spla.spsolve(sp.csc_matrix(jac), -r)
        except RuntimeError as e:
            raise SingularAssemblyError(f"Newton matrix is singular: {e}") from e
        x[free] += config.damping * delta
        update = float(np.max(np.abs(config.damping * delta)))
        report.record(update)
        log.debug("newton iteration %d: update=%.3e", report.iterations, update)
        _check_growth(report)
        if update <= config.tol:
            r, _ = op.residual(*op.split(x), bvals)
            report.nonlinear_residual = float(np.max(np.abs(r))) if r.size else 0.0
            if report.nonlinear_residual <= 10.0 * config.tol:
                report.converged = True
                break
    U, V = op.split(x)
    return report, U, V


# =============================================================================
# Diagnostics
# =============================================================================


def cross_section_fluxes(problem: NozzleProblem, state: SolutionState) -> np.ndarray:
    """Mass flux through each cross-section.

    Potential case: the scheme's conservative x1-face fluxes, one value per face
    column between x1 nodes. Stream case: psi(x1, ell) - psi(x1, 0) per node column.
    """
    if problem.formulation is Formulation.STREAM:
        return state.primary.values[:, -1] - state.primary.values[:, 0]
    grid = problem.grid
    bf = background_field(problem)
    co = linear_coefficients(problem, bf)
    U = state.perturbation.values
    V = state.Phi_perturbation.values
    rem = taylor_remainders(problem, V, grid.gradient(U), bf)
    F1 = rem.F[..., 0]
    G = (
        _faces(co.a11)[:, None] * (U[1:] - U[:-1]) / grid.hx
        + _faces(co.c1)[:, None] * 0.5 * (V[1:] + V[:-1])
        - 0.5 * (F1[1:] + F1[:-1])
    )
    return problem.background.J * grid.ell + G @ grid.wy


def bernoulli_invariant_error(problem: NozzleProblem, state: SolutionState) -> float:
    """max |Bernoulli(rho, grad) - Phi - K| over the nodes."""
    res = problem.model.bernoulli_residual(state.Phi.values, state.grad, state.rho.values)
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class CoercivityReport:
    min_quotient: float
    quotients: np.ndarray
    lambda0: float
    kappa_bound: float


def coercivity_probe(
    problem: NozzleProblem, n_samples: int = 32, seed: int = 0
) -> CoercivityReport:
    """Discrete B1[(U,V),U] + B2[(U,V),V] minus lambda0 |grad U|^2 + |grad V|^2 / (2|mu|).

    Trial fields are random nodal values vanishing on the essential boundaries.
    Each quotient divides the margin by |grad U|^2 + |grad V|^2.
    """
    grid = problem.grid
    op = LinearizedOperator(problem)
    co = op.coefficients
    W = grid.weights
    kappa_bound = 1.0 / (2.0 * abs(problem.doping.mu))
    rng = np.random.default_rng(seed)

    def col(values: np.ndarray) -> np.ndarray:
        return values[:, None]

    quotients = []
    while len(quotients) < n_samples:
        U = rng.standard_normal(grid.shape)
        V = rng.standard_normal(grid.shape)
        U.ravel()[op.u_fixed] = 0.0
        V.ravel()[op.v_fixed] = 0.0
        gU, gV = grid.gradient(U), grid.gradient(V)
        gU_sq = np.sum(W * (gU[..., 0] ** 2 + gU[..., 1] ** 2))
        gV_sq = np.sum(W * (gV[..., 0] ** 2 + gV[..., 1] ** 2))
        norm = gU_sq + gV_sq
        if norm == 0.0:
            continue
        form = np.sum(
            W
            * (
                col(co.a11) * gU[..., 0] ** 2
                + col(co.a22) * gU[..., 1] ** 2
                + col(co.kappa) * (gV[..., 0] ** 2 + gV[..., 1] ** 2)
                + col(co.dBdz) * V**2
                + col(co.kappa_prime) * V * gV[..., 0]
                + (col(co.c1) + col(co.dBdq1)) * V * gU[..., 0]
                + (col(co.c2) + col(co.dBdq2)) * V * gU[..., 1]
            )
        )
        bound = co.lambda0 * gU_sq + kappa_bound * gV_sq
        quotients.append(float((form - bound) / norm))
    q = np.array(quotients)
    return CoercivityReport(
        min_quotient=float(q.min()), quotients=q, lambda0=co.lambda0, kappa_bound=kappa_bound
    )
