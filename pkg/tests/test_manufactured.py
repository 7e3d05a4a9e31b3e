"""Grid convergence of the linear solve against a manufactured solution.

Given smooth (U*, V*), the remainders F and f are chosen so that (U*, V*)
solves the linear boundary value problem exactly; the discrete solution must
then converge at second order.
"""

from __future__ import annotations

import numpy as np
import pytest

from eplab.solver import (
    LinearBoundaryValues,
    assemble_linear_system,
    linear_coefficients,
    solve_linear,
)

L, ELL = 1.0, 0.5
K = np.pi / ELL

GRIDS = [(32, 16), (64, 32), (128, 64)]


def _exact(X1: np.ndarray, X2: np.ndarray) -> dict[str, np.ndarray]:
    grow, wave = np.exp(0.5 * X1), np.cos(K * X2)
    cos15 = np.cos(1.5 * X1)
    return {
        "U": 0.3 * grow * wave + 0.1 * X1**2,
        "U1": 0.15 * grow * wave + 0.2 * X1,
        "U2": -0.3 * K * grow * np.sin(K * X2),
        "V": 0.2 * cos15 * wave + 0.1 * X1,
        "V1": -0.3 * np.sin(1.5 * X1) * wave + 0.1,
        "lapV": -(0.45 + 0.2 * K * K) * cos15 * wave,
    }


def _max_error(make_problem, formulation: str, nx: int, ny: int) -> float:
    problem = make_problem(formulation=formulation, nx=nx, ny=ny, L=L, ell=ELL)
    grid = problem.grid
    X1, X2 = grid.mesh()
    ex = _exact(X1, X2)
    co = linear_coefficients(problem)

    def col(values: np.ndarray) -> np.ndarray:
        return values[:, None]

    F = np.stack(
        [
            col(co.a11) * ex["U1"] + col(co.c1) * ex["V"],
            col(co.a22) * ex["U2"] + col(co.c2) * ex["V"],
        ],
        axis=-1,
    )
    f = (
        col(co.kappa) * ex["lapV"]
        - col(co.dBdz) * ex["V"]
        - (col(co.dBdq1) * ex["U1"] + col(co.dBdq2) * ex["U2"])
    )
    bvals = LinearBoundaryValues(
        u_dirichlet=ex["U"],
        v_dirichlet=ex["V"],
        g_in=np.zeros(grid.ny + 1),
        v_out=ex["V1"][-1],
    )
    U, V = solve_linear(assemble_linear_system(problem, F, f, bvals))
    return max(
        float(np.max(np.abs(U.values - ex["U"]))), float(np.max(np.abs(V.values - ex["V"])))
    )


class TestManufacturedSolution:
    """Second-order convergence of the linearized solve."""

    @pytest.mark.parametrize("formulation", ["potential", "stream"])
    def test_second_order(self, make_problem, formulation):
        errors = [_max_error(make_problem, formulation, nx, ny) for nx, ny in GRIDS]
        assert errors[-1] < 1e-3
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.0 <= coarse / fine <= 5.0

    def test_zero_data_gives_zero(self, make_problem):
        problem = make_problem()
        grid = problem.grid
        system = assemble_linear_system(
            problem,
            np.zeros(grid.shape + (2,)),
            np.zeros(grid.shape),
            LinearBoundaryValues.zeros(grid),
        )
        assert system.matrix.shape[0] == len(system.rhs)
        U, V = solve_linear(system)
        np.testing.assert_array_equal(U.values, 0.0)
        np.testing.assert_array_equal(V.values, 0.0)
