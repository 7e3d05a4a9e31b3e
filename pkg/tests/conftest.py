"""Shared builders for nozzle problems used across the test modules."""

from __future__ import annotations

from typing import Callable, Optional

import pytest

from eplab.background import DopingProfile, integrate_background
from eplab.expressions import BasisExpansion
from eplab.formulations import Formulation
from eplab.gas import PressureLaw
from eplab.grid import BoundaryData, NozzleGrid
from eplab.solver import NozzleProblem

# Boundary profile vanishing to second order at both walls
GRAVITATIONAL_PROFILE = "poly 1.5 ; cos 0 -2 0 0.5"


def build_problem(
    formulation: str = "potential",
    gamma: float = 1.4,
    w: str = "poly 1",
    b: Optional[str] = None,
    rho0: float = 1.0,
    J: float = 0.5,
    E0: float = 0.1,
    L: float = 1.0,
    ell: float = 0.5,
    nx: int = 16,
    ny: int = 8,
    g0: str = "poly 0",
    h0: str = "poly 0",
    vL: str = "poly 0",
    eps: float = 1.0,
) -> NozzleProblem:
    law = PressureLaw.polytropic(gamma)
    w_exp = BasisExpansion.parse(w, period=L)
    b_exp = BasisExpansion.parse(b, period=L) if b else w_exp.scaled(rho0)
    doping = DopingProfile.from_expansions(w_exp, b_exp, L)
    background = integrate_background(law, doping, J=J, rho0=rho0, E0=E0, L=L, nsteps=nx)
    boundary = BoundaryData(
        g0=BasisExpansion.parse(g0, period=ell),
        h0=BasisExpansion.parse(h0, period=ell),
        vL=BasisExpansion.parse(vL, period=ell),
        case=doping.case,
    ).scaled(eps)
    return NozzleProblem(
        formulation=Formulation(formulation),
        law=law,
        doping=doping,
        background=background,
        grid=NozzleGrid(L=L, ell=ell, nx=nx, ny=ny),
        boundary=boundary,
    )


def electric_data(eps: float) -> dict[str, object]:
    """Small compatible data for the electric case (h0' = 0 at the walls)."""
    return {
        "g0": "poly 0 ; cos 0 1",
        "h0": "poly 0.5 ; cos 1",
        "vL": "poly 0.3 ; cos 0 -1",
        "eps": eps,
    }


def gravitational_data(eps: float) -> dict[str, object]:
    """Gravitational test case: w = -1, gamma = 3, data vanishing at the walls."""
    return {
        "gamma": 3.0,
        "w": "poly -1",
        "g0": GRAVITATIONAL_PROFILE,
        "h0": GRAVITATIONAL_PROFILE,
        "vL": GRAVITATIONAL_PROFILE,
        "eps": eps,
    }


@pytest.fixture
def make_problem() -> Callable[..., NozzleProblem]:
    return build_problem


@pytest.fixture
def electric() -> Callable[[float], dict[str, object]]:
    return electric_data


@pytest.fixture
def gravitational() -> Callable[[float], dict[str, object]]:
    return gravitational_data
