"""One-dimensional subsonic background for the nozzle.

Integrates

    rho' = rho E / (p'(rho) - J^2/rho^2),   E' = w rho - b,
    Phi' = E,                               phi' = J / rho

with fixed-step classical RK4 so the profile lands exactly on the x1 nodes of
the 2D grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .config import DEFAULT_SONIC_FLOOR
from .exceptions import DomainError, DopingSignError, SonicBreakdown, VacuumError
from .expressions import BasisExpansion
from .gas import PressureLaw, enthalpy

log = logging.getLogger(__name__)

Case = Literal["electric", "gravitational"]

# Points used to certify the sign of w and to sample sup|w'|
DOPING_SAMPLES = 2001


@dataclass(frozen=True)
class DopingProfile:
    w: BasisExpansion
    b: BasisExpansion
    case: Case
    L: float
    mu: float
    wprime_sup: float

    @staticmethod
    def from_expansions(
        w: BasisExpansion, b: BasisExpansion, L: float, case: Optional[Case] = None
    ) -> "DopingProfile":
        """Build a profile, checking w is sign-definite on [0, L].

        Case 1 (electric) needs min w > 0, Case 2 (gravitational) needs max w < 0.
        When ``case`` is None it is inferred from the sign of w.
        """
        if L <= 0:
            raise DomainError(f"nozzle length must be positive, got {L}")
        xs = np.linspace(0.0, L, DOPING_SAMPLES)
        wv = w(xs)
        w_min, w_max = float(wv.min()), float(wv.max())
        if case is None:
            case = "electric" if w_min > 0 else "gravitational"
        if case == "electric":
            if w_min <= 0:
                raise DopingSignError(
                    f"Case 1 (electric) requires w > 0 on [0, L]; min w = {w_min:.6g}"
                )
            mu = w_min
        else:
            if w_max >= 0:
                raise DopingSignError(
                    f"Case 2 (gravitational) requires w < 0 on [0, L]; max w = {w_max:.6g}"
                )
            mu = w_max
        return DopingProfile(
            w=w, b=b, case=case, L=L, mu=mu, wprime_sup=w.sup_abs_derivative(L, DOPING_SAMPLES)
        )


@dataclass(frozen=True)
class BackgroundProfile:
    L: float
    J: float
    x1: np.ndarray
    rho_bar: np.ndarray
    E_bar: np.ndarray
    Phi_bar: np.ndarray
    u_bar: np.ndarray
    phi_bar: np.ndarray
    K0: float
    subsonic_margin: float

    @property
    def nsteps(self) -> int:
        return len(self.x1) - 1

    def stream_constant(self, gamma: float) -> float:
        """k0 = u(0)^2/2 + gamma rho(0)^(gamma-1)/(gamma-1) - Phi(0)."""
        if gamma <= 1.0:
            raise DomainError("the stream formulation needs gamma > 1")
        rho0 = float(self.rho_bar[0])
        return (
            0.5 * float(self.u_bar[0]) ** 2
            + gamma * rho0 ** (gamma - 1.0) / (gamma - 1.0)
            - float(self.Phi_bar[0])
        )


def _sonic_gap(law: PressureLaw, rho: float, J: float) -> float:
    return float(law.dpressure(rho)) - J * J / (rho * rho)


def integrate_background(
    law: PressureLaw,
    doping: DopingProfile,
    J: float,
    rho0: float,
    E0: float,
    L: float,
    nsteps: int,
    Phi0: float = 0.0,
    sonic_floor: float = DEFAULT_SONIC_FLOOR,
) -> BackgroundProfile:
    if rho0 <= 0:
        raise VacuumError(f"initial density must be positive, got {rho0}")
    if J <= 0:
        raise DomainError(f"mass flux J must be positive, got {J}")
    if nsteps < 1:
        raise DomainError("nsteps must be >= 1")
    gap0 = _sonic_gap(law, rho0, J)
    if gap0 < sonic_floor:
        raise SonicBreakdown(
            f"initial state not subsonic at x1 = 0: p'(rho0) - J^2/rho0^2 = {gap0:.6g}"
        )

    w, b = doping.w, doping.b

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        rho, E = y[0], y[1]
        if not rho > 0:
            raise VacuumError(f"background density reached {rho:.6g} near x1 = {x:.6g}")
        gap = _sonic_gap(law, rho, J)
        if gap < sonic_floor:
            raise SonicBreakdown(
                f"background lost subsonicity near x1 = {x:.6g}: p' - u^2 = {gap:.6g}"
            )
        return np.array(
            [rho * E / gap, float(w(x)) * rho - float(b(x)), E, J / rho], dtype=float
        )

    h = L / nsteps
    x1 = np.linspace(0.0, L, nsteps + 1)
    ys = np.empty((nsteps + 1, 4))
    ys[0] = (rho0, E0, Phi0, 0.0)
    for n in range(nsteps):
        x, y = x1[n], ys[n]
        k1 = rhs(x, y)
        k2 = rhs(x + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(x + h, y + h * k3)
        ys[n + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    rho, E, Phi, phi = ys[:, 0].copy(), ys[:, 1].copy(), ys[:, 2].copy(), ys[:, 3].copy()
    if np.any(rho <= 0):
        raise VacuumError("background density became non-positive")
    u = J / rho
    gaps = law.dpressure(rho) - u * u
    margin = float(np.min(gaps))
    if margin < sonic_floor:
        idx = int(np.argmin(gaps))
        raise SonicBreakdown(f"background lost subsonicity at x1 = {x1[idx]:.6g}")

    K0 = 0.5 * u[0] ** 2 + float(enthalpy(law, rho[0])) - Phi[0]
    log.info(
        "Integrated background: nsteps=%d J=%.6g rho in [%.6g, %.6g] margin=%.6g",
        nsteps, J, rho.min(), rho.max(), margin,
    )
    return BackgroundProfile(
        L=L,
        J=J,
        x1=x1,
        rho_bar=rho,
        E_bar=E,
        Phi_bar=Phi,
        u_bar=u,
        phi_bar=phi,
        K0=float(K0),
        subsonic_margin=margin,
    )


def mach_profile(profile: BackgroundProfile, law: PressureLaw) -> np.ndarray:
    return profile.u_bar / np.sqrt(law.dpressure(profile.rho_bar))


def bernoulli_drift(profile: BackgroundProfile, law: PressureLaw) -> float:
    """max |u^2/2 + i(rho) - Phi - K0| over the nodes."""
    values = (
        0.5 * profile.u_bar**2
        + np.asarray(enthalpy(law, profile.rho_bar))
        - profile.Phi_bar
    )
    return float(np.max(np.abs(values - profile.K0)))


def equilibrium_doping(w: BasisExpansion, rho0: float, L: float) -> DopingProfile:
    """Doping with b = w rho0, for which (rho0, E=0) is a fixed point."""
    return DopingProfile.from_expansions(w, w.scaled(rho0), L)

