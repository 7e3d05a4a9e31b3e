from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from . import potential, stream
from .background import BackgroundProfile
from .exceptions import DomainError
from .gas import PressureLaw, enthalpy
from .potential import Jacobians, PotentialPoint
from .stream import StreamPoint


class Formulation(str, Enum):
    POTENTIAL = "potential"
    STREAM = "stream"


@dataclass(frozen=True)
class PotentialModel:
    """Pointwise closure of the potential formulation: q = grad(phi) is the velocity."""

    law: PressureLaw
    K0: float
    formulation: Formulation = Formulation.POTENTIAL
    poisson_sign: float = 1.0

    def _pt(self, z: np.ndarray, q: np.ndarray) -> PotentialPoint:
        return PotentialPoint(z=z, q=q, K0=self.K0)

    def density(self, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        return potential.density(self.law, self._pt(z, q))

    def flux(self, z: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return potential.flux_and_source(self.law, self._pt(z, q))

    def jacobians(self, z: np.ndarray, q: np.ndarray) -> Jacobians:
        return potential.jacobians(self.law, self._pt(z, q))

    def margin(self, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        return potential.subsonic_margin(self.law, self._pt(z, q))

    def velocity(self, q: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return q

    def sound_speed_sq(self, rho: np.ndarray) -> np.ndarray:
        return self.law.dpressure(rho)

    def bernoulli_residual(self, z: np.ndarray, q: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """|q|^2/2 + i(rho) - z - K0."""
        speed_sq = np.einsum("...i,...i->...", q, q)
        return 0.5 * speed_sq + np.asarray(enthalpy(self.law, rho)) - z - self.K0


@dataclass(frozen=True)
class StreamModel:
    """Pointwise closure of the stream formulation: q = grad(psi), rho u = (q2, -q1)."""

    gamma: float
    k0: float
    formulation: Formulation = Formulation.STREAM
    poisson_sign: float = -1.0

    def _pt(self, z: np.ndarray, q: np.ndarray) -> StreamPoint:
        return StreamPoint(z=z, q=q, k0=self.k0, gamma=self.gamma)

    def density(self, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        return stream.density(self._pt(z, q))

    def flux(self, z: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return stream.flux_and_source(self._pt(z, q))

    def jacobians(self, z: np.ndarray, q: np.ndarray) -> Jacobians:
        return stream.stream_jacobians(self._pt(z, q))

    def margin(self, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        return stream.lambda_margin(self._pt(z, q))

    def velocity(self, q: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return np.stack([q[..., 1], -q[..., 0]], axis=-1) / rho[..., None]

    def sound_speed_sq(self, rho: np.ndarray) -> np.ndarray:
        return self.gamma * rho ** (self.gamma - 1.0)

    def bernoulli_residual(self, z: np.ndarray, q: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Bern(rho, q) - z - k0."""
        q_sq = np.einsum("...i,...i->...", q, q)
        return stream.bernoulli(rho, q_sq, self.gamma) - z - self.k0


PointwiseModel = Union[PotentialModel, StreamModel]


def build_model(
    formulation: Formulation, law: PressureLaw, background: BackgroundProfile
) -> PointwiseModel:
    if formulation is Formulation.POTENTIAL:
        return PotentialModel(law=law, K0=background.K0)
    if not law.is_polytropic:
        raise DomainError("the stream formulation requires a polytropic law")
    return StreamModel(gamma=law.gamma, k0=background.stream_constant(law.gamma))


def background_gradient(formulation: Formulation, background: BackgroundProfile) -> np.ndarray:
    """grad of the background primary field at each x1 node, shape (nx+1, 2)."""
    n = len(background.x1)
    q = np.zeros((n, 2))
    if formulation is Formulation.POTENTIAL:
        q[:, 0] = background.u_bar
    else:
        q[:, 1] = background.J
    return q


def background_primary(
    formulation: Formulation, background: BackgroundProfile, x2: np.ndarray
) -> np.ndarray:
    """phi_bar(x1) or psi_bar = J x2 on the (nx+1, ny+1) node array."""
    if formulation is Formulation.POTENTIAL:
        return np.repeat(background.phi_bar[:, None], len(x2), axis=1)
    return np.repeat((background.J * x2)[None, :], len(background.x1), axis=0)
