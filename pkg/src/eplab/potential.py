"""Potential formulation: density recovery from the pseudo-Bernoulli law.

With velocity q = grad(phi) and electrostatic potential z = Phi,

    i(rho) = K0 + z - |q|^2 / 2,   A(z, q) = rho q,   B(z, q) = rho.

All functions broadcast over leading axes: ``z`` has shape S and ``q`` shape S + (2,).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .gas import PressureLaw, enthalpy_inverse

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PotentialPoint:
    z: ArrayLike
    q: np.ndarray
    K0: float

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(self.z, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if q.shape[-1] != 2:
            raise ValueError(f"q must have a trailing axis of length 2, got shape {q.shape}")
        return z, q


class Jacobians(NamedTuple):
    dA_dq: np.ndarray  # S + (2, 2), dA_i/dq_j
    dA_dz: np.ndarray  # S + (2,)
    dB_dq: np.ndarray  # S + (2,)
    dB_dz: np.ndarray  # S


def _speed_sq(q: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", q, q)


def density(law: PressureLaw, pt: PotentialPoint) -> np.ndarray:
    z, q = pt.arrays()
    return np.asarray(enthalpy_inverse(law, pt.K0 + z - 0.5 * _speed_sq(q)), dtype=float)


def flux_and_source(law: PressureLaw, pt: PotentialPoint) -> tuple[np.ndarray, np.ndarray]:
    _, q = pt.arrays()
    rho = density(law, pt)
    return rho[..., None] * q, rho


def jacobians(law: PressureLaw, pt: PotentialPoint) -> Jacobians:
    _, q = pt.arrays()
    rho = density(law, pt)
    dp = law.dpressure(rho)
    eye = np.eye(2)
    dA_dq = rho[..., None, None] * (eye - q[..., :, None] * q[..., None, :] / dp[..., None, None])
    s = rho / dp
    dA_dz = s[..., None] * q
    # dA/dz + dB/dq = 0 holds exactly
    return Jacobians(dA_dq=dA_dq, dA_dz=dA_dz, dB_dq=-dA_dz, dB_dz=s)


def subsonic_margin(law: PressureLaw, pt: PotentialPoint) -> np.ndarray:
    _, q = pt.arrays()
    rho = density(law, pt)
    return law.dpressure(rho) - _speed_sq(q)


def ellipticity_lower_bound(law: PressureLaw, pt: PotentialPoint) -> np.ndarray:
    """rho (1 - |q|^2/p'(rho)): smallest eigenvalue of dA/dq."""
    _, q = pt.arrays()
    rho = density(law, pt)
    return rho * (1.0 - _speed_sq(q) / law.dpressure(rho))
