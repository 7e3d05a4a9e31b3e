"""Stream-function formulation for polytropic flow p = rho^gamma.

With momentum flux q = grad(psi) (rho u = (d2 psi, -d1 psi)) the density solves

    Bern(rho, q) = |q|^2 / (2 rho^2) + gamma rho^(gamma-1) / (gamma-1) = k0 + z.

For k0 + z above the sonic value Bern(rho_s(q), q) there are two roots,
rho_sup < rho_s(q) < rho_sub; the solver only ever uses rho_sub.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .exceptions import DomainError, NoSubsonicRoot, SonicDegeneracy
from .potential import Jacobians

ArrayLike = Union[float, np.ndarray]

# Bisection stops once the bracket is this fraction of rho_s wide; Newton finishes
BISECTION_RELATIVE_WIDTH = 1e-3
MAX_BISECTION_STEPS = 200
MAX_NEWTON_STEPS = 60

# gamma rho^(gamma+1) - |q|^2 must stay above this fraction of gamma rho^(gamma+1)
DEFAULT_DEGENERACY_FLOOR = 1e-10


@dataclass(frozen=True)
class StreamPoint:
    z: ArrayLike
    q: np.ndarray
    k0: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise DomainError(
                f"stream formulation needs gamma > 1 (got {self.gamma}); "
                "use the potential formulation for isothermal flow"
            )

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(self.z, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if q.shape[-1] != 2:
            raise ValueError(f"q must have a trailing axis of length 2, got shape {q.shape}")
        return z, q


class DensityRoots(NamedTuple):
    rho_sub: np.ndarray
    rho_sup: np.ndarray


def _q_sq(q: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", q, q)


def bernoulli(rho: ArrayLike, q_sq: ArrayLike, gamma: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return np.asarray(q_sq) / (2.0 * rho * rho) + gamma * rho ** (gamma - 1.0) / (gamma - 1.0)


def sonic_constant(gamma: float) -> float:
    """C(gamma) with Bern(rho_s(q), q) = C(gamma) |q|^(2(gamma-1)/(gamma+1))."""
    if not gamma > 1.0:
        raise DomainError("C(gamma) is only defined for gamma > 1")
    return gamma * (gamma + 1.0) / (2.0 * (gamma - 1.0)) * gamma ** (-(gamma - 1.0) / (gamma + 1.0))


def sonic_exponent(gamma: float) -> float:
    return 2.0 * (gamma - 1.0) / (gamma + 1.0)


def sonic_density(pt: StreamPoint) -> np.ndarray:
    _, q = pt.arrays()
    return (_q_sq(q) / pt.gamma) ** (1.0 / (pt.gamma + 1.0))


def sonic_bernoulli(pt: StreamPoint) -> np.ndarray:
    _, q = pt.arrays()
    norm = np.sqrt(_q_sq(q))
    return sonic_constant(pt.gamma) * norm ** sonic_exponent(pt.gamma)


def lambda_margin(pt: StreamPoint) -> np.ndarray:
    z, _ = pt.arrays()
    return pt.k0 + z - sonic_bernoulli(pt)


def non_vacuum_bound(gamma: float, lam: float) -> float:
    """Lower bound of rho_sub over the lambda-set."""
    return ((gamma - 1.0) * lam / gamma) ** (1.0 / (gamma - 1.0))


def _bracketed_newton(
    f: Callable[[np.ndarray], np.ndarray],
    df: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    increasing: bool,
    width_target: np.ndarray,
) -> np.ndarray:
    lo, hi = lo.copy(), hi.copy()

    def shrink(x: np.ndarray, fx: np.ndarray) -> None:
        above = fx >= 0 if increasing else fx <= 0
        hi[above] = x[above]
        lo[~above] = x[~above]

    for _ in range(MAX_BISECTION_STEPS):
        wide = (hi - lo) > width_target
        if not np.any(wide):
            break
        mid = 0.5 * (lo + hi)
        x = np.where(wide, mid, lo)
        # narrow elements re-evaluate lo, which leaves their bracket intact
        shrink(x, f(x))

    x = 0.5 * (lo + hi)
    for _ in range(MAX_NEWTON_STEPS):
        fx = f(x)
        shrink(x, fx)
        candidate = x - fx / df(x)
        outside = ~((candidate >= lo) & (candidate <= hi)) | ~np.isfinite(candidate)
        candidate = np.where(outside, 0.5 * (lo + hi), candidate)
        done = np.abs(candidate - x) <= 4.0 * np.finfo(float).eps * np.abs(x)
        x = candidate
        if np.all(done):
            break
    return x


def solve_density_roots(pt: StreamPoint) -> DensityRoots:
    z, q = pt.arrays()
    g = pt.gamma
    K = np.broadcast_to(pt.k0 + z, q.shape[:-1]).astype(float)
    q_sq = np.broadcast_to(_q_sq(q), K.shape).astype(float)
    shape = K.shape
    # 1-d buffers: masked assignment fails on 0-d results
    K, q_sq = K.reshape(-1), q_sq.reshape(-1)

    margin = K - sonic_constant(g) * np.sqrt(q_sq) ** sonic_exponent(g)
    bad = ~(margin > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NoSubsonicRoot(
            f"k0 + z = {K.flat[idx]:.6g} does not exceed the sonic value "
            f"{K.flat[idx] - margin.flat[idx]:.6g} ({int(bad.sum())} point(s))",
            index=idx,
        )

    rest = ((g - 1.0) * K / g) ** (1.0 / (g - 1.0))
    moving = q_sq > 0
    rho_sub = rest.copy()
    rho_sup = np.zeros_like(rest)
    if np.any(moving):
        qs = q_sq[moving]
        Ks = K[moving]
        rho_s = (qs / g) ** (1.0 / (g + 1.0))

        def f(r: np.ndarray) -> np.ndarray:
            return bernoulli(r, qs, g) - Ks

        def df(r: np.ndarray) -> np.ndarray:
            return -qs / r**3 + g * r ** (g - 2.0)

        width = BISECTION_RELATIVE_WIDTH * rho_s
        hi_sub = np.maximum(rest[moving], rho_s)
        rho_sub[moving] = _bracketed_newton(f, df, rho_s, hi_sub, True, width)
        lo_sup = np.sqrt(qs / (2.0 * Ks))
        rho_sup[moving] = _bracketed_newton(f, df, lo_sup, rho_s, False, width)
    return DensityRoots(rho_sub=rho_sub.reshape(shape), rho_sup=rho_sup.reshape(shape))


def density(pt: StreamPoint) -> np.ndarray:
    return solve_density_roots(pt).rho_sub


def flux_and_source(pt: StreamPoint) -> tuple[np.ndarray, np.ndarray]:
    """A = q / rho_sub, B = -rho_sub."""
    _, q = pt.arrays()
    rho = density(pt)
    return q / rho[..., None], -rho


def stream_jacobians(
    pt: StreamPoint, degeneracy_floor: float = DEFAULT_DEGENERACY_FLOOR
) -> Jacobians:
    _, q = pt.arrays()
    g = pt.gamma
    rho = density(pt)
    scale = g * rho ** (g + 1.0)
    den = scale - _q_sq(q)
    bad = den <= degeneracy_floor * scale
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise SonicDegeneracy(
            f"subsonic root too close to sonic: gamma rho^(gamma+1) - |q|^2 = {den.flat[idx]:.3g}",
            index=idx,
        )
    eye = np.eye(2)
    dA_dq = (eye + q[..., :, None] * q[..., None, :] / den[..., None, None]) / rho[..., None, None]
    drho_dz = rho**3 / den
    dA_dz = -(rho / den)[..., None] * q
    return Jacobians(dA_dq=dA_dq, dA_dz=dA_dz, dB_dq=-dA_dz, dB_dz=-drho_dz)


def kappa_star(pt: StreamPoint) -> np.ndarray:
    """gamma rho_sub^(gamma+1) - |q|^2, positive on the subsonic branch."""
    _, q = pt.arrays()
    rho = density(pt)
    return pt.gamma * rho ** (pt.gamma + 1.0) - _q_sq(q)

