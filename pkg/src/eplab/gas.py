"""Barotropic pressure laws and their enthalpy.

The enthalpy is i(rho) = int_1^rho p'(s)/s ds. Polytropic laws p = rho^gamma use
the closed forms; custom laws given as callables fall back to adaptive quadrature
and a bracketed root solve.

Usage:
    from eplab.gas import PressureLaw, enthalpy, enthalpy_inverse

    law = PressureLaw.polytropic(1.4)
    rho = enthalpy_inverse(law, enthalpy(law, 2.0))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Union

import numpy as np
from scipy import integrate, optimize

from .exceptions import DomainError, VacuumError

ArrayLike = Union[float, np.ndarray]
Scalar1D = Callable[[float], float]

# Sampling grid used to check the law's structural assumptions
LAW_CHECK_GRID = np.logspace(-6, 6, 121)

# Relative step of the centered difference for custom-law convexity residuals
FD_RELATIVE_STEP = 1e-6


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True)
class PressureLaw:
    kind: Literal["polytropic", "custom"]
    gamma: float = 1.0
    p: Optional[Scalar1D] = None
    dp: Optional[Scalar1D] = None
    d2p: Optional[Scalar1D] = None

    def __post_init__(self) -> None:
        if self.kind == "polytropic":
            if not (self.gamma >= 1.0 and math.isfinite(self.gamma)):
                raise DomainError(f"polytropic exponent must be >= 1, got {self.gamma}")
            return
        if self.p is None or self.dp is None or self.d2p is None:
            raise DomainError("custom pressure law needs p, dp and d2p evaluators")
        _check_custom_law(self)

    @staticmethod
    def polytropic(gamma: float) -> "PressureLaw":
        return PressureLaw(kind="polytropic", gamma=float(gamma))

    @staticmethod
    def custom(p: Scalar1D, dp: Scalar1D, d2p: Scalar1D) -> "PressureLaw":
        return PressureLaw(kind="custom", p=p, dp=dp, d2p=d2p)

    @property
    def is_polytropic(self) -> bool:
        return self.kind == "polytropic"

    def pressure(self, rho: ArrayLike) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.is_polytropic:
            return rho**self.gamma
        return np.vectorize(self.p, otypes=[float])(rho)

    def dpressure(self, rho: ArrayLike) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.is_polytropic:
            return self.gamma * rho ** (self.gamma - 1.0)
        return np.vectorize(self.dp, otypes=[float])(rho)

    def d2pressure(self, rho: ArrayLike) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.is_polytropic:
            if self.gamma == 1.0:
                return np.zeros_like(rho)
            return self.gamma * (self.gamma - 1.0) * rho ** (self.gamma - 2.0)
        return np.vectorize(self.d2p, otypes=[float])(rho)

    def vacuum_limit(self) -> float:
        """lim_{rho -> 0+} i(rho); -inf when the enthalpy is unbounded below."""
        if self.is_polytropic:
            if self.gamma == 1.0:
                return -math.inf
            return -self.gamma / (self.gamma - 1.0)
        coarse = _custom_enthalpy(self, 1e-8)
        fine = _custom_enthalpy(self, 1e-12)
        if abs(fine - coarse) <= 1e-6 * (1.0 + abs(coarse)):
            return fine
        return -math.inf


def _check_custom_law(law: PressureLaw) -> None:
    grid = LAW_CHECK_GRID
    p = law.pressure(grid)
    dp = law.dpressure(grid)
    d2p = law.d2pressure(grid)
    if not np.all(np.isfinite(p)) or not np.all(np.isfinite(dp)):
        raise DomainError("custom pressure law is not finite on the check grid")
    if abs(float(law.pressure(0.0))) > 1e-12:
        raise DomainError("custom pressure law must satisfy p(0) = 0")
    if p[-1] <= p[0] * 1e3:
        raise DomainError("custom pressure law must grow without bound")
    if np.any(dp <= 0):
        raise DomainError("custom pressure law must have p' > 0")
    if np.any(d2p < -1e-12 * np.abs(dp)):
        raise DomainError("custom pressure law must have p'' >= 0")


def _custom_enthalpy(law: PressureLaw, rho: float) -> float:
    assert law.dp is not None
    dp = law.dp
    value, _ = integrate.quad(lambda s: dp(s) / s, 1.0, rho, epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(value)


def _check_density(rho: np.ndarray) -> None:
    bad = ~(rho > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise DomainError(f"density must be positive, got {rho.flat[idx]} at index {idx}")


def enthalpy(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    rho_arr = np.asarray(rho, dtype=float)
    _check_density(rho_arr)
    if law.is_polytropic:
        g = law.gamma
        if g == 1.0:
            out = np.log(rho_arr)
        else:
            out = g * (rho_arr ** (g - 1.0) - 1.0) / (g - 1.0)
    else:
        out = np.vectorize(lambda r: _custom_enthalpy(law, r), otypes=[float])(rho_arr)
    return _as_output(np.asarray(out, dtype=float))


def enthalpy_inverse(law: PressureLaw, s: ArrayLike) -> ArrayLike:
    s_arr = np.asarray(s, dtype=float)
    limit = law.vacuum_limit()
    bad = ~(s_arr > limit)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise VacuumError(
            f"enthalpy {s_arr.flat[idx]} at or below vacuum limit {limit} "
            f"({int(bad.sum())} point(s))",
            index=idx,
        )
    if law.is_polytropic:
        g = law.gamma
        if g == 1.0:
            out = np.exp(s_arr)
        else:
            out = (1.0 + (g - 1.0) * s_arr / g) ** (1.0 / (g - 1.0))
    else:
        out = np.vectorize(lambda v: _custom_inverse(law, v), otypes=[float])(s_arr)
    return _as_output(np.asarray(out, dtype=float))


def _custom_inverse(law: PressureLaw, s: float) -> float:
    lo, hi = 1.0, 1.0
    while _custom_enthalpy(law, hi) < s:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError(f"enthalpy value {s} out of range")
    while _custom_enthalpy(law, lo) > s:
        lo *= 0.5
        if lo < 1e-300:
            raise VacuumError(f"enthalpy value {s} not attained above vacuum")
    if lo == hi:
        return lo
    return float(
        optimize.brentq(lambda r: _custom_enthalpy(law, r) - s, lo, hi, xtol=1e-300, rtol=1e-14)
    )


def sound_speed(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    rho_arr = np.asarray(rho, dtype=float)
    _check_density(rho_arr)
    return _as_output(np.sqrt(law.dpressure(rho_arr)))


def uniqueness_condition_residual(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    """d/drho (rho p''/p'); a value <= 0 certifies the uniqueness hypothesis at rho."""
    rho_arr = np.asarray(rho, dtype=float)
    _check_density(rho_arr)
    if law.is_polytropic:
        # rho p''/p' = gamma - 1 is constant
        return _as_output(np.zeros_like(rho_arr))

    def ratio(r: np.ndarray) -> np.ndarray:
        return r * law.d2pressure(r) / law.dpressure(r)

    h = FD_RELATIVE_STEP * rho_arr
    out = (ratio(rho_arr + h) - ratio(rho_arr - h)) / (2.0 * h)
    return _as_output(np.asarray(out, dtype=float))
