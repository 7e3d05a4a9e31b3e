"""Reproducible coefficient functions on a fixed basis.

Doping profiles and boundary data are given as

    f(x) = sum_k p_k x^k + sum_{k>=1} c_k cos(k pi x / period)

so a run is fully described by a handful of numbers. The text grammar used in
config files is ``poly 1.0 0.0 0.5 ; cos 0.0 0.1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import ConfigError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class BasisExpansion:
    poly: tuple[float, ...] = ()
    cos: tuple[float, ...] = ()
    period: float = 1.0

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ConfigError(f"basis period must be positive, got {self.period}")
        for c in (*self.poly, *self.cos):
            if not np.isfinite(c):
                raise ConfigError("basis coefficients must be finite")

    @staticmethod
    def constant(value: float, period: float = 1.0) -> "BasisExpansion":
        return BasisExpansion(poly=(float(value),), period=period)

    @staticmethod
    def parse(text: str, period: float) -> "BasisExpansion":
        """Parse ``poly c0 c1 ... ; cos a1 a2 ...`` (either part optional)."""
        poly: list[float] = []
        cos: list[float] = []
        seen: set[str] = set()
        for part in text.split(";"):
            tokens = part.split()
            if not tokens:
                continue
            kind, values = tokens[0].lower(), tokens[1:]
            if kind not in ("poly", "cos"):
                raise ConfigError(f"unknown basis kind {kind!r} (expected poly or cos)")
            if kind in seen:
                raise ConfigError(f"basis kind {kind!r} given twice")
            seen.add(kind)
            try:
                coeffs = [float(v) for v in values]
            except ValueError as e:
                raise ConfigError(f"bad coefficient in {part.strip()!r}: {e}") from e
            (poly if kind == "poly" else cos).extend(coeffs)
        return BasisExpansion(poly=tuple(poly), cos=tuple(cos), period=period)

    def to_text(self) -> str:
        parts = []
        if self.poly:
            parts.append("poly " + " ".join(repr(c) for c in self.poly))
        if self.cos:
            parts.append("cos " + " ".join(repr(c) for c in self.cos))
        return " ; ".join(parts) if parts else "poly 0.0"

    def scaled(self, factor: float) -> "BasisExpansion":
        return BasisExpansion(
            poly=tuple(factor * c for c in self.poly),
            cos=tuple(factor * c for c in self.cos),
            period=self.period,
        )

    def _wavenumbers(self) -> np.ndarray:
        return np.arange(1, len(self.cos) + 1) * np.pi / self.period

    def __call__(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, self.poly) if self.poly else np.zeros_like(x)
        for k, c in zip(self._wavenumbers(), self.cos):
            if c != 0.0:
                out = out + c * np.cos(k * x)
        return np.asarray(out, dtype=float)

    def derivative(self, x: ArrayLike, order: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.poly and len(self.poly) > order:
            out = P.polyval(x, P.polyder(self.poly, order))
        else:
            out = np.zeros_like(x)
        # d^n/dx^n cos(kx) = k^n cos(kx + n pi/2)
        for k, c in zip(self._wavenumbers(), self.cos):
            if c != 0.0:
                out = out + c * k**order * np.cos(k * x + order * np.pi / 2)
        return np.asarray(out, dtype=float)

    def antiderivative(self, x: ArrayLike) -> np.ndarray:
        """Exact integral from 0 to x."""
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, P.polyint(self.poly)) if self.poly else np.zeros_like(x)
        for k, c in zip(self._wavenumbers(), self.cos):
            if c != 0.0:
                out = out + (c / k) * np.sin(k * x)
        return np.asarray(out, dtype=float)

    def sup_abs_derivative(self, length: float, samples: int = 2001) -> float:
        xs = np.linspace(0.0, length, samples)
        return float(np.max(np.abs(self.derivative(xs))))
