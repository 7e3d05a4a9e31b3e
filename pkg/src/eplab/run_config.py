"""Experiment description read from a plain-text key=value file.

Grammar: one ``key = value`` per line; blank lines and lines starting with ``#``
are ignored. Basis expressions use ``poly c0 c1 ... ; cos a1 a2 ...`` (see
``eplab.expressions``). x1 functions (w, b) are periodic in L, x2 functions
(g0, h0, vL) in ell.

Example:
    gamma = 1.4
    L = 1.0
    ell = 0.5
    nx = 64
    ny = 32
    w_expr = poly 1
    b_expr = poly 1
    h0_expr = poly 0 ; cos 0 0.01
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .background import BackgroundProfile, DopingProfile, integrate_background
from .config import DEFAULT_LINEAR_RTOL, DEFAULT_SONIC_FLOOR
from .exceptions import CompatibilityError, ConfigError, DopingSignError
from .expressions import BasisExpansion
from .formulations import Formulation
from .gas import PressureLaw
from .grid import BoundaryData, NozzleGrid
from .solver import NozzleProblem, PicardConfig

log = logging.getLogger(__name__)

X1_EXPRESSIONS = ("w_expr", "b_expr")
X2_EXPRESSIONS = ("g0_expr", "h0_expr", "vL_expr")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Gas and nozzle
    gamma: float = 1.4
    case: Optional[Literal["electric", "gravitational"]] = None
    L: float = 1.0
    ell: float = 0.5
    nx: int = 32
    ny: int = 16

    # Background inflow state
    J: float = 0.5
    rho0: float = 1.0
    E0: float = 0.0
    Phi0: float = 0.0

    # Coefficients and boundary data
    w_expr: str = "poly 1"
    b_expr: str = "poly 1"
    g0_expr: str = "poly 0"
    h0_expr: str = "poly 0"
    vL_expr: str = "poly 0"

    # Nonlinear iteration
    formulation: Literal["potential", "stream"] = "potential"
    method: Literal["picard", "newton"] = "picard"
    tol: float = 1e-10
    max_iter: int = 100
    damping: float = 1.0

    # Audits and experiments
    delta: float = 0.1
    lam: float = 0.1
    n_pairs: int = 10_000
    n_t_samples: int = 11
    n_samples: int = 32
    n_starts: int = 3
    start_scale: float = 1e-3
    seed: int = 0

    @field_validator("gamma")
    @classmethod
    def _gamma_at_least_one(cls, v: float) -> float:
        if not v >= 1.0:
            raise ValueError("gamma must be >= 1")
        return v

    @field_validator("L", "ell", "J", "rho0", "tol", "delta", "lam", "start_scale")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("nx", "ny")
    @classmethod
    def _enough_cells(cls, v: int) -> int:
        if v < 4:
            raise ValueError("must be >= 4")
        return v

    @field_validator("max_iter", "n_pairs", "n_samples", "n_starts")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("n_t_samples")
    @classmethod
    def _segment_samples(cls, v: int) -> int:
        if v < 3:
            raise ValueError("must be >= 3")
        return v

    @field_validator("damping")
    @classmethod
    def _damping_range(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("must lie in (0, 1]")
        return v

    @field_validator("seed")
    @classmethod
    def _unsigned_seed(cls, v: int) -> int:
        if not 0 <= v < 2**64:
            raise ValueError("must be an unsigned 64-bit integer")
        return v

    @field_validator(*X1_EXPRESSIONS, *X2_EXPRESSIONS)
    @classmethod
    def _expression_grammar(cls, v: str) -> str:
        try:
            BasisExpansion.parse(v, period=1.0)
        except ConfigError as e:
            raise ValueError(str(e)) from e
        return v.strip()

    # -------------------------------------------------------------------------
    # Builders
    # -------------------------------------------------------------------------

    def law(self) -> PressureLaw:
        return PressureLaw.polytropic(self.gamma)

    def expansion(self, key: str) -> BasisExpansion:
        period = self.L if key in X1_EXPRESSIONS else self.ell
        return BasisExpansion.parse(getattr(self, key), period=period)

    def doping(self) -> DopingProfile:
        return DopingProfile.from_expansions(
            self.expansion("w_expr"), self.expansion("b_expr"), self.L, case=self.case
        )

    def boundary(self) -> BoundaryData:
        return BoundaryData(
            g0=self.expansion("g0_expr"),
            h0=self.expansion("h0_expr"),
            vL=self.expansion("vL_expr"),
            case=self.doping().case,
        )

    def grid(self) -> NozzleGrid:
        return NozzleGrid(L=self.L, ell=self.ell, nx=self.nx, ny=self.ny)

    def background(self, sonic_floor: float = DEFAULT_SONIC_FLOOR) -> BackgroundProfile:
        return integrate_background(
            self.law(),
            self.doping(),
            J=self.J,
            rho0=self.rho0,
            E0=self.E0,
            L=self.L,
            nsteps=self.nx,
            Phi0=self.Phi0,
            sonic_floor=sonic_floor,
        )

    def problem(
        self, formulation: Optional[str] = None, sonic_floor: float = DEFAULT_SONIC_FLOOR
    ) -> NozzleProblem:
        return NozzleProblem(
            formulation=Formulation(formulation or self.formulation),
            law=self.law(),
            doping=self.doping(),
            background=self.background(sonic_floor),
            grid=self.grid(),
            boundary=self.boundary(),
        )

    def picard_config(self, linear_rtol: float = DEFAULT_LINEAR_RTOL) -> PicardConfig:
        return PicardConfig(
            tol=self.tol,
            max_iter=self.max_iter,
            damping=self.damping,
            method=self.method,
            linear_rtol=linear_rtol,
        )

    def to_text(self) -> str:
        """Echo in the same grammar, one key per line, in field order."""
        lines = []
        for key in type(self).model_fields:
            value = getattr(self, key)
            if value is None:
                continue
            lines.append(f"{key} = {repr(value) if isinstance(value, float) else value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> RunConfig:
    """Parse and validate; every error names its line."""
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    known = set(RunConfig.model_fields)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(
                f"duplicate key {key!r} (first set on line {lines[key]})", line=lineno
            )
        values[key] = value
        lines[key] = lineno

    try:
        cfg = RunConfig(**values)  # type: ignore[arg-type]
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else ""
        raise ConfigError(f"{key}: {err['msg']}", line=lines.get(key)) from e

    try:
        doping = cfg.doping()
    except DopingSignError as e:
        raise DopingSignError(str(e), line=lines.get("w_expr")) from e
    result = cfg.boundary().compatibility(cfg.ell)
    if not result.passed:
        first = next((lines[k] for k in X2_EXPRESSIONS if k in lines), None)
        raise CompatibilityError("; ".join(result.issues), line=first)
    if doping.case == "gravitational" and cfg.gamma < 3.0:
        log.warning(
            "gravitational case with gamma = %g: uniqueness needs gamma >= 3, "
            "experiments run in counterexample mode",
            cfg.gamma,
        )
    return cfg


def parse_config(path: Path | str) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    return parse_config_text(text)
