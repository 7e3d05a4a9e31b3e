"""Numerical checks of the uniqueness machinery.

- Convexity of the delta-subsonic set (potential formulation) and of the
  lambda-set (stream formulation) along random and structured segments
- Discrete energy identity between two solutions
- Multistart uniqueness of the discrete solver

Usage:
    from eplab.analysis import convexity_audit_potential

    report = convexity_audit_potential(PressureLaw.polytropic(1.4), delta=0.1)
    print(report.violations, report.min_margin_along_paths)
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import roots_legendre

from . import potential, stream
from .exceptions import (
    AdmissibilityError,
    DomainError,
    HypothesisViolation,
    LabError,
    SegmentInadmissibleError,
)
from .gas import ArrayLike, PressureLaw, enthalpy_inverse
from .potential import PotentialPoint
from .solver import NozzleProblem, PicardConfig, SolutionState, linear_coefficients, picard_solve
from .stream import StreamPoint
from .validation import check_uniqueness_hypothesis

log = logging.getLogger(__name__)

# Absolute slack on margin and density comparisons along segments
PATH_TOLERANCE = 1e-9

# Gauss-Legendre nodes for the t-integrals of the energy identity
ENERGY_QUADRATURE_ORDER = 11

# Segment points checked for admissibility before the energy is evaluated
SEGMENT_CHECK_POINTS = np.linspace(0.0, 1.0, 11)

# Candidates drawn per rejection-sampling round, as a multiple of the points needed
OVERSAMPLING = 4


@dataclass
class ConvexityReport:
    kind: str
    pairs: int
    n_t_samples: int
    violations: int = 0
    min_margin_along_paths: float = np.inf
    density_violations: int = 0
    concavity_violations: int = 0
    counterexample: Optional[dict[str, float]] = None

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.density_violations == 0

    def to_frame(self) -> pd.DataFrame:
        row: dict[str, object] = {
            "kind": self.kind,
            "pairs": self.pairs,
            "n_t_samples": self.n_t_samples,
            "violations": self.violations,
            "min_margin_along_paths": self.min_margin_along_paths,
            "density_violations": self.density_violations,
            "concavity_violations": self.concavity_violations,
        }
        for key, value in (self.counterexample or {}).items():
            row[f"cx_{key}"] = value
        return pd.DataFrame([row])


def _segments(start: np.ndarray, end: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Points start + t (end - start); leading axes of the inputs, then t."""
    return start[:, None, ...] + ts.reshape((1, -1) + (1,) * (start.ndim - 1)) * (
        end - start
    )[:, None, ...]


def _disk(rng: np.random.Generator, radius: np.ndarray) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=radius.shape))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=radius.shape)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


# =============================================================================
# Potential formulation
# =============================================================================


def _potential_margin(law: PressureLaw, K0: float, z: np.ndarray, q: np.ndarray) -> np.ndarray:
    """p'(rho) - |q|^2, or -inf where the enthalpy drops below the vacuum limit."""
    s = K0 + z - 0.5 * np.einsum("...i,...i->...", q, q)
    ok = s > law.vacuum_limit()
    out = np.full(s.shape, -np.inf)
    if np.any(ok):
        rho = np.asarray(enthalpy_inverse(law, s[ok]))
        out[ok] = law.dpressure(rho) - np.einsum("...i,...i->...", q[ok], q[ok])
    return out


def sample_potential_set(
    law: PressureLaw, delta: float, n: int, rng: np.random.Generator, K0: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """n points of the delta-subsonic set by rejection from a (z, q) box."""
    z_max = 1.0 + abs(K0)
    top = K0 + z_max
    if not top > law.vacuum_limit():
        raise DomainError(f"sampling box lies below the vacuum limit for K0 = {K0}")
    q_max = 2.0 * float(np.sqrt(law.dpressure(enthalpy_inverse(law, top))))
    zs: list[np.ndarray] = []
    qs: list[np.ndarray] = []
    have = 0
    for _ in range(1000):
        m = OVERSAMPLING * (n - have) + 16
        z = rng.uniform(-z_max, z_max, size=m)
        q = _disk(rng, np.full(m, q_max))
        keep = _potential_margin(law, K0, z, q) >= delta
        zs.append(z[keep])
        qs.append(q[keep])
        have += int(keep.sum())
        if have >= n:
            break
    else:
        raise DomainError(f"could not sample {n} points with margin >= {delta}")
    return np.concatenate(zs)[:n], np.concatenate(qs)[:n]


def potential_path_margins(
    law: PressureLaw,
    start: tuple[ArrayLike, ArrayLike],
    end: tuple[ArrayLike, ArrayLike],
    n_t_samples: int = 11,
    K0: float = 0.0,
) -> np.ndarray:
    """p'(rho) - |q|^2 along the segments from start = (z0, q0) to end = (z1, q1).

    Returns shape (pairs, n_t_samples); a single pair gives one row.
    """
    z0, z1 = np.atleast_1d(np.asarray(start[0], dtype=float), np.asarray(end[0], dtype=float))
    q0, q1 = np.atleast_2d(np.asarray(start[1], dtype=float), np.asarray(end[1], dtype=float))
    ts = np.linspace(0.0, 1.0, n_t_samples)
    return _potential_margin(law, K0, _segments(z0, z1, ts), _segments(q0, q1, ts))


def convexity_audit_potential(
    law: PressureLaw,
    delta: float,
    n_pairs: int = 10_000,
    n_t_samples: int = 11,
    seed: int = 0,
    K0: float = 0.0,
) -> ConvexityReport:
    """Check that segments between points of margin >= delta keep margin >= delta.

    Along each segment also checks rho_t >= min(rho_0, rho_1) and that the
    margin is concave in t (nonpositive second differences).

    Raises:
        HypothesisViolation: the law fails d/drho(rho p''/p') <= 0.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    hypothesis = check_uniqueness_hypothesis(law)
    if not hypothesis.passed:
        raise HypothesisViolation("; ".join(hypothesis.issues))

    rng = np.random.default_rng(seed)
    z, q = sample_potential_set(law, delta, 2 * n_pairs, rng, K0)
    z0, z1 = z[:n_pairs], z[n_pairs:]
    q0, q1 = q[:n_pairs], q[n_pairs:]
    ts = np.linspace(0.0, 1.0, n_t_samples)
    zt = _segments(z0, z1, ts)
    qt = _segments(q0, q1, ts)

    margin = potential_path_margins(law, (z0, q0), (z1, q1), n_t_samples, K0)
    report = ConvexityReport(kind="potential", pairs=n_pairs, n_t_samples=n_t_samples)
    report.min_margin_along_paths = float(margin.min())
    bad = margin < delta - PATH_TOLERANCE
    report.violations = int(np.any(bad, axis=1).sum())

    finite = np.all(np.isfinite(margin), axis=1)
    rho = np.full(zt.shape, np.nan)
    rho[finite] = potential.density(law, PotentialPoint(z=zt[finite], q=qt[finite], K0=K0))
    floor = np.minimum(rho[:, 0], rho[:, -1])[:, None]
    report.density_violations = int(
        np.any(rho < floor - PATH_TOLERANCE * (1.0 + floor), axis=1)[finite].sum()
    )
    if n_t_samples >= 3:
        second = margin[:, :-2] - 2.0 * margin[:, 1:-1] + margin[:, 2:]
        scale = 1.0 + np.abs(margin[:, 1:-1])
        report.concavity_violations = int(
            np.any(second > PATH_TOLERANCE * scale, axis=1)[finite].sum()
        )

    if report.violations:
        k = int(np.flatnonzero(np.any(bad, axis=1))[0])
        report.counterexample = _counterexample(zt[k], qt[k], ts, margin[k])
    log.info(
        "Potential convexity audit: pairs=%d violations=%d min_margin=%.6g",
        n_pairs, report.violations, report.min_margin_along_paths,
    )
    return report


def _counterexample(
    zt: np.ndarray, qt: np.ndarray, ts: np.ndarray, margin: np.ndarray
) -> dict[str, float]:
    k = int(np.argmin(margin))
    return {
        "z0": float(zt[0]),
        "q0_1": float(qt[0, 0]),
        "q0_2": float(qt[0, 1]),
        "z1": float(zt[-1]),
        "q1_1": float(qt[-1, 0]),
        "q1_2": float(qt[-1, 1]),
        "t": float(ts[k]),
        "margin": float(margin[k]),
    }


# =============================================================================
# Stream formulation
# =============================================================================


def _stream_margin(gamma: float, K: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.asarray(stream.lambda_margin(StreamPoint(z=K, q=q, k0=0.0, gamma=gamma)))


def stream_path_margins(
    gamma: float,
    start: tuple[ArrayLike, ArrayLike],
    end: tuple[ArrayLike, ArrayLike],
    n_t_samples: int = 11,
) -> np.ndarray:
    """k0 + z - B(rho_s(q), q) along the segments from start = (K0, q0) to end = (K1, q1)."""
    K0, K1 = np.atleast_1d(np.asarray(start[0], dtype=float), np.asarray(end[0], dtype=float))
    q0, q1 = np.atleast_2d(np.asarray(start[1], dtype=float), np.asarray(end[1], dtype=float))
    ts = np.linspace(0.0, 1.0, n_t_samples)
    return _stream_margin(gamma, _segments(K0, K1, ts), _segments(q0, q1, ts))


def _radial_pairs(
    gamma: float, lam: float, n_t_samples: int, n_lines: int = 41
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pairs on lines through the origin, q0 = s r e and q1 = r e, both with margin lam."""
    C = stream.sonic_constant(gamma)
    alpha = stream.sonic_exponent(gamma)
    s = np.linspace(-1.0, 0.9, n_lines)
    r = 1.0
    e = np.array([1.0, 0.0])
    q0 = (s * r)[:, None] * e
    q1 = np.repeat((r * e)[None, :], n_lines, axis=0)
    K0 = lam + C * np.abs(s * r) ** alpha
    K1 = np.full(n_lines, lam + C * r**alpha)
    return K0, q0, K1, q1


def convexity_audit_stream(
    gamma: float,
    lam: float,
    n_pairs: int = 10_000,
    n_t_samples: int = 11,
    seed: int = 0,
    K_span: float = 4.0,
) -> ConvexityReport:
    """Check that segments between points of the lambda-set stay in it.

    The set is convex when the sonic exponent 2(gamma-1)/(gamma+1) is >= 1,
    that is gamma >= 3. For smaller gamma the audit runs in counterexample mode:
    structured pairs on lines through the origin are tried before random ones,
    and the first violating pair is returned.
    """
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if not gamma > 1.0:
        raise DomainError("the stream formulation needs gamma > 1")
    counterexample_mode = gamma < 3.0
    if counterexample_mode:
        log.warning(
            "gamma = %g < 3: the lambda-set need not be convex; searching for a violation", gamma
        )

    rng = np.random.default_rng(seed)
    C = stream.sonic_constant(gamma)
    alpha = stream.sonic_exponent(gamma)
    K = lam + K_span * rng.uniform(size=2 * n_pairs)
    q = _disk(rng, ((K - lam) / C) ** (1.0 / alpha))
    K0, K1 = K[:n_pairs], K[n_pairs:]
    q0, q1 = q[:n_pairs], q[n_pairs:]
    if counterexample_mode:
        rK0, rq0, rK1, rq1 = _radial_pairs(gamma, lam, n_t_samples)
        K0, K1 = np.concatenate([rK0, K0]), np.concatenate([rK1, K1])
        q0, q1 = np.concatenate([rq0, q0]), np.concatenate([rq1, q1])

    ts = np.linspace(0.0, 1.0, n_t_samples)
    Kt = _segments(K0, K1, ts)
    qt = _segments(q0, q1, ts)
    margin = stream_path_margins(gamma, (K0, q0), (K1, q1), n_t_samples)
    bad = np.any(margin < lam - PATH_TOLERANCE, axis=1)

    report = ConvexityReport(kind="stream", pairs=len(K0), n_t_samples=n_t_samples)
    report.min_margin_along_paths = float(margin.min())
    report.violations = int(bad.sum())
    if report.violations:
        k = int(np.flatnonzero(bad)[0])
        report.counterexample = _counterexample(Kt[k], qt[k], ts, margin[k])
        if not counterexample_mode:
            log.warning("lambda-set violation found for gamma = %g", gamma)
    log.info(
        "Stream convexity audit: gamma=%g pairs=%d violations=%d min_margin=%.6g",
        gamma, report.pairs, report.violations, report.min_margin_along_paths,
    )
    return report


# =============================================================================
# Energy identity
# =============================================================================


@dataclass(frozen=True)
class EnergyReport:
    """Coercive energy of the difference of two solutions.

    ``coercive`` is the quadrature of grad(d).A_q grad(d) + kappa |grad(Psi)|^2
    + |B_z| Psi^2 with t-averaged coefficients, minus the w' cross term.
    ``identity_gap`` is the max error of the mean-value identity for A and B.
    """

    coercive: float
    gradient_term: float
    field_term: float
    mass_term: float
    cross_term: float
    identity_gap: float
    rho_min: float
    rho_max: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.__dict__])


def energy_identity_residual(
    problem: NozzleProblem, sol_a: SolutionState, sol_b: SolutionState
) -> EnergyReport:
    grid = problem.grid
    if sol_a.grid != grid or sol_b.grid != grid:
        raise DomainError("both solutions must live on the problem grid")
    model = problem.model
    Psi = sol_b.Phi.values - sol_a.Phi.values
    grad_d = sol_b.grad - sol_a.grad
    z_a, q_a = sol_a.Phi.values, sol_a.grad

    def at(t: float) -> tuple[np.ndarray, np.ndarray]:
        return z_a + t * Psi, q_a + t * grad_d

    rho_min, rho_max = np.inf, -np.inf
    for t in SEGMENT_CHECK_POINTS:
        z, q = at(float(t))
        try:
            rho = model.density(z, q)
            margin = model.margin(z, q)
        except AdmissibilityError as e:
            idx = e.index if e.index is not None else 0
            raise SegmentInadmissibleError(
                f"segment leaves the admissible set at t = {t:.2f}: {e}", float(t), grid.node(idx)
            ) from e
        if np.any(margin <= 0):
            idx = int(np.argmin(margin))
            raise SegmentInadmissibleError(
                f"segment reaches the sonic set at t = {t:.2f}, {grid.describe_node(idx)}",
                float(t),
                grid.node(idx),
            )
        rho_min = min(rho_min, float(rho.min()))
        rho_max = max(rho_max, float(rho.max()))

    nodes, weights = roots_legendre(ENERGY_QUADRATURE_ORDER)
    ts = 0.5 * (nodes + 1.0)
    ws = 0.5 * weights
    Aq = np.zeros(grid.shape + (2, 2))
    Az = np.zeros(grid.shape + (2,))
    Bq = np.zeros(grid.shape + (2,))
    Bz = np.zeros(grid.shape)
    for t, wt in zip(ts, ws):
        jac = model.jacobians(*at(float(t)))
        Aq += wt * jac.dA_dq
        Az += wt * jac.dA_dz
        Bq += wt * jac.dB_dq
        Bz += wt * jac.dB_dz

    A_a, B_a = model.flux(z_a, q_a)
    A_b, B_b = model.flux(sol_b.Phi.values, sol_b.grad)
    gap_A = A_b - A_a - np.einsum("...ij,...j->...i", Aq, grad_d) - Az * Psi[..., None]
    gap_B = B_b - B_a - np.einsum("...i,...i->...", Bq, grad_d) - Bz * Psi
    identity_gap = float(max(np.max(np.abs(gap_A)), np.max(np.abs(gap_B))))

    co = linear_coefficients(problem)
    W = grid.weights
    grad_Psi = grid.gradient(Psi)
    gradient_term = float(np.sum(W * np.einsum("...i,...ij,...j->...", grad_d, Aq, grad_d)))
    field_term = float(
        np.sum(W * co.kappa[:, None] * np.einsum("...i,...i->...", grad_Psi, grad_Psi))
    )
    mass_term = float(np.sum(W * np.abs(Bz) * Psi**2))
    cross_term = abs(float(np.sum(W * co.kappa_prime[:, None] * Psi * grad_Psi[..., 0])))
    return EnergyReport(
        coercive=gradient_term + field_term + mass_term - cross_term,
        gradient_term=gradient_term,
        field_term=field_term,
        mass_term=mass_term,
        cross_term=cross_term,
        identity_gap=identity_gap,
        rho_min=rho_min,
        rho_max=rho_max,
    )


# =============================================================================
# Multistart uniqueness
# =============================================================================


@dataclass
class StartOutcome:
    index: int
    converged: bool = False
    iterations: int = 0
    error: Optional[str] = None


@dataclass
class MultistartReport:
    starts: list[StartOutcome] = field(default_factory=list)
    distances: dict[tuple[int, int], float] = field(default_factory=dict)
    energies: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def max_distance(self) -> float:
        return max(self.distances.values(), default=0.0)

    @property
    def max_energy(self) -> float:
        return max(self.energies.values(), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"i": i, "j": j, "distance": dist, "energy": self.energies.get((i, j), np.nan)}
            for (i, j), dist in sorted(self.distances.items())
        ]
        return pd.DataFrame(rows, columns=["i", "j", "distance", "energy"])

    def starts_frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.__dict__ for s in self.starts])


def initial_guesses(
    problem: NozzleProblem, n_starts: int, scale: float, seed: int = 0
) -> list[Optional[tuple[np.ndarray, np.ndarray]]]:
    """The background plus n_starts - 1 smooth random perturbations of size ``scale``."""
    grid = problem.grid
    X1, X2 = grid.mesh()
    rng = np.random.default_rng(seed)
    guesses: list[Optional[tuple[np.ndarray, np.ndarray]]] = [None]
    for _ in range(n_starts - 1):
        a = rng.uniform(-1.0, 1.0, size=4)
        U = scale * (a[0] * np.sin(np.pi * X1 / grid.L) + a[1] * np.cos(np.pi * X2 / grid.ell))
        V = scale * (a[2] * np.sin(np.pi * X1 / grid.L) + a[3] * np.cos(np.pi * X2 / grid.ell))
        guesses.append((U, V))
    return guesses


def multistart_uniqueness(
    problem: NozzleProblem,
    guesses: list[Optional[tuple[np.ndarray, np.ndarray]]],
    config: Optional[PicardConfig] = None,
) -> MultistartReport:
    """Solve from every guess and compare the converged solutions pairwise.

    Failed or non-converged starts are recorded and left out of the comparison.
    """
    config = config or PicardConfig()
    report = MultistartReport()
    solutions: dict[int, SolutionState] = {}
    for k, guess in enumerate(guesses):
        outcome = StartOutcome(index=k)
        report.starts.append(outcome)
        try:
            state, it = picard_solve(problem, config, initial=guess)
        except LabError as e:
            outcome.error = f"{type(e).__name__}: {e}"
            log.warning("start %d failed: %s", k, outcome.error)
            continue
        outcome.converged = it.converged
        outcome.iterations = it.iterations
        if it.converged:
            solutions[k] = state

    for i, j in itertools.combinations(sorted(solutions), 2):
        report.distances[(i, j)] = solutions[i].distance(solutions[j])
        try:
            energy = energy_identity_residual(problem, solutions[i], solutions[j])
            report.energies[(i, j)] = energy.coercive
        except SegmentInadmissibleError as e:
            log.warning("energy between starts %d and %d unavailable: %s", i, j, e)
    log.info(
        "Multistart: %d/%d converged, max distance %.3g",
        len(solutions), len(guesses), report.max_distance,
    )
    return report
