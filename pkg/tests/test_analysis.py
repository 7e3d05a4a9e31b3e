"""Tests for the convexity audits, the energy identity and multistart uniqueness."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import pytest

from eplab.analysis import (
    convexity_audit_potential,
    convexity_audit_stream,
    energy_identity_residual,
    initial_guesses,
    multistart_uniqueness,
    potential_path_margins,
    sample_potential_set,
    stream_path_margins,
)
from eplab.exceptions import DomainError, HypothesisViolation, SegmentInadmissibleError
from eplab.gas import PressureLaw
from eplab.grid import Field2D
from eplab.potential import PotentialPoint, subsonic_margin
from eplab.solver import PicardConfig, picard_solve


class TestPotentialConvexity:
    """Segments between delta-subsonic states."""

    def test_samples_respect_margin(self):
        law = PressureLaw.polytropic(1.4)
        z, q = sample_potential_set(law, 0.1, 500, np.random.default_rng(0))
        assert z.shape == (500,) and q.shape == (500, 2)
        assert np.all(subsonic_margin(law, PotentialPoint(z=z, q=q, K0=0.0)) >= 0.1)

    @pytest.mark.parametrize("gamma", [1.4, 2.0])
    def test_polytropic_set_is_convex(self, gamma):
        report = convexity_audit_potential(PressureLaw.polytropic(gamma), 0.1, n_pairs=2000)
        assert report.violations == 0
        assert report.density_violations == 0
        assert report.passed
        assert report.min_margin_along_paths >= 0.1 - 1e-9
        assert report.counterexample is None

    def test_degenerate_pair_keeps_margin(self):
        start = (0.3, np.array([0.2, -0.1]))
        margin = potential_path_margins(PressureLaw.polytropic(1.4), start, start)
        assert margin.shape == (1, 11)
        assert np.ptp(margin) == 0.0

    def test_collinear_pair_has_flat_second_difference(self):
        """Fixed q with gamma = 2: p'(rho_t) = 2 rho_t is linear in t."""
        q = np.array([0.1, 0.2])
        margin = potential_path_margins(PressureLaw.polytropic(2.0), (-0.2, q), (0.4, q))[0]
        np.testing.assert_allclose(np.diff(margin, 2), 0.0, atol=1e-12)
        assert margin[-1] > margin[0]

    def test_report_frame(self):
        report = convexity_audit_potential(PressureLaw.polytropic(1.4), 0.1, n_pairs=100)
        frame = report.to_frame()
        assert frame.loc[0, "kind"] == "potential"
        assert frame.loc[0, "pairs"] == 100

    def test_cubic_law_rejected(self):
        law = PressureLaw.custom(
            p=lambda r: r**2 + r**3, dp=lambda r: 2 * r + 3 * r**2, d2p=lambda r: 2 + 6 * r
        )
        with pytest.raises(HypothesisViolation):
            convexity_audit_potential(law, 0.1, n_pairs=10)

    def test_nonpositive_delta(self):
        with pytest.raises(DomainError):
            convexity_audit_potential(PressureLaw.polytropic(1.4), 0.0)


class TestStreamConvexity:
    """Segments between points of the lambda-set."""

    def test_gamma_three_is_convex(self):
        report = convexity_audit_stream(3.0, 0.1, n_pairs=2000)
        assert report.violations == 0
        assert report.min_margin_along_paths >= 0.1 - 1e-9

    def test_antipodal_midpoint_margin_larger(self):
        q = np.array([0.6, -0.3])
        margin = stream_path_margins(3.0, (2.0, q), (2.0, -q))[0]
        assert margin[5] == pytest.approx(2.0)
        assert margin[5] > margin[0]
        assert margin[0] == pytest.approx(margin[-1])

    def test_gamma_two_has_counterexample(self, caplog):
        with caplog.at_level(logging.WARNING, logger="eplab.analysis"):
            report = convexity_audit_stream(2.0, 0.1, n_pairs=200)
        assert "need not be convex" in caplog.text
        assert report.violations >= 1
        cx = report.counterexample
        assert cx is not None
        assert cx["margin"] < 0.1
        assert 0.0 < cx["t"] < 1.0
        assert "cx_margin" in report.to_frame().columns

    def test_nonpositive_lambda(self):
        with pytest.raises(DomainError):
            convexity_audit_stream(3.0, -1.0)


class TestEnergyIdentity:
    """Coercive energy of the difference of two solutions."""

    def test_identical_solutions(self, make_problem, electric):
        problem = make_problem(**electric(1e-2))
        state, _ = picard_solve(problem)
        report = energy_identity_residual(problem, state, state)
        assert report.coercive == 0.0
        assert report.identity_gap == 0.0

    def test_different_data(self, make_problem, electric):
        problem_a = make_problem(**electric(1e-2))
        problem_b = make_problem(**electric(2e-2))
        sol_a, _ = picard_solve(problem_a)
        sol_b, _ = picard_solve(problem_b)
        forward = energy_identity_residual(problem_a, sol_a, sol_b)
        backward = energy_identity_residual(problem_a, sol_b, sol_a)
        assert forward.coercive > 0.0
        assert forward.cross_term == 0.0
        assert forward.identity_gap <= 1e-12
        assert backward.coercive == pytest.approx(forward.coercive, rel=1e-10)
        assert forward.rho_min > 0.0

    def test_grid_mismatch(self, make_problem):
        problem = make_problem()
        other = make_problem(nx=8, ny=8)
        state, _ = picard_solve(problem)
        other_state, _ = picard_solve(other)
        with pytest.raises(DomainError):
            energy_identity_residual(problem, state, other_state)

    def test_vacuum_on_segment(self, make_problem):
        problem = make_problem()
        state, _ = picard_solve(problem)
        far = dataclasses.replace(state, Phi=Field2D(state.grid, state.Phi.values - 20.0))
        with pytest.raises(SegmentInadmissibleError) as exc:
            energy_identity_residual(problem, state, far)
        assert 0.0 < exc.value.t <= 1.0


class TestMultistart:
    """Solutions from different initial guesses coincide."""

    def test_guesses(self, make_problem):
        problem = make_problem()
        guesses = initial_guesses(problem, 3, 1e-3, seed=1)
        assert guesses[0] is None
        U, V = guesses[1]
        assert U.shape == problem.grid.shape
        assert 0.0 < np.max(np.abs(U)) <= 2e-3

    def test_electric_potential_unique(self, make_problem, electric):
        problem = make_problem(**electric(1e-2))
        report = multistart_uniqueness(problem, initial_guesses(problem, 3, 1e-3))
        assert all(s.converged for s in report.starts)
        assert len(report.distances) == 3
        assert report.max_distance <= 1e-8
        assert report.max_energy <= 1e-12
        assert list(report.to_frame().columns) == ["i", "j", "distance", "energy"]

    def test_gravitational_stream_unique(self, make_problem, gravitational):
        problem = make_problem(formulation="stream", **gravitational(1e-2))
        report = multistart_uniqueness(
            problem, initial_guesses(problem, 3, 1e-3, seed=2), PicardConfig(max_iter=50)
        )
        assert all(s.converged for s in report.starts)
        assert report.max_distance <= 1e-8

    def test_failed_start_recorded(self, make_problem, electric):
        problem = make_problem(**electric(1e-2))
        shape = problem.grid.shape
        bad = (np.zeros(shape), np.full(shape, -50.0))
        report = multistart_uniqueness(problem, [None, bad])
        assert report.starts[0].converged
        assert report.starts[1].error is not None
        assert "InadmissibleStateError" in report.starts[1].error
        assert report.distances == {}
