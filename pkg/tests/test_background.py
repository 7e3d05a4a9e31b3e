"""Tests for doping profiles and the 1D background integration."""

from __future__ import annotations

import numpy as np
import pytest

from eplab.background import (
    DopingProfile,
    bernoulli_drift,
    equilibrium_doping,
    integrate_background,
    mach_profile,
)
from eplab.exceptions import DopingSignError, SonicBreakdown, VacuumError
from eplab.expressions import BasisExpansion
from eplab.gas import PressureLaw


def _doping(w: str, b: str, L: float = 1.0) -> DopingProfile:
    return DopingProfile.from_expansions(
        BasisExpansion.parse(w, period=L), BasisExpansion.parse(b, period=L), L
    )


class TestDopingProfile:
    """Sign-definiteness of the coupling weight."""

    def test_electric_inferred(self):
        doping = _doping("poly 2 -1", "poly 1")
        assert doping.case == "electric"
        assert doping.mu == pytest.approx(1.0)
        assert doping.wprime_sup == pytest.approx(1.0)

    def test_gravitational_inferred(self):
        doping = _doping("poly -1 ; cos 0.2", "poly -1")
        assert doping.case == "gravitational"
        assert doping.mu == pytest.approx(-0.8, abs=1e-6)

    def test_sign_change_rejected(self):
        with pytest.raises(DopingSignError, match="Case"):
            _doping("poly 1 -2", "poly 1")

    def test_forced_case_must_match(self):
        w = BasisExpansion.parse("poly 1", period=1.0)
        with pytest.raises(DopingSignError, match="Case 2"):
            DopingProfile.from_expansions(w, w, 1.0, case="gravitational")


class TestIntegrateBackground:
    """RK4 integration of (rho, E, Phi, phi)."""

    def test_equilibrium_is_constant(self):
        """b = w rho0 and E0 = 0 make (rho0, 0) a fixed point."""
        law = PressureLaw.polytropic(1.4)
        w = BasisExpansion.parse("poly 1 0.5 ; cos 0.1", period=1.0)
        doping = equilibrium_doping(w, rho0=1.3, L=1.0)
        bg = integrate_background(law, doping, J=0.5, rho0=1.3, E0=0.0, L=1.0, nsteps=100)
        np.testing.assert_allclose(bg.rho_bar, 1.3, atol=1e-12)
        np.testing.assert_allclose(bg.E_bar, 0.0, atol=1e-12)
        np.testing.assert_allclose(bg.Phi_bar, 0.0, atol=1e-12)
        np.testing.assert_allclose(bg.u_bar, 0.5 / 1.3, atol=1e-12)

    def test_rk4_order(self):
        """Halving the step divides the error by about 16."""
        law = PressureLaw.polytropic(1.4)
        doping = _doping("poly 1", "poly 1")

        def final_state(n: int) -> np.ndarray:
            bg = integrate_background(law, doping, J=0.5, rho0=1.0, E0=0.3, L=1.0, nsteps=n)
            return np.array([bg.rho_bar[-1], bg.E_bar[-1], bg.Phi_bar[-1], bg.phi_bar[-1]])

        ref = final_state(10 * 64)
        err_h = np.max(np.abs(final_state(10) - ref))
        err_h2 = np.max(np.abs(final_state(20) - ref))
        assert 12.0 <= err_h / err_h2 <= 20.0

    def test_lands_on_nodes(self):
        law = PressureLaw.polytropic(1.4)
        bg = integrate_background(
            law, _doping("poly 1", "poly 1"), J=0.5, rho0=1.0, E0=0.1, L=2.0, nsteps=40
        )
        assert bg.nsteps == 40
        np.testing.assert_allclose(bg.x1, np.linspace(0.0, 2.0, 41))

    def test_bernoulli_drift_small(self):
        law = PressureLaw.polytropic(1.4)
        bg = integrate_background(
            law, _doping("poly 1", "poly 1"), J=0.5, rho0=1.0, E0=0.2, L=1.0, nsteps=100
        )
        assert bernoulli_drift(bg, law) <= 1e-8

    def test_stream_constant(self):
        """k0 = K0 + gamma / (gamma - 1)."""
        law = PressureLaw.polytropic(3.0)
        bg = integrate_background(
            law, _doping("poly -1", "poly -1"), J=0.5, rho0=1.0, E0=0.1, L=1.0, nsteps=20
        )
        assert bg.stream_constant(3.0) == pytest.approx(bg.K0 + 1.5)

    def test_mach_below_one(self):
        law = PressureLaw.polytropic(1.4)
        bg = integrate_background(
            law, _doping("poly 1", "poly 1"), J=0.5, rho0=1.0, E0=0.1, L=1.0, nsteps=50
        )
        assert np.all(mach_profile(bg, law) < 1.0)

    def test_sonic_inflow_rejected(self):
        """gamma = 1.4, rho0 = 1: p'(1) = 1.4 < J^2 = 1.44."""
        law = PressureLaw.polytropic(1.4)
        with pytest.raises(SonicBreakdown):
            integrate_background(
                law, _doping("poly 1", "poly 1"), J=1.2, rho0=1.0, E0=0.0, L=1.0, nsteps=10
            )

    def test_nonpositive_density_rejected(self):
        law = PressureLaw.polytropic(1.4)
        with pytest.raises(VacuumError):
            integrate_background(
                law, _doping("poly 1", "poly 1"), J=0.5, rho0=0.0, E0=0.0, L=1.0, nsteps=10
            )
