"""Tests for basis expansions used for doping and boundary data."""

from __future__ import annotations

import numpy as np
import pytest

from eplab.exceptions import ConfigError
from eplab.expressions import BasisExpansion


class TestParse:
    """Text grammar ``poly ... ; cos ...``."""

    def test_poly_and_cos(self):
        f = BasisExpansion.parse("poly 1 2 ; cos 0 0.5", period=2.0)
        assert f.poly == (1.0, 2.0)
        assert f.cos == (0.0, 0.5)
        # 1 + 2x + 0.5 cos(2 pi x / 2)
        assert f(0.0) == pytest.approx(1.5)
        assert f(1.0) == pytest.approx(2.5)

    def test_cos_only(self):
        f = BasisExpansion.parse("cos 1", period=1.0)
        assert f(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_empty_is_zero(self):
        f = BasisExpansion.parse("", period=1.0)
        np.testing.assert_array_equal(f(np.array([0.0, 0.3])), 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown basis kind"):
            BasisExpansion.parse("sin 1", period=1.0)

    def test_bad_coefficient(self):
        with pytest.raises(ConfigError, match="bad coefficient"):
            BasisExpansion.parse("poly 1 x", period=1.0)

    def test_repeated_kind(self):
        with pytest.raises(ConfigError, match="twice"):
            BasisExpansion.parse("poly 1 ; poly 2", period=1.0)

    def test_text_round_trip(self):
        f = BasisExpansion.parse("poly 0.1 -2.5 ; cos 0 3e-3", period=0.5)
        assert BasisExpansion.parse(f.to_text(), period=0.5) == f


class TestCalculus:
    """Exact derivatives and antiderivatives."""

    def test_first_derivative(self):
        f = BasisExpansion.parse("poly 1 2 ; cos 0.5", period=1.0)
        # 2 - 0.5 pi sin(pi x)
        assert f.derivative(0.5) == pytest.approx(2.0 - 0.5 * np.pi)

    def test_second_derivative(self):
        f = BasisExpansion.parse("poly 1 2 3 ; cos 1", period=1.0)
        # 6 - pi^2 cos(pi x)
        assert f.derivative(0.0, 2) == pytest.approx(6.0 - np.pi**2)

    def test_derivative_matches_finite_difference(self):
        f = BasisExpansion.parse("poly 0.3 -1 0.2 ; cos 0.4 0 -0.7", period=0.8)
        x = np.linspace(0.05, 0.75, 15)
        h = 1e-6
        fd = (f(x + h) - f(x - h)) / (2 * h)
        np.testing.assert_allclose(f.derivative(x), fd, atol=1e-7)

    def test_antiderivative(self):
        f = BasisExpansion.parse("poly 1 ; cos 2", period=0.5)
        # x + (2 * 0.5 / pi) sin(pi x / 0.5)
        assert f.antiderivative(0.25) == pytest.approx(0.25 + 1.0 / np.pi)
        assert f.antiderivative(0.0) == pytest.approx(0.0)

    def test_sup_abs_derivative(self):
        f = BasisExpansion.parse("poly 0 3", period=1.0)
        assert f.sup_abs_derivative(2.0) == pytest.approx(3.0)


class TestConstruction:
    """Constructors and scaling."""

    def test_constant(self):
        assert BasisExpansion.constant(2.5)(np.array([0.0, 7.0])).tolist() == [2.5, 2.5]

    def test_scaled(self):
        f = BasisExpansion.parse("poly 1 ; cos 2", period=1.0).scaled(0.5)
        assert f.poly == (0.5,)
        assert f.cos == (1.0,)

    def test_nonpositive_period(self):
        with pytest.raises(ConfigError):
            BasisExpansion(poly=(1.0,), period=0.0)
