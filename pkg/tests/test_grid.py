"""Tests for the nozzle grid, nodal fields and boundary data."""

from __future__ import annotations

import numpy as np
import pytest

from eplab.exceptions import CompatibilityError, DomainError, LabError
from eplab.expressions import BasisExpansion
from eplab.grid import BoundaryData, Field2D, NozzleGrid, control_widths
from eplab.validation import check_boundary_compatibility

GRAVITATIONAL_PROFILE = "poly 1.5 ; cos 0 -2 0 0.5"


def _boundary(g0: str, h0: str, vL: str, case: str, ell: float = 0.5) -> BoundaryData:
    return BoundaryData(
        g0=BasisExpansion.parse(g0, period=ell),
        h0=BasisExpansion.parse(h0, period=ell),
        vL=BasisExpansion.parse(vL, period=ell),
        case=case,  # type: ignore[arg-type]
    )


class TestNozzleGrid:
    """Geometry and quadrature of the vertex-centred grid."""

    def test_shape_and_spacing(self):
        grid = NozzleGrid(L=2.0, ell=0.5, nx=8, ny=4)
        assert grid.shape == (9, 5)
        assert grid.size == 45
        assert grid.hx == pytest.approx(0.25)
        assert grid.hy == pytest.approx(0.125)

    def test_too_coarse_rejected(self):
        with pytest.raises(DomainError):
            NozzleGrid(L=1.0, ell=1.0, nx=3, ny=8)

    def test_control_widths_sum_to_length(self):
        w = control_widths(10, 0.1)
        assert w[0] == pytest.approx(0.05)
        assert w.sum() == pytest.approx(1.0)

    def test_integrate_constant(self):
        grid = NozzleGrid(L=2.0, ell=0.5, nx=8, ny=4)
        assert grid.integrate(np.ones(grid.shape)) == pytest.approx(1.0)

    def test_flat_index_layout(self):
        grid = NozzleGrid(L=1.0, ell=1.0, nx=4, ny=6)
        assert grid.node(2 * 7 + 3) == (2, 3)
        assert "i=2, j=3" in grid.describe_node(17)

    def test_gradient_exact_for_quadratics(self):
        grid = NozzleGrid(L=1.0, ell=0.5, nx=8, ny=6)
        X1, X2 = grid.mesh()
        g = grid.gradient(X1**2 + 3.0 * X1 * X2 - X2**2)
        np.testing.assert_allclose(g[..., 0], 2 * X1 + 3 * X2, atol=1e-12)
        np.testing.assert_allclose(g[..., 1], 3 * X1 - 2 * X2, atol=1e-12)

    def test_sparse_gradient_matches_nodal(self):
        grid = NozzleGrid(L=1.0, ell=0.5, nx=8, ny=6)
        values = np.random.default_rng(0).standard_normal(grid.shape)
        dx, dy = grid.gradient_operators()
        g = grid.gradient(values)
        np.testing.assert_allclose(dx @ values.ravel(), g[..., 0].ravel(), atol=1e-12)
        np.testing.assert_allclose(dy @ values.ravel(), g[..., 1].ravel(), atol=1e-12)


class TestField2D:
    """Nodal fields."""

    def test_reshapes_flat_input(self):
        grid = NozzleGrid(L=1.0, ell=1.0, nx=4, ny=4)
        field = Field2D(grid, np.arange(25.0))
        assert field.values.shape == (5, 5)
        assert field.values[1, 0] == 5.0

    def test_non_finite_rejected(self):
        grid = NozzleGrid(L=1.0, ell=1.0, nx=4, ny=4)
        values = np.zeros(grid.shape)
        values[2, 3] = np.nan
        with pytest.raises(LabError, match="i=2, j=3"):
            Field2D(grid, values)


class TestBoundaryCompatibility:
    """Corner conditions on the boundary data."""

    def test_electric_flat_h0_passes(self):
        result = check_boundary_compatibility(
            _boundary("poly 1", "poly 0.5 ; cos 1", "poly 0", "electric"), 0.5
        )
        assert result.passed

    def test_electric_sloped_h0_fails(self):
        result = check_boundary_compatibility(
            _boundary("poly 0", "poly 0 1", "poly 0", "electric"), 0.5
        )
        assert not result.passed
        assert "h0'" in result.issues[0]

    def test_gravitational_profile_passes(self):
        p = GRAVITATIONAL_PROFILE
        boundary = _boundary(p, p, p, "gravitational")
        assert boundary.compatibility(0.5).passed
        boundary.scaled(1e-2).require_compatible(0.5)

    def test_gravitational_nonzero_value_fails(self):
        boundary = _boundary("poly 1", "poly 0", "poly 0", "gravitational")
        with pytest.raises(CompatibilityError, match="g0"):
            boundary.require_compatible(0.5)

    def test_zero_data_compatible(self):
        assert BoundaryData.zero(0.5, "gravitational").compatibility(0.5).passed


class TestStreamTrace:
    """Inlet value of the stream-function perturbation."""

    def test_integral_of_inflow(self):
        boundary = _boundary("poly 2", "poly 0", "poly 0", "electric")
        x2 = np.linspace(0.0, 0.5, 5)
        np.testing.assert_allclose(boundary.stream_trace(x2), 2.0 * x2)

    def test_zero_net_mode(self):
        boundary = _boundary("cos 0 1", "poly 0", "poly 0", "electric")
        assert float(boundary.stream_trace(np.array(0.5))) == pytest.approx(0.0, abs=1e-15)
