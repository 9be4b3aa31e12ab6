import math

import numpy as np
import pytest

from coulomb_lab.kernel import (
    RadialPotential,
    gamma_half,
    get_potential,
    linear_potential,
    omega,
    phi,
    phi_derivatives,
    quadratic_potential,
    validate_assumptions,
)


class TestOmega:
    def test_low_dimensions_exact(self):
        assert omega(1) == pytest.approx(2.0, abs=1e-15)
        assert omega(2) == pytest.approx(2.0 * math.pi, abs=1e-14)
        assert omega(3) == pytest.approx(4.0 * math.pi, abs=1e-13)

    @pytest.mark.parametrize("d", range(1, 11))
    def test_gamma_identity(self, d):
        # omega(d) * Gamma(d/2) = 2 pi^{d/2}
        lhs = omega(d) * gamma_half(d)
        rhs = 2.0 * math.pi ** (d / 2)
        assert abs(lhs - rhs) <= 1e-12 * rhs

    @pytest.mark.parametrize("d", range(1, 11))
    def test_gamma_matches_library(self, d):
        assert gamma_half(d) == pytest.approx(math.gamma(d / 2), rel=1e-14)

    @pytest.mark.parametrize("bad", [0, -1, 1.5, True])
    def test_rejects_bad_dimension(self, bad):
        with pytest.raises(ValueError):
            omega(bad)


class TestPhi:
    def test_values(self):
        assert phi(3, 2.0) == pytest.approx(0.5, abs=1e-15)
        assert phi(2, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert phi(1, 3.0) == pytest.approx(-3.0, abs=1e-15)

    def test_singularity_at_origin(self):
        # diverges as r -> 0+ for d >= 2; phi_1 stays finite
        assert phi(2, 1e-12) > 25.0
        assert phi(5, 1e-4) > 1e11
        assert phi(1, 1e-12) == pytest.approx(0.0, abs=1e-11)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_domain_error(self, r):
        with pytest.raises(ValueError):
            phi(3, r)
        with pytest.raises(ValueError):
            phi_derivatives(2, r)

    def test_vectorized(self):
        r = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(phi(3, r), 1.0 / r, rtol=1e-15)


class TestPhiDerivatives:
    def test_d1_linear_kernel(self):
        assert phi_derivatives(1, 5.0) == pytest.approx((-1.0, 0.0, 0.0), abs=1e-15)

    def test_d2_at_unit_radius(self):
        # -log r: derivatives (-1/r, 1/r^2, -2/r^3); printed middle sign in
        # the closed-form triple must match these finite-difference facts
        d1, d2, d3 = phi_derivatives(2, 1.0)
        assert d1 == pytest.approx(-1.0, abs=1e-15)
        assert d2 == pytest.approx(1.0, abs=1e-15)
        assert d3 == pytest.approx(-2.0, abs=1e-15)

    def test_d3_against_finite_differences(self):
        # oracle: central differences of phi itself
        r, h = 2.0, 1e-5 * 2.0
        fd1 = (phi(3, r + h) - phi(3, r - h)) / (2 * h)
        fd2 = (phi(3, r + h) - 2 * phi(3, r) + phi(3, r - h)) / h**2
        d1, d2, d3 = phi_derivatives(3, r)
        assert d1 == pytest.approx(fd1, rel=1e-9)
        assert d2 == pytest.approx(fd2, rel=1e-5)
        assert (d1, d2, d3) == pytest.approx((-0.25, 0.25, -0.375), abs=1e-15)

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("r", [0.05, 0.7, 1.0, 3.5])
    def test_finite_difference_consistency(self, d, r):
        h = 1e-5 * r
        d1, d2, d3 = phi_derivatives(d, r)
        fd1 = (phi(d, r + h) - phi(d, r - h)) / (2 * h)
        assert d1 == pytest.approx(fd1, rel=1e-6)
        e1p = phi_derivatives(d, r + h)[0]
        e1m = phi_derivatives(d, r - h)[0]
        assert d2 == pytest.approx((e1p - e1m) / (2 * h), rel=1e-6, abs=1e-12)
        e2p = phi_derivatives(d, r + h)[1]
        e2m = phi_derivatives(d, r - h)[1]
        assert d3 == pytest.approx((e2p - e2m) / (2 * h), rel=1e-6, abs=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3, 5, 8])
    @pytest.mark.parametrize("r", [0.1, 1.0, 2.7])
    def test_harmonicity(self, d, r):
        # radial Laplacian of phi vanishes away from the origin
        d1, d2, _ = phi_derivatives(d, r)
        assert abs(-d2 - (d - 1) / r * d1) <= 1e-12 * max(1.0, abs(d2))


class TestPotentialRegistry:
    def test_quadratic(self):
        pot = get_potential("quadratic")
        assert pot.v(2.0) == 2.0
        assert pot.dv(2.0) == 2.0
        assert pot.d2v(2.0) == 1.0
        assert pot.d3v(2.0) == 0.0

    def test_quartic(self):
        pot = get_potential("quartic")
        assert pot.v(2.0) == 4.0
        assert pot.dv(2.0) == 8.0
        assert pot.d2v(2.0) == 12.0
        assert pot.d3v(2.0) == 12.0

    def test_linear_with_parameter(self):
        pot = get_potential("linear-a:2.5")
        assert pot.v(2.0) == 5.0
        assert pot.dv(0.3) == 2.5
        assert pot.label == "linear-a:2.5"

    def test_linear_requires_parameter(self):
        with pytest.raises(ValueError):
            get_potential("linear-a")
        with pytest.raises(ValueError):
            linear_potential(-1.0)

    def test_unknown_id(self):
        with pytest.raises(KeyError):
            get_potential("sextic")

    def test_quadratic_takes_no_parameter(self):
        with pytest.raises(ValueError):
            get_potential("quadratic:3")

    def test_callables_vectorized(self):
        pot = get_potential("quartic")
        r = np.linspace(0.1, 2.0, 7)
        np.testing.assert_allclose(pot.dv(r), r**3, rtol=1e-15)
        np.testing.assert_allclose(pot.d3v(r), 6 * r, rtol=1e-15)


class TestValidateAssumptions:
    def test_quadratic_passes(self):
        report = validate_assumptions(get_potential("quadratic"), 2, r_max=10.0, n_probe=64)
        assert report.passed
        assert len(report.checks) == 4

    def test_decreasing_potential_fails_monotonicity(self):
        bad = RadialPotential(
            label="decreasing",
            v=lambda r: -r,
            dv=lambda r: -1.0 + 0.0 * r,
            d2v=lambda r: 0.0 * r,
            d3v=lambda r: 0.0 * r,
        )
        report = validate_assumptions(bad, 3, r_max=10.0, n_probe=64)
        check = report.checks[0]
        assert not check.passed
        # fails already at the first grid point
        grid_start = 10.0 / 1e6
        assert check.first_violation == pytest.approx(grid_start, rel=1e-12)

    def test_planted_wrong_second_derivative_fails(self):
        quad = quadratic_potential()
        broken = RadialPotential(
            label="broken-d2v",
            v=quad.v,
            dv=quad.dv,
            d2v=lambda r: 0.0 * r,
            d3v=quad.d3v,
        )
        report = validate_assumptions(broken, 2, r_max=10.0, n_probe=64)
        names = {c.name: c for c in report.checks}
        assert not names["derivative-consistency"].passed
        assert names["v-monotone"].passed

    def test_linear_fails_gauss_monotonicity_in_d1(self):
        report = validate_assumptions(get_potential("linear-a:1"), 1, r_max=10.0, n_probe=64)
        names = {c.name: c for c in report.checks}
        assert not names["gauss-map-monotone"].passed

    def test_linear_passes_in_d3(self):
        report = validate_assumptions(get_potential("linear-a:2"), 3, r_max=10.0, n_probe=64)
        assert report.passed

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    @pytest.mark.parametrize("name", ["quadratic", "quartic"])
    def test_builtins_validate(self, name, d):
        assert validate_assumptions(get_potential(name), d, r_max=50.0, n_probe=128).passed

    def test_bad_arguments(self):
        pot = get_potential("quadratic")
        with pytest.raises(ValueError):
            validate_assumptions(pot, 2, r_max=-1.0)
        with pytest.raises(ValueError):
            validate_assumptions(pot, 2, r_max=1.0, n_probe=1)
