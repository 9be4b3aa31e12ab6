import csv
import json
import math

import numpy as np
import pytest
from scipy import integrate

from coulomb_lab import equilibrium, rate
from coulomb_lab.equilibrium import (
    CriticalRadiusError,
    certify_equilibrium,
    certify_measure,
    constrained_measure,
    critical_radius,
    energy_density,
    energy_density_of_measure,
    mean_field_energy,
    measure_to_csv,
    radial_cdf,
    replace_surface_weight,
)
from coulomb_lab.kernel import get_potential, phi

QUAD = get_potential("quadratic")
QUART = get_potential("quartic")


class TestCriticalRadius:
    @pytest.mark.parametrize("d", [1, 2, 3, 5, 15])
    def test_quadratic_is_one(self, d):
        assert critical_radius(QUAD, d) == pytest.approx(1.0, abs=1e-13)

    def test_quartic_d1(self):
        assert critical_radius(QUART, 1) == pytest.approx(1.0, abs=1e-13)

    def test_linear_d3(self):
        # root of 2 r^2 = 1
        r = critical_radius(get_potential("linear-a:2"), 3)
        assert r == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-13)
        assert abs(r**2 * 2.0 - 1.0) <= 1e-12

    def test_residual_bound(self):
        for d, pot in [(2, QUAD), (3, QUART), (4, QUAD)]:
            r = critical_radius(pot, d)
            assert abs(r ** (d - 1) * float(pot.dv(r)) - 1.0) <= 1e-12

    def test_no_root_raises(self):
        # d=1 with linear confinement: r^0 v' = a is constant, never crosses 1
        with pytest.raises(CriticalRadiusError):
            critical_radius(get_potential("linear-a:0.5"), 1)


class TestConstrainedMeasure:
    def test_pushed_quadratic_d3(self):
        m = constrained_measure(QUAD, 3, 0.5)
        assert m.surface_weight == pytest.approx(0.875, abs=1e-14)
        r = np.array([0.1, 0.3, 0.49])
        np.testing.assert_allclose(m.bulk_density(r), 3.0 * r**2, rtol=1e-14)

    def test_atom_vanishes_at_critical_radius(self):
        m = constrained_measure(QUAD, 2, 1.0)
        assert m.surface_weight == 0.0

    def test_pushed_quadratic_d2(self):
        m = constrained_measure(QUAD, 2, 0.5)
        assert m.surface_weight == pytest.approx(0.75, abs=1e-14)
        assert m.bulk_density(0.3) == pytest.approx(0.6, rel=1e-14)

    def test_pulled_measure_is_unconstrained(self):
        m = constrained_measure(QUAD, 2, 2.0)
        assert m.surface_weight == 0.0
        assert m.support_radius == pytest.approx(1.0, abs=1e-13)
        assert m.bulk_density(1.5) == 0.0

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            constrained_measure(QUAD, 2, 0.0)

    @pytest.mark.parametrize("eps", [-1e-9, 1e-9])
    def test_continuity_at_transition(self, eps):
        m = constrained_measure(QUAD, 3, 1.0 * (1.0 + eps))
        assert m.surface_weight <= 1e-8

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    @pytest.mark.parametrize("pot", [QUAD, QUART], ids=["quadratic", "quartic"])
    def test_gauss_law_density(self, pot, d):
        # oracle: centered finite difference of r^{d-1} v'(r)
        m = constrained_measure(pot, d, 0.9 * m_rstar(pot, d))
        for r in (0.1, 0.35, 0.6):
            h = 1e-6 * r
            fd = (
                (r + h) ** (d - 1) * float(pot.dv(r + h))
                - (r - h) ** (d - 1) * float(pot.dv(r - h))
            ) / (2 * h)
            assert m.bulk_density(r) == pytest.approx(fd, rel=1e-6)


def m_rstar(pot, d):
    return critical_radius(pot, d)


class TestRadialCdf:
    def test_quadratic_d2_bulk(self):
        m = constrained_measure(QUAD, 2, 0.5)
        assert radial_cdf(m, 0.25) == pytest.approx(0.0625, abs=1e-14)

    def test_zero_at_origin(self):
        for d in (1, 2, 3):
            m = constrained_measure(QUAD, d, 0.5)
            assert radial_cdf(m, 0.0) == 0.0

    def test_full_mass_at_wall(self):
        m = constrained_measure(QUAD, 2, 0.5)
        assert radial_cdf(m, 0.5) == 1.0

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    @pytest.mark.parametrize("pot", [QUAD, QUART], ids=["quadratic", "quartic"])
    @pytest.mark.parametrize("r_frac", [0.1, 0.5, 1.0, 2.0])
    def test_mass_conservation(self, pot, d, r_frac):
        rs = critical_radius(pot, d)
        R = r_frac * rs
        m = constrained_measure(pot, d, R)
        # bulk integral (by quadrature) plus atom must give exactly one
        bulk, _ = integrate.quad(m.bulk_density, 0.0, m.support_radius, limit=200)
        assert bulk + m.surface_weight == pytest.approx(1.0, abs=1e-10)
        assert radial_cdf(m, m.support_radius) == pytest.approx(1.0, abs=1e-10)

    def test_monotone(self):
        m = constrained_measure(QUART, 3, 0.7)
        r = np.linspace(0.0, 1.5, 200)
        vals = radial_cdf(m, r)
        assert np.all(np.diff(vals) >= -1e-15)


class TestEnergyDensity:
    def test_constant_inside_quadratic_d3(self):
        # closed form: phi_3(0.5) + v(0.5) = 2 + 0.125
        val = energy_density(QUAD, 3, 0.5, 0.2)
        assert val == pytest.approx(2.125, abs=1e-10)

    def test_constant_inside_at_critical_d2(self):
        val = energy_density(QUAD, 2, 1.0, 1.0)
        assert val == pytest.approx(0.5, abs=1e-10)

    def test_exterior_value_is_total_potential(self):
        # outside the wall all unit charge acts from its shells:
        # eps(s) = v(s) + phi_d(s), independently checkable by a direct
        # Riemann sum over the measure
        s = 0.8
        val = energy_density(QUAD, 3, 0.5, s)
        assert val == pytest.approx(float(QUAD.v(s)) + phi(3, s), abs=1e-10)
        assert val == pytest.approx(_riemann_energy_density(QUAD, 3, 0.5, s), abs=1e-5)
        # the pushed gas would rather sit outside: the exterior dips below C_R
        assert val < 2.125

    @pytest.mark.parametrize("s", [0.0, 0.1, 0.33, 0.5])
    def test_quadrature_matches_riemann_oracle(self, s):
        val = energy_density(QUAD, 2, 0.5, s)
        assert val == pytest.approx(_riemann_energy_density(QUAD, 2, 0.5, s), abs=1e-5)

    def test_origin_limit_form(self):
        # the diverging kernel multiplies zero enclosed mass at the origin
        val = energy_density(QUAD, 3, 0.5, 0.0)
        assert val == pytest.approx(2.125, abs=1e-10)

    def test_rejects_pulled_radius(self):
        with pytest.raises(ValueError):
            energy_density(QUAD, 2, 1.5, 0.2)


def _riemann_energy_density(pot, d, R, s, n=200_000):
    """Independent route: midpoint Riemann sum over the measure's shells."""
    m = constrained_measure(pot, d, R)
    b = m.support_radius
    r = (np.arange(n) + 0.5) * (b / n)
    shell_mass = m.bulk_density(r) * (b / n)
    val = float(pot.v(s)) + float(np.sum(phi(d, np.maximum(r, max(s, 1e-300))) * shell_mass))
    val += m.surface_weight * phi(d, max(s, m.atom_radius))
    return val


class TestCertification:
    def test_pushed_quadratic_d2_passes(self):
        cert = certify_equilibrium(QUAD, 2, 0.5, probes=32, tol=1e-8)
        assert cert.passed
        assert cert.max_dev_inside <= 1e-8
        assert not cert.exterior_enforced

    def test_unconstrained_d1_passes_with_exterior(self):
        cert = certify_equilibrium(QUAD, 1, 1.0, probes=32, tol=1e-8)
        assert cert.passed
        assert cert.exterior_enforced
        assert cert.min_margin_outside >= -1e-8

    def test_planted_missing_atom_fails(self):
        m = constrained_measure(QUAD, 2, 0.5)
        broken = replace_surface_weight(m, 0.0)
        cert = certify_measure(broken, probes=32, tol=1e-8)
        assert not cert.passed
        assert cert.max_dev_inside > 0.1

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    @pytest.mark.parametrize("pot", [QUAD, QUART], ids=["quadratic", "quartic"])
    @pytest.mark.parametrize("r_frac", [0.1, 0.5, 1.0])
    def test_certificates_pass_through_transition(self, pot, d, r_frac):
        rs = critical_radius(pot, d)
        cert = certify_equilibrium(pot, d, r_frac * rs, probes=16, tol=1e-7)
        assert cert.passed, (d, r_frac, cert)

    def test_certificate_records_value_of_constant(self):
        cert = certify_equilibrium(QUAD, 3, 0.5, probes=16, tol=1e-7)
        assert cert.C_R == pytest.approx(2.125, abs=1e-14)

    def test_probe_floor(self):
        with pytest.raises(ValueError):
            certify_equilibrium(QUAD, 2, 0.5, probes=4)


class TestMeanFieldEnergy:
    def test_quadratic_d3_critical(self):
        assert mean_field_energy(QUAD, 3, 1.0) == pytest.approx(0.9, abs=1e-12)

    def test_quadratic_d2_critical(self):
        assert mean_field_energy(QUAD, 2, 1.0) == pytest.approx(0.375, abs=1e-12)

    def test_quadratic_d3_pushed(self):
        assert mean_field_energy(QUAD, 3, 0.5) == pytest.approx(1.121875, abs=1e-12)

    def test_rejects_pulled_radius(self):
        with pytest.raises(ValueError):
            mean_field_energy(QUAD, 3, 1.5)

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    @pytest.mark.parametrize("pot", [QUAD, QUART], ids=["quadratic", "quartic"])
    @pytest.mark.parametrize("r_frac", [0.3, 0.7])
    def test_free_energy_identity(self, pot, d, r_frac):
        # energy route vs direct quadrature of the rate integrand
        rs = critical_radius(pot, d)
        R = r_frac * rs
        diff = mean_field_energy(pot, d, R) - mean_field_energy(pot, d, rs)
        assert diff == pytest.approx(rate.excess_free_energy(pot, d, R), abs=1e-9)


class TestMeasureExport:
    def test_csv_round_trip(self, tmp_path):
        m = constrained_measure(QUAD, 2, 0.5)
        csv_path = tmp_path / "measure.csv"
        measure_to_csv(m, csv_path, rows=64)
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 64
        assert set(rows[0]) == {"r", "bulk_density", "cdf"}
        last = rows[-1]
        assert float(last["cdf"]) == 1.0
        r_mid = float(rows[31]["r"])
        assert float(rows[31]["bulk_density"]) == pytest.approx(2.0 * r_mid, rel=1e-12)
        meta = json.loads((tmp_path / "measure.json").read_text())
        assert meta == {"d": 2, "R": 0.5, "r_star": 1.0, "surface_weight": 0.75}
