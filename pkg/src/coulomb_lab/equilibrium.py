"""Equilibrium measures of the wall-constrained gas.

Critical radius, the bulk-plus-surface constrained measure, energy
density and its constancy certificate, and the mean-field energy of the
constrained minimizer.  The wall at radius R is inactive for R >= R*;
for R < R* the measure keeps the unconstrained bulk density
m(r) = (r^{d-1} v'(r))' inside the wall and carries the missing charge
as an atom on the sphere of radius R.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .kernel import RadialPotential, check_dimension, phi
from .numerics import quad_checked

__all__ = [
    "ConstrainedMeasure",
    "CriticalRadiusError",
    "EquilibriumCertificate",
    "certify_equilibrium",
    "certify_measure",
    "constrained_measure",
    "critical_radius",
    "energy_density",
    "energy_density_of_measure",
    "mean_field_energy",
    "measure_to_csv",
    "radial_cdf",
]

# Relative slack used when comparing radii against the critical radius.
_REL_EPS = 1e-9


class CriticalRadiusError(RuntimeError):
    """r^{d-1} v'(r) = 1 has no root in [1e-9, 1e9]; growth assumptions violated."""


def critical_radius(pot: RadialPotential, d) -> float:
    """Edge R* of the unconstrained support: the root of r^{d-1} v'(r) = 1.

    The map is strictly increasing for admissible potentials, so any
    sign change brackets the unique root; the bracket is grown by
    factors of 2 from r = 1 and the root polished to |r^{d-1} v' - 1|
    <= 1e-12.
    """
    d = check_dimension(d)

    def f(r):
        return float(r ** (d - 1) * pot.dv(r)) - 1.0

    lo = hi = 1.0
    flo = fhi = f(1.0)
    while fhi < 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise CriticalRadiusError(
                f"no critical radius below 1e9 for {pot.label!r}, d={d}"
            )
        fhi = f(hi)
    while flo > 0.0:
        lo /= 2.0
        if lo < 1e-9:
            raise CriticalRadiusError(
                f"no critical radius above 1e-9 for {pot.label!r}, d={d}"
            )
        flo = f(lo)

    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    else:
        root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=256)
    if abs(f(root)) > 1e-12:
        raise CriticalRadiusError(
            f"root polish failed for {pot.label!r}, d={d}: residual {f(root):.3e}"
        )
    return float(root)


@dataclass(frozen=True)
class ConstrainedMeasure:
    """Radial bulk density plus a surface atom at the wall.

    ``surface_weight`` is max(0, 1 - R^{d-1} v'(R)) and is exactly zero
    when R >= R*.  The atom is kept as an exact (radius, weight) pair,
    never smeared into a histogram bin: the third-order analysis is
    sensitive to the bulk/atom split.
    """

    pot: RadialPotential
    d: int
    R: float
    r_star: float
    surface_weight: float

    @property
    def support_radius(self) -> float:
        return min(self.R, self.r_star)

    @property
    def atom_radius(self) -> float:
        return self.support_radius

    def bulk_density(self, r):
        """Radial bulk mass density m(r) = (r^{d-1} v'(r))' on the support."""
        arr = np.asarray(r, dtype=float)
        d = self.d
        if d == 1:
            val = self.pot.d2v(arr) + 0.0 * arr
        else:
            val = (d - 1) * arr ** (d - 2) * self.pot.dv(arr) + arr ** (d - 1) * self.pot.d2v(arr)
        out = np.where(arr <= self.support_radius, val, 0.0)
        return float(out) if np.isscalar(r) or arr.ndim == 0 else out

    def bulk_cdf(self, r):
        """Integrated bulk mass below radius r (atom excluded), in closed form."""
        arr = np.asarray(r, dtype=float)
        t = np.minimum(arr, self.support_radius)
        val = np.where(t > 0.0, t ** (self.d - 1) * self.pot.dv(t), 0.0)
        return float(val) if np.isscalar(r) or arr.ndim == 0 else val


def constrained_measure(pot: RadialPotential, d, R: float) -> ConstrainedMeasure:
    """Equilibrium measure of the gas confined to the ball of radius R."""
    d = check_dimension(d)
    if R <= 0.0:
        raise ValueError(f"wall radius must be > 0, got {R}")
    r_star = critical_radius(pot, d)
    if R >= r_star:
        weight = 0.0
    else:
        weight = max(0.0, 1.0 - float(R ** (d - 1) * pot.dv(R)))
    return ConstrainedMeasure(pot=pot, d=d, R=float(R), r_star=r_star, surface_weight=weight)


def radial_cdf(measure: ConstrainedMeasure, r):
    """Total radial mass (bulk plus atom) below radius r; 1 at the support edge."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("radius must be >= 0")
    out = np.where(
        arr >= measure.support_radius,
        1.0,
        measure.bulk_cdf(arr),
    )
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def energy_density_of_measure(measure: ConstrainedMeasure, x_radius: float, *, epsabs=1e-12) -> float:
    """Energy density at |x| = x_radius: confinement plus the potential of the measure.

    Uses the shell formula phi_d(max(|x|, r)) for the interaction with
    each radial shell; the bulk contribution above |x| is integrated by
    adaptive quadrature.  At x_radius = 0 the diverging kernel multiplies
    the vanishing enclosed mass and the product is dropped (limit form).
    """
    if x_radius < 0.0:
        raise ValueError("x_radius must be >= 0")
    pot, d = measure.pot, measure.d
    s = float(x_radius)
    b = measure.support_radius
    val = float(pot.v(s))
    if s > 0.0:
        val += phi(d, s) * measure.bulk_cdf(min(s, b))
    if s < b:
        val += quad_checked(
            lambda r: phi(d, r) * measure.bulk_density(r), s, b, epsabs=epsabs
        )
    if measure.surface_weight > 0.0:
        val += measure.surface_weight * phi(d, max(s, measure.atom_radius))
    return val


def energy_density(pot: RadialPotential, d, R: float, x_radius: float) -> float:
    """Energy density of the constrained measure; constant phi_d(R)+v(R) inside the wall."""
    d = check_dimension(d)
    measure = constrained_measure(pot, d, R)
    if R > measure.r_star * (1.0 + _REL_EPS):
        raise ValueError(
            f"energy_density requires R <= critical radius {measure.r_star:.12g}, got R={R}"
        )
    return energy_density_of_measure(measure, x_radius)


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Numerical transcription of the electrostatic equilibrium conditions.

    ``max_dev_inside`` is the largest |energy density - C_R| over probes
    in [0, R] (the support); ``min_margin_outside`` is the smallest
    energy-density margin over probes in (R, 3 R*].  The exterior
    inequality is part of the theory only when the wall is inactive
    (R = R*, unconstrained minimizer); in the pushed phase the wall
    itself confines the gas and the exterior margin is genuinely
    negative, so it is recorded but not enforced there.
    """

    C_R: float
    max_dev_inside: float
    min_margin_outside: float
    probe_count: int
    tol: float
    exterior_enforced: bool

    @property
    def passed(self) -> bool:
        ok = self.max_dev_inside <= self.tol
        if self.exterior_enforced:
            ok = ok and self.min_margin_outside >= -self.tol
        return ok


def certify_measure(measure: ConstrainedMeasure, probes: int = 32, tol: float = 1e-7) -> EquilibriumCertificate:
    """Certify a given measure against the equilibrium conditions."""
    if probes < 8:
        raise ValueError("probes must be >= 8")
    pot, d, R = measure.pot, measure.d, measure.R
    c_r = phi(d, R) + float(pot.v(R))
    inside = np.linspace(0.0, R, int(probes))
    outside = np.linspace(R, 3.0 * measure.r_star, int(probes) + 1)[1:]
    dev = max(abs(energy_density_of_measure(measure, s) - c_r) for s in inside)
    margin = min(energy_density_of_measure(measure, s) - c_r for s in outside)
    return EquilibriumCertificate(
        C_R=c_r,
        max_dev_inside=float(dev),
        min_margin_outside=float(margin),
        probe_count=int(probes),
        tol=float(tol),
        exterior_enforced=bool(R >= measure.r_star * (1.0 - _REL_EPS)),
    )


def certify_equilibrium(pot: RadialPotential, d, R: float, probes: int = 32, tol: float = 1e-7) -> EquilibriumCertificate:
    """Build the constrained measure at R <= R* and certify it."""
    d = check_dimension(d)
    measure = constrained_measure(pot, d, R)
    if R > measure.r_star * (1.0 + _REL_EPS):
        raise ValueError(
            f"certification requires R <= critical radius {measure.r_star:.12g}, got R={R}"
        )
    return certify_measure(measure, probes=probes, tol=tol)


def mean_field_energy(pot: RadialPotential, d, R: float, *, epsabs=1e-12) -> float:
    """Mean-field energy of the constrained minimizer at wall radius R <= R*.

    Equals phi_d(R)/2 + v(R) - (1/2) int_0^R r^{d-1} v'(r)^2 dr; the
    integral is evaluated by adaptive quadrature to absolute tolerance
    1e-10 or better.
    """
    d = check_dimension(d)
    if R <= 0.0:
        raise ValueError(f"wall radius must be > 0, got {R}")
    r_star = critical_radius(pot, d)
    if R > r_star * (1.0 + _REL_EPS):
        raise ValueError(
            f"mean_field_energy requires R <= critical radius {r_star:.12g}, got R={R}"
        )
    integral = quad_checked(lambda r: r ** (d - 1) * pot.dv(r) ** 2, 0.0, R, epsabs=epsabs)
    return 0.5 * phi(d, R) + float(pot.v(R)) - 0.5 * integral


def measure_to_csv(measure: ConstrainedMeasure, csv_path, json_path=None, rows: int = 512) -> None:
    """Write the measure as RFC-4180 CSV (r, bulk_density, cdf) plus a JSON sidecar.

    The one-line JSON header {d, R, r_star, surface_weight} goes to
    ``json_path`` (default: csv path with .json suffix) so the CSV
    itself stays plain and round-trips through generic readers.
    """
    r = np.linspace(0.0, measure.support_radius, int(rows) + 1)[1:]
    dens = measure.bulk_density(r)
    cdf = radial_cdf(measure, r)
    lines = ["r,bulk_density,cdf"]
    for ri, mi, ci in zip(r, dens, cdf):
        lines.append(f"{float(ri)!r},{float(mi)!r},{float(ci)!r}")
    with open(csv_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    header = {
        "d": measure.d,
        "R": measure.R,
        "r_star": measure.r_star,
        "surface_weight": measure.surface_weight,
    }
    if json_path is None:
        json_path = str(csv_path) + ".json" if not str(csv_path).endswith(".csv") else str(csv_path)[:-4] + ".json"
    with open(json_path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")


def replace_surface_weight(measure: ConstrainedMeasure, weight: float) -> ConstrainedMeasure:
    """Copy of the measure with a different atom weight (for planted-defect tests)."""
    return dataclasses.replace(measure, surface_weight=float(weight))
