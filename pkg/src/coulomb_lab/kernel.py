"""Coulomb kernels in dimension d and radial confining potentials.

The pairwise repulsion is the radial part ``phi_d`` of the free-space
Green's function of the Laplacian in R^d (logarithmic in d = 2).
Confinements are radial potentials v(r) carrying closed-form derivatives
up to third order; :func:`validate_assumptions` probes the admissibility
conditions (monotonicity of v and of r^{d-1} v', derivative consistency,
growth at large r) on a geometric grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "CheckResult",
    "CoulombKernel",
    "RadialPotential",
    "ValidationReport",
    "gamma_half",
    "get_potential",
    "linear_potential",
    "omega",
    "phi",
    "phi_derivatives",
    "quadratic_potential",
    "quartic_potential",
    "validate_assumptions",
]


def check_dimension(d) -> int:
    """Return d as an int, requiring an integer dimension >= 1."""
    if isinstance(d, bool) or float(d) != int(d) or int(d) < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def gamma_half(d) -> float:
    """Gamma(d/2) for integer d >= 1, via the exact half-integer recursion.

    Built from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1 with
    Gamma(z + 1) = z Gamma(z); no general gamma implementation involved.
    """
    d = check_dimension(d)
    if d % 2 == 0:
        return float(math.factorial(d // 2 - 1))
    g = math.sqrt(math.pi)
    for k in range((d - 1) // 2):
        g *= k + 0.5
    return g


def omega(d) -> float:
    """Surface area of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2)."""
    d = check_dimension(d)
    return 2.0 * math.pi ** (d / 2) / gamma_half(d)


def _as_positive_radii(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("Coulomb kernel is singular: radii must be > 0")
    return arr, (np.isscalar(r) or arr.ndim == 0)


def phi(d, r):
    """Radial Coulomb potential: 1/((d-2) r^{d-2}) for d != 2, -log r for d = 2.

    Accepts a scalar or an ndarray of radii; r <= 0 raises ValueError.
    In d = 1 this reduces to -r, finite everywhere on r > 0.
    """
    d = check_dimension(d)
    arr, scalar = _as_positive_radii(r)
    if d == 2:
        out = -np.log(arr)
    else:
        out = arr ** (2 - d) / (d - 2)
    return float(out) if scalar else out


def phi_derivatives(d, r):
    """First three radial derivatives of phi_d.

    Returns ``(-1/r^{d-1}, (d-1)/r^d, d(1-d)/r^{d+1})``.  The middle sign
    follows from harmonicity away from the origin,
    phi'' + (d-1)/r phi' = 0, and is checkable against finite differences
    of :func:`phi`.
    """
    d = check_dimension(d)
    arr, scalar = _as_positive_radii(r)
    first = -arr ** (1 - d)
    second = (d - 1) * arr ** (-d)
    third = d * (1 - d) * arr ** (-d - 1)
    if scalar:
        return float(first), float(second), float(third)
    return first, second, third


class CoulombKernel:
    """Coulomb interaction in a fixed dimension; bundles d with omega_d."""

    def __init__(self, d):
        self.d = check_dimension(d)
        self.omega_d = omega(self.d)

    def phi(self, r):
        return phi(self.d, r)

    def phi_derivatives(self, r):
        return phi_derivatives(self.d, r)

    def __repr__(self):
        return f"CoulombKernel(d={self.d})"


@dataclass(frozen=True)
class RadialPotential:
    """Radial confinement v(r) with closed-form first three derivatives.

    All four callables must accept scalars and numpy arrays alike.
    Derivatives are supplied in closed form, not computed numerically:
    downstream derivative formulas need v', v'', v''' at full accuracy.
    """

    label: str
    v: Callable
    dv: Callable
    d2v: Callable
    d3v: Callable


def quadratic_potential() -> RadialPotential:
    """v(r) = r^2 / 2 (harmonic confinement; uniform neutralizing background)."""
    return RadialPotential(
        label="quadratic",
        v=lambda r: 0.5 * r**2,
        dv=lambda r: 1.0 * r,
        d2v=lambda r: 1.0 + 0.0 * r,
        d3v=lambda r: 0.0 * r,
    )


def quartic_potential() -> RadialPotential:
    """v(r) = r^4 / 4."""
    return RadialPotential(
        label="quartic",
        v=lambda r: 0.25 * r**4,
        dv=lambda r: r**3,
        d2v=lambda r: 3.0 * r**2,
        d3v=lambda r: 6.0 * r,
    )


def linear_potential(a: float) -> RadialPotential:
    """v(r) = a r with a > 0.  Only admissible for d >= 2."""
    a = float(a)
    if a <= 0.0:
        raise ValueError(f"linear potential requires a > 0, got {a}")
    return RadialPotential(
        label=f"linear-a:{a:g}",
        v=lambda r: a * r,
        dv=lambda r: a + 0.0 * r,
        d2v=lambda r: 0.0 * r,
        d3v=lambda r: 0.0 * r,
    )


_BUILTIN = {
    "quadratic": quadratic_potential,
    "quartic": quartic_potential,
    "linear-a": linear_potential,
}


def get_potential(spec: str) -> RadialPotential:
    """Look up a built-in potential by id, e.g. ``"quadratic"`` or ``"linear-a:2"``.

    Parameterized ids carry their parameter after a colon.  Unknown ids
    raise KeyError; custom potentials are constructed directly through
    :class:`RadialPotential`.
    """
    name, _, arg = spec.partition(":")
    if name not in _BUILTIN:
        raise KeyError(f"unknown potential {spec!r}; built-ins: {sorted(_BUILTIN)}")
    factory = _BUILTIN[name]
    if name == "linear-a":
        if not arg:
            raise ValueError("linear-a requires a parameter, e.g. 'linear-a:1.5'")
        return factory(float(arg))
    if arg:
        raise ValueError(f"potential {name!r} takes no parameter, got {spec!r}")
    return factory()


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    first_violation: Optional[float]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the admissibility checks for one (potential, d) pair."""

    potential: str
    d: int
    r_max: float
    n_probe: int
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = [f"validation of {self.potential!r} in d={self.d}:"]
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: {c.detail}")
        return "\n".join(lines)


def _strictly_increasing(name, grid, values) -> CheckResult:
    bad = np.nonzero(np.diff(values) <= 0.0)[0]
    if bad.size:
        r0 = float(grid[bad[0]])
        return CheckResult(name, False, r0, f"not strictly increasing at r={r0:.6g}")
    return CheckResult(name, True, None, "strictly increasing on the probe grid")


# (base function, claimed derivative, relative FD step, tolerance scale)
_FD_PLAN = (
    ("dv", 1e-6, 1e-5),
    ("d2v", 1e-6, 1e-5),
    ("d3v", 1e-5, 1e-3),
)


def _derivative_consistency(pot: RadialPotential, grid) -> CheckResult:
    chain = (pot.v, pot.dv, pot.d2v, pot.d3v)
    for order, (name, hrel, rtol) in enumerate(_FD_PLAN):
        f, g = chain[order], chain[order + 1]
        h = hrel * grid
        fd = (f(grid + h) - f(grid - h)) / (2.0 * h)
        claimed = g(grid) + 0.0 * grid
        err = np.abs(fd - claimed)
        bad = np.nonzero(err > rtol * (1.0 + np.abs(fd) + np.abs(claimed)))[0]
        if bad.size:
            r0 = float(grid[bad[0]])
            return CheckResult(
                "derivative-consistency",
                False,
                r0,
                f"{name} disagrees with finite differences at r={r0:.6g} "
                f"(|fd-closed|={float(err[bad[0]]):.3g})",
            )
    return CheckResult(
        "derivative-consistency", True, None, "dv, d2v, d3v match finite differences"
    )


def _growth_probe(pot: RadialPotential, d: int, r_max: float, threshold: float) -> CheckResult:
    if d >= 3:
        ok = bool(pot.v(r_max) > pot.v(r_max / 2.0))
        return CheckResult(
            "growth",
            ok,
            None if ok else float(r_max),
            "phi_d -> 0 at infinity; v increasing suffices" if ok else "v not growing at r_max",
        )
    # For d <= 2 the kernel |phi_d| grows; probe the confinement against it.
    ratio = float(pot.v(r_max)) / max(abs(phi(d, r_max)), 1e-300)
    ok = ratio > threshold
    return CheckResult(
        "growth",
        ok,
        None if ok else float(r_max),
        f"v(r_max)/|phi_d(r_max)| = {ratio:.3g} vs threshold {threshold:g} (heuristic probe)",
    )


def validate_assumptions(
    pot: RadialPotential,
    d,
    r_max: float,
    n_probe: int = 64,
    *,
    grid_span: float = 1e6,
    growth_threshold: float = 10.0,
) -> ValidationReport:
    """Probe the standing admissibility conditions on a geometric grid.

    Checks, on ``n_probe`` geometrically spaced points in (0, r_max]:

    (a) v strictly increasing,
    (b) r^{d-1} v'(r) strictly increasing,
    (c) supplied derivatives consistent with central finite differences,
    (d) growth of v against the kernel at r_max (d <= 2 only; for d >= 3
        the kernel decays, so growth of v is enough).

    Violations are reported per check with the first offending grid
    point; nothing is raised.  The geometric grid resolves behavior near
    the origin, where r^{d-1} v' degenerates fastest.  The growth
    condition is a limit statement; probing it at r_max is a documented
    heuristic, not a proof.
    """
    d = check_dimension(d)
    if r_max <= 0.0:
        raise ValueError("r_max must be > 0")
    if n_probe < 2:
        raise ValueError("n_probe must be >= 2")
    grid = np.geomspace(r_max / grid_span, r_max, int(n_probe))

    check_a = _strictly_increasing("v-monotone", grid, pot.v(grid) + 0.0 * grid)
    check_b = _strictly_increasing(
        "gauss-map-monotone", grid, grid ** (d - 1) * pot.dv(grid)
    )
    check_c = _derivative_consistency(pot, grid)
    check_d = _growth_probe(pot, d, float(r_max), growth_threshold)

    return ValidationReport(
        potential=pot.label,
        d=d,
        r_max=float(r_max),
        n_probe=int(n_probe),
        checks=(check_a, check_b, check_c, check_d),
    )
