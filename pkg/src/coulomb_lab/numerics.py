"""Shared numerical helpers: adaptive quadrature with error control."""

from __future__ import annotations

from scipy import integrate

__all__ = ["QuadratureError", "quad_checked"]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def quad_checked(f, a, b, *, epsabs=1e-12, epsrel=1e-12, limit=300, need=1e-10):
    """Integrate f over [a, b], raising if the achieved error exceeds `need`.

    Thin wrapper over scipy's adaptive Gauss-Kronrod integrator; the
    integrands here are smooth apart from integrable endpoint
    singularities, so the requested tolerances are normally exceeded by
    a wide margin.
    """
    if a == b:
        return 0.0
    out = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > max(need, epsrel * abs(value)):
        raise QuadratureError(
            f"quadrature on [{a:g}, {b:g}] achieved only {abserr:.3e} "
            f"(needed {need:.1e}): {out[3]}"
        )
    return value
