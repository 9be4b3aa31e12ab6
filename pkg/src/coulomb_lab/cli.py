"""Command-line interface: reproducible runs emitting CSV/JSON tables.

Subcommands: rate, density, critical, verify, oracle, sample.  Every
command is deterministic given its full flag set (including the seed).
Exit codes: 0 success, 1 verification failure, 2 usage/config error.
CSV files are RFC-4180 (header row, LF endings); machine-readable
metadata goes to a JSON sidecar next to each CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import equilibrium, oracle, rate, sampler
from .kernel import get_potential, validate_assumptions

__all__ = ["main"]

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _parse_grid(spec: str):
    try:
        start_s, stop_s, count_s = spec.split(":")
        start, stop, count = float(start_s), float(stop_s), int(count_s)
    except ValueError as exc:
        raise UsageError(f"bad grid {spec!r}; expected start:stop:count") from exc
    if count < 2 or not start < stop:
        raise UsageError(f"bad grid {spec!r}; need count >= 2 and start < stop")
    return np.linspace(start, stop, count)


def _parse_dims(spec: str):
    try:
        dims = [int(tok) for tok in spec.split(",") if tok]
    except ValueError as exc:
        raise UsageError(f"bad dimension list {spec!r}") from exc
    if not dims or any(d < 1 for d in dims):
        raise UsageError(f"bad dimension list {spec!r}")
    return dims


def _potential(spec: str):
    try:
        return get_potential(spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _radius(spec: str) -> float:
    if spec.lower() in ("inf", "unbounded"):
        return math.inf
    try:
        return float(spec)
    except ValueError as exc:
        raise UsageError(f"bad radius {spec!r}") from exc


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, sort_keys=True) + "\n")


def cmd_rate(args) -> int:
    pot = _potential(args.potential)
    grid = _parse_grid(args.grid)
    out = _outdir(args)
    for d in _parse_dims(args.d):
        report = rate.build_report(pot, d, grid)
        base = os.path.join(out, f"rate_{pot.label.replace(':', '_')}_d{d}")
        if args.format == "csv":
            rate.report_to_csv(report, base + ".csv", base + ".json")
        else:
            _write_json(
                base + ".json",
                {
                    "d": report.d,
                    "r_star": report.r_star,
                    "third_left_limit": report.third_left_limit,
                    "third_jump": report.third_jump,
                    "R": list(report.grid),
                    "F": list(report.F),
                    "dF": list(report.dF),
                    "d2F": list(report.d2F),
                    "d3F": list(report.d3F),
                },
            )
        print(f"wrote {base}.{args.format} (d={d}, r_star={report.r_star!r})")
    return EXIT_OK


def cmd_critical(args) -> int:
    pot = _potential(args.potential)
    for d in _parse_dims(args.d):
        r_star = equilibrium.critical_radius(pot, d)
        print(f"potential={pot.label} d={d} r_star={r_star!r}")
        if args.out != ".":
            out = _outdir(args)
            _write_json(
                os.path.join(out, f"critical_{pot.label.replace(':', '_')}_d{d}.json"),
                {"potential": pot.label, "d": d, "r_star": r_star},
            )
    return EXIT_OK


def cmd_density(args) -> int:
    pot = _potential(args.potential)
    (d,) = _parse_dims(args.d)
    measure = equilibrium.constrained_measure(pot, d, _radius(args.R))
    out = _outdir(args)
    base = os.path.join(out, f"measure_{pot.label.replace(':', '_')}_d{d}_R{args.R}")
    equilibrium.measure_to_csv(measure, base + ".csv", base + ".json", rows=args.rows)
    print(f"wrote {base}.csv (surface_weight={measure.surface_weight!r})")
    return EXIT_OK


def _verify_checks(pot, d, args):
    """Yield (name, passed, detail) rows for the verification battery."""
    report = validate_assumptions(pot, d, r_max=50.0, n_probe=256)
    yield ("assumptions", report.passed, "; ".join(
        f"{c.name}={'ok' if c.passed else 'FAIL'}" for c in report.checks
    ))
    if not report.passed:
        return

    r_star = equilibrium.critical_radius(pot, d)
    resid = abs(r_star ** (d - 1) * float(pot.dv(r_star)) - 1.0)
    yield ("critical-radius", resid <= 1e-12, f"r_star={r_star!r} residual={resid:.2e}")

    for frac in (0.3, 0.6, 1.0):
        cert = equilibrium.certify_equilibrium(pot, d, frac * r_star, probes=32, tol=args.cert_tol)
        yield (
            f"equilibrium-certificate-R{frac:g}",
            cert.passed,
            f"max_dev_inside={cert.max_dev_inside:.2e} min_margin_outside={cert.min_margin_outside:.2e}",
        )

    if pot.label == "quadratic":
        grid = np.linspace(0.1, 1.2, 50)
        gap = max(
            abs(rate.excess_free_energy(pot, d, R, r_star=r_star) - rate.quadratic_closed_form(d, R))
            for R in grid
        )
        yield ("closed-form-agreement", gap <= 1e-9, f"max gap {gap:.2e} on 50-point grid")

    R0 = 0.7 * r_star
    a1, a2, a3 = rate.derivatives(pot, d, R0, r_star=r_star)
    h = 1e-4 * r_star
    f = [rate.excess_free_energy(pot, d, R0 + k * h, r_star=r_star) for k in (-2, -1, 0, 1, 2)]
    fd1 = (f[3] - f[1]) / (2 * h)
    fd2 = (f[3] - 2 * f[2] + f[1]) / h**2
    fd3 = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * h**3)
    ok = (
        abs(fd1 - a1) <= 1e-5 * max(1.0, abs(a1))
        and abs(fd2 - a2) <= 1e-4 * max(1.0, abs(a2))
        and abs(fd3 - a3) <= 1e-2 * max(1.0, abs(a3))
    )
    yield ("derivative-consistency", ok, f"analytic vs FD at R=0.7 r_star: F'={a1:.6g} (fd {fd1:.6g})")

    f_energy = equilibrium.mean_field_energy(pot, d, 0.6 * r_star) - equilibrium.mean_field_energy(pot, d, r_star)
    f_direct = rate.excess_free_energy(pot, d, 0.6 * r_star, r_star=r_star)
    yield (
        "free-energy-identity",
        abs(f_energy - f_direct) <= 1e-9,
        f"energy route {f_energy!r} vs direct {f_direct!r}",
    )

    scan = rate.transition_scan(pot, d, args.scan_h)
    extrap = scan.richardson_third()
    limit = scan.third_left_limit
    ok_scan = (
        limit < 0.0
        and abs(extrap - limit) <= 0.02 * abs(limit)
        and abs(scan.cubic_ratio[-1] - (-limit) / 6.0) <= 0.02 * abs(limit) / 6.0
        and all(v == 0.0 for v in scan.right_third)
    )
    yield (
        "third-order-transition",
        ok_scan,
        f"third_left_limit={limit!r} richardson={extrap!r} cubic_ratio={scan.cubic_ratio[-1]!r}",
    )


def cmd_verify(args) -> int:
    pot = _potential(args.potential)
    failures = []
    for d in _parse_dims(args.d):
        print(f"== verify {pot.label} d={d}")
        for name, passed, detail in _verify_checks(pot, d, args):
            print(f"  [{'pass' if passed else 'FAIL'}] {name}: {detail}")
            if not passed:
                failures.append({"d": d, "check": name, "detail": detail})
    if failures:
        print(json.dumps({"failures": failures}, sort_keys=True))
        return EXIT_VERIFY_FAILED
    print("all checks passed")
    return EXIT_OK


def cmd_oracle(args) -> int:
    pot = _potential(args.potential)
    (d,) = _parse_dims(args.d)
    R = _radius(args.R)
    if not math.isfinite(R):
        raise UsageError("oracle requires a finite wall radius")
    result = oracle.minimize(pot, d, R, n=args.n, max_iter=args.max_iter, tol=args.tol)
    out = _outdir(args)
    base = os.path.join(out, f"oracle_{pot.label.replace(':', '_')}_d{d}_R{args.R}_n{args.n}")
    oracle.result_to_csv(result, base + ".csv", base + ".json")
    print(
        f"wrote {base}.csv (iterations={result.iterations}, "
        f"kkt_residual={result.kkt_residual:.3e}, converged={result.converged})"
    )
    if result.converged:
        cmp = oracle.compare_to_analytic(result, pot, d, R)
        _write_json(
            base + "_comparison.json",
            {
                "energy_gap": cmp.energy_gap,
                "bulk_l1": cmp.bulk_l1,
                "surface_gap": cmp.surface_gap,
                "analytic_energy": cmp.analytic_energy,
                "surface_weight": cmp.surface_weight,
            },
        )
        print(
            f"comparison: energy_gap={cmp.energy_gap:.3e} bulk_l1={cmp.bulk_l1:.3e} "
            f"surface_gap={cmp.surface_gap:.3e}"
        )
    return EXIT_OK


def cmd_sample(args) -> int:
    pot = _potential(args.potential)
    (d,) = _parse_dims(args.d)
    cfg = sampler.GasConfig(
        N=args.N,
        d=d,
        beta=args.beta,
        R=_radius(args.R),
        pot=pot,
        seed=args.seed,
        n_sweeps=args.sweeps,
        burn_in=args.burn_in if args.burn_in is not None else args.sweeps // 5,
        thinning=args.thin,
        n_bins=args.bins,
        wall_delta=args.delta,
    )
    stats = sampler.run(cfg, n_chains=args.chains)
    out = _outdir(args)
    base = os.path.join(out, f"sample_{pot.label.replace(':', '_')}_d{d}_R{args.R}_seed{args.seed}")
    sampler.stats_to_csv(stats, base + ".csv", base + ".json")
    print(
        f"wrote {base}.csv (acceptance={stats.acceptance_rate:.3f}, "
        f"wall_fraction={stats.wall_fraction!r})"
    )
    if math.isfinite(cfg.R):
        measure = equilibrium.constrained_measure(pot, d, min(cfg.R, equilibrium.critical_radius(pot, d)))
        report = sampler.compare_density(stats, measure)
        _write_json(
            base + "_comparison.json",
            {
                "bulk_l1": report.bulk_l1,
                "wall_gap": report.wall_gap,
                "delta": report.delta,
                "n_bulk_bins": report.n_bulk_bins,
                "flag": report.flag,
            },
        )
        print(f"comparison: bulk_l1={report.bulk_l1!r} wall_gap={report.wall_gap!r}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coulomb-lab",
        description="Constrained Coulomb gas: rate functions, equilibrium measures, "
        "convex-minimization and Monte Carlo verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--potential", required=True, help="quadratic | quartic | linear-a:<a>")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_rate = sub.add_parser("rate", help="excess free energy tables over an R grid")
    common(p_rate)
    p_rate.add_argument("--d", required=True, help="comma-separated dimensions, e.g. 1,2,3,5,15")
    p_rate.add_argument("--grid", required=True, help="R grid as start:stop:count")
    p_rate.set_defaults(func=cmd_rate)

    p_crit = sub.add_parser("critical", help="critical radius r_star")
    common(p_crit)
    p_crit.add_argument("--d", required=True)
    p_crit.set_defaults(func=cmd_critical)

    p_dens = sub.add_parser("density", help="constrained equilibrium measure at one R")
    common(p_dens)
    p_dens.add_argument("--d", required=True)
    p_dens.add_argument("--R", required=True)
    p_dens.add_argument("--rows", type=int, default=512)
    p_dens.set_defaults(func=cmd_density)

    p_ver = sub.add_parser("verify", help="run the verification battery")
    common(p_ver)
    p_ver.add_argument("--d", required=True)
    p_ver.add_argument("--cert-tol", type=float, default=1e-7)
    p_ver.add_argument(
        "--scan-h", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4],
        help="finite-difference steps for the transition scan",
    )
    p_ver.set_defaults(func=cmd_verify)

    p_orc = sub.add_parser("oracle", help="projected-gradient minimization of the discrete functional")
    common(p_orc)
    p_orc.add_argument("--d", required=True)
    p_orc.add_argument("--R", required=True)
    p_orc.add_argument("--n", type=int, default=2000)
    p_orc.add_argument("--tol", type=float, default=1e-8)
    p_orc.add_argument("--max-iter", type=int, default=200_000)
    p_orc.set_defaults(func=cmd_oracle)

    p_smp = sub.add_parser("sample", help="Metropolis sampling of the constrained gas")
    common(p_smp)
    p_smp.add_argument("--d", required=True)
    p_smp.add_argument("--N", type=int, required=True)
    p_smp.add_argument("--beta", type=float, required=True)
    p_smp.add_argument("--R", required=True, help="wall radius, or 'inf'")
    p_smp.add_argument("--sweeps", type=int, required=True)
    p_smp.add_argument("--burn-in", type=int, default=None, help="default: sweeps // 5")
    p_smp.add_argument("--thin", type=int, default=1)
    p_smp.add_argument("--chains", type=int, default=1)
    p_smp.add_argument("--seed", type=int, default=0)
    p_smp.add_argument("--bins", type=int, default=100)
    p_smp.add_argument("--delta", type=float, default=None, help="wall shell width (default 0.02 R)")
    p_smp.set_defaults(func=cmd_sample)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; pass its code through
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, equilibrium.CriticalRadiusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
