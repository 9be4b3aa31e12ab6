"""Finite-N Metropolis sampling of the constrained Gibbs measure.

Single-particle Gaussian moves with a hard wall at radius R: proposals
leaving the ball are rejected outright, everything else is accepted
with probability min(1, exp(-beta dE)).  Chains are fully independent;
chain k draws from the stream ``SeedSequence([seed, k])`` so results
are bit-identical regardless of execution order or thread schedule.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibrium import ConstrainedMeasure, critical_radius
from .kernel import RadialPotential, check_dimension

__all__ = [
    "ChainState",
    "DensityReport",
    "GasConfig",
    "SampleStats",
    "SingularConfigurationError",
    "compare_density",
    "initial_state",
    "metropolis_sweep",
    "run",
    "stats_to_csv",
    "total_energy",
    "worker_cap",
]

_RESYNC_INTERVAL = 100  # sweeps between full energy recomputations
_ADAPT_RATE = 0.1  # burn-in step-size adaptation gain
_TARGET_ACCEPTANCE = 0.3
_MIN_N_MEANFIELD = 16  # below this, density comparisons are flagged


class SingularConfigurationError(ValueError):
    """Two particles coincide where the kernel diverges (d >= 2)."""


def worker_cap(n_tasks: int) -> int:
    """Worker count for parallel chains, capped by COULOMB_LAB_THREADS."""
    cap = os.cpu_count() or 1
    env = os.environ.get("COULOMB_LAB_THREADS")
    if env:
        cap = max(1, int(env))
    return max(1, min(n_tasks, cap))


def _phi_from_sq(d: int, r2):
    """phi_d evaluated on squared distances (avoids square roots for d != 1)."""
    if d == 2:
        return -0.5 * np.log(r2)
    return r2 ** (0.5 * (2 - d)) / (d - 2)


@dataclass(frozen=True)
class GasConfig:
    """Full specification of one sampling run; identical configs give identical stats."""

    N: int
    d: int
    beta: float
    R: float  # wall radius; math.inf for an unbounded gas
    pot: RadialPotential
    seed: int
    n_sweeps: int
    burn_in: int
    thinning: int = 1
    n_bins: int = 100
    hist_rmax: Optional[float] = None  # default: R, or 4 R* when unbounded
    wall_delta: Optional[float] = None  # default: 0.02 R

    def __post_init__(self):
        check_dimension(self.d)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.R <= 0.0:
            raise ValueError("wall radius must be > 0 (use math.inf for no wall)")
        if not 0 <= self.burn_in < self.n_sweeps:
            raise ValueError("need 0 <= burn_in < n_sweeps")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass
class ChainState:
    """Positions, cached total energy, and the current proposal scale."""

    positions: np.ndarray  # shape (N, d)
    energy: float
    step_size: float


def total_energy(positions: np.ndarray, pot: RadialPotential, d) -> float:
    """(1/2) sum_{i != j} phi_d(|x_i - x_j|) + N sum_k v(|x_k|)."""
    d = check_dimension(d)
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    radii = np.sqrt((pos**2).sum(axis=1))
    energy = n * float(np.sum(pot.v(radii)))
    if n > 1:
        diffs = pos[:, None, :] - pos[None, :, :]
        sq = (diffs**2).sum(axis=-1)
        iu = np.triu_indices(n, 1)
        pair_sq = sq[iu]
        if d >= 2 and np.any(pair_sq == 0.0):
            raise SingularConfigurationError("coincident particles in d >= 2")
        energy += float(np.sum(_phi_from_sq(d, pair_sq)))
    return energy


def initial_state(cfg: GasConfig, rng: np.random.Generator, r_init: float) -> ChainState:
    """Particles uniform in the ball of radius r_init; step at 30% of that scale."""
    dirs = rng.standard_normal((cfg.N, cfg.d))
    norms = np.sqrt((dirs**2).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    radii = r_init * rng.random(cfg.N) ** (1.0 / cfg.d)
    pos = dirs / norms * radii[:, None]
    return ChainState(
        positions=pos,
        energy=total_energy(pos, cfg.pot, cfg.d),
        step_size=0.3 * r_init,
    )


def metropolis_sweep(state: ChainState, cfg: GasConfig, rng: np.random.Generator):
    """One sweep of N single-particle updates; returns (new state, accepted moves).

    dE for a single move is accumulated in O(N) from the pairwise sums;
    the stored energy is updated incrementally.  Proposals outside the
    wall, and coincident-point proposals for d >= 2, are rejected.
    """
    pos = state.positions.copy()
    n, d = pos.shape
    beta = cfg.beta
    pot = cfg.pot
    r2_wall = cfg.R * cfg.R if math.isfinite(cfg.R) else math.inf
    noise = rng.standard_normal((n, d)) * state.step_size
    accept_u = rng.random(n)
    energy = state.energy
    accepted = 0
    for i in range(n):
        prop = pos[i] + noise[i]
        prop_r2 = float(prop @ prop)
        if prop_r2 > r2_wall:
            continue
        old = pos[i]
        d_energy = n * float(pot.v(math.sqrt(prop_r2)) - pot.v(math.sqrt(float(old @ old))))
        if n > 1:
            new_sq = ((pos - prop) ** 2).sum(axis=1)
            old_sq = ((pos - old) ** 2).sum(axis=1)
            # self-distance placeholder: identical in both sums, cancels exactly
            new_sq[i] = 1.0
            old_sq[i] = 1.0
            if d >= 2 and np.any(new_sq == 0.0):
                continue
            d_energy += float(np.sum(_phi_from_sq(d, new_sq)) - np.sum(_phi_from_sq(d, old_sq)))
        if d_energy > 0.0:
            arg = beta * d_energy
            if arg > 700.0 or accept_u[i] >= math.exp(-arg):
                continue
        pos[i] = prop
        energy += d_energy
        accepted += 1
    return ChainState(positions=pos, energy=energy, step_size=state.step_size), accepted


@dataclass(frozen=True)
class SampleStats:
    """Merged radial histogram and wall statistics from one or more chains."""

    bin_edges: np.ndarray
    counts: np.ndarray
    wall_fraction: float
    acceptance_rate: float
    n_samples: int
    n_chains: int
    config: GasConfig


def _run_chain(cfg: GasConfig, chain_index: int, edges, r_init, wall_delta):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chain_index]))
    state = initial_state(cfg, rng, r_init)
    n_bins = len(edges) - 1
    counts = np.zeros(n_bins, dtype=np.int64)
    wall_hits = 0
    n_recorded = 0
    acc_sampling = 0
    moves_sampling = 0
    rmax = edges[-1]
    clip_hi = rmax * (1.0 - 1e-12)
    for sweep in range(cfg.n_sweeps):
        state, acc = metropolis_sweep(state, cfg, rng)
        if sweep < cfg.burn_in:
            rate = acc / cfg.N
            state.step_size *= math.exp(_ADAPT_RATE * (rate - _TARGET_ACCEPTANCE))
        else:
            acc_sampling += acc
            moves_sampling += cfg.N
            if (sweep - cfg.burn_in) % cfg.thinning == 0:
                radii = np.sqrt((state.positions**2).sum(axis=1))
                hist, _ = np.histogram(np.clip(radii, 0.0, clip_hi), bins=edges)
                counts += hist
                if wall_delta is not None:
                    wall_hits += int(np.count_nonzero(radii > cfg.R - wall_delta))
                n_recorded += 1
        if (sweep + 1) % _RESYNC_INTERVAL == 0:
            state.energy = total_energy(state.positions, cfg.pot, cfg.d)
    return counts, wall_hits, n_recorded, acc_sampling, moves_sampling


def run(cfg: GasConfig, n_chains: int = 1) -> SampleStats:
    """Run independent chains and merge their statistics deterministically.

    The proposal scale adapts toward 30% acceptance during burn-in only
    and is frozen afterward, preserving detailed balance in the sampling
    phase.  Post-burn-in configurations are recorded every ``thinning``
    sweeps.  Chain k owns the RNG stream SeedSequence([seed, k]);
    merging is an order-independent histogram sum, so (cfg, n_chains)
    determines the result bit-for-bit.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    r_star = critical_radius(cfg.pot, cfg.d)
    finite_wall = math.isfinite(cfg.R)
    r_init = min(cfg.R, r_star) if finite_wall else r_star
    rmax = cfg.hist_rmax if cfg.hist_rmax is not None else (cfg.R if finite_wall else 4.0 * r_star)
    edges = np.linspace(0.0, rmax, cfg.n_bins + 1)
    wall_delta = None
    if finite_wall:
        wall_delta = cfg.wall_delta if cfg.wall_delta is not None else 0.02 * cfg.R

    workers = worker_cap(n_chains)
    if workers == 1 or n_chains == 1:
        results = [_run_chain(cfg, k, edges, r_init, wall_delta) for k in range(n_chains)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda k: _run_chain(cfg, k, edges, r_init, wall_delta), range(n_chains))
            )

    counts = np.zeros(cfg.n_bins, dtype=np.int64)
    wall_hits = 0
    n_recorded = 0
    acc = 0
    moves = 0
    for c, w, nr, a, m in results:
        counts += c
        wall_hits += w
        n_recorded += nr
        acc += a
        moves += m
    return SampleStats(
        bin_edges=edges,
        counts=counts,
        wall_fraction=(wall_hits / (n_recorded * cfg.N)) if wall_delta is not None else 0.0,
        acceptance_rate=acc / moves if moves else 0.0,
        n_samples=n_recorded,
        n_chains=int(n_chains),
        config=cfg,
    )


@dataclass(frozen=True)
class DensityReport:
    """Distance between sampled and analytic radial laws."""

    bulk_l1: float
    wall_gap: float
    delta: float
    n_bulk_bins: int
    flag: Optional[str] = None


def compare_density(stats: SampleStats, measure: ConstrainedMeasure, delta: Optional[float] = None) -> DensityReport:
    """Normalized L1 distance of the bulk histogram from the analytic bulk density.

    Bins inside [0, R - delta] are compared shape-to-shape (both sides
    renormalized to unit mass); the wall shell is summarized separately
    as |wall_fraction - surface_weight|.
    """
    cfg = stats.config
    if delta is None:
        delta = cfg.wall_delta if cfg.wall_delta is not None else 0.02 * cfg.R
    edges = stats.bin_edges
    cut = cfg.R - delta
    bulk = edges[1:] <= cut + 1e-12
    n_bulk = int(np.count_nonzero(bulk))
    flag = None
    if cfg.N < _MIN_N_MEANFIELD:
        flag = "N too small for mean-field comparison"
    counts = stats.counts[bulk].astype(float)
    total = counts.sum()
    from .equilibrium import radial_cdf  # local import avoids cycle at module load

    cdf_edges = radial_cdf(measure, edges)
    bulk_masses = np.diff(cdf_edges)[bulk]
    mass = bulk_masses.sum()
    if total == 0.0 or mass == 0.0:
        return DensityReport(math.nan, abs(stats.wall_fraction - measure.surface_weight), float(delta), n_bulk, flag)
    l1 = float(np.abs(counts / total - bulk_masses / mass).sum())
    return DensityReport(
        bulk_l1=l1,
        wall_gap=abs(stats.wall_fraction - measure.surface_weight),
        delta=float(delta),
        n_bulk_bins=n_bulk,
        flag=flag,
    )


def stats_to_csv(stats: SampleStats, csv_path, json_path=None) -> None:
    """Write the histogram as CSV (bin_left, bin_right, count) plus a JSON sidecar."""
    import json as _json

    lines = ["bin_left,bin_right,count"]
    for lo, hi, c in zip(stats.bin_edges[:-1], stats.bin_edges[1:], stats.counts):
        lines.append(f"{lo!r},{hi!r},{int(c)}")
    with open(csv_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    cfg = stats.config
    header = {
        "N": cfg.N,
        "d": cfg.d,
        "beta": cfg.beta,
        "R": cfg.R if math.isfinite(cfg.R) else "inf",
        "seed": cfg.seed,
        "n_chains": stats.n_chains,
        "acceptance_rate": stats.acceptance_rate,
        "wall_fraction": stats.wall_fraction,
    }
    if json_path is None:
        json_path = str(csv_path)[:-4] + ".json" if str(csv_path).endswith(".csv") else str(csv_path) + ".json"
    with open(json_path, "w") as fh:
        fh.write(_json.dumps(header, sort_keys=True) + "\n")
