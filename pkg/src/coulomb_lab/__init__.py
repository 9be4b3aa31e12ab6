"""Volume-constrained Coulomb gases in radial potentials.

Equilibrium measures, excess free energies with their third-order
critical behavior, the single-particle escape tail, and two independent
verification routes: direct convex minimization of the discretized
mean-field functional, and finite-N Metropolis sampling.
"""

from . import cli, equilibrium, kernel, numerics, oracle, rate, sampler
from .equilibrium import (
    ConstrainedMeasure,
    CriticalRadiusError,
    EquilibriumCertificate,
    certify_equilibrium,
    certify_measure,
    constrained_measure,
    critical_radius,
    energy_density,
    mean_field_energy,
    radial_cdf,
)
from .kernel import (
    CoulombKernel,
    RadialPotential,
    ValidationReport,
    get_potential,
    omega,
    phi,
    phi_derivatives,
    validate_assumptions,
)
from .oracle import DiscretizedMeasure, OracleResult, RadialGrid
from .rate import (
    RateFunctionReport,
    TransitionScan,
    build_report,
    derivatives,
    excess_free_energy,
    quadratic_closed_form,
    right_tail,
    third_derivative_left_limit,
    transition_scan,
)
from .sampler import ChainState, DensityReport, GasConfig, SampleStats

__version__ = "0.1.0"
