"""Recovering macroscopic mobility functions from microscopic fluctuations.

Simulators for the symmetric exclusion process, independent Brownian
particles, and conservative fluctuating-hydrodynamics SPDEs, together with
the quadratic-variation estimator of the mobility pairing and the exact
spectral references it is validated against.
"""

__version__ = "0.1.0"

from .lattice import (
    GridField,
    Torus,
    TrigExpr,
    TrigTerm,
    format_trig,
    jump_weight_value,
    parse_trig,
    riemann_mean,
)
from .analytic import (
    DiscreteKernel,
    discrete_laplacian,
    discrete_semigroup,
    heat_solve,
    mobility_reference,
    riemann_mobility,
    riemann_pairing,
    semigroup_apply,
)
from .ssep import (
    Configuration,
    SsepParams,
    SsepPath,
    advance,
    advance_event_list,
    carre_du_champ_qv_rate,
    empirical,
    fluctuation,
    mean_occupancy_oracle,
    sample_initial,
    simulate_path,
    stationary_qv_reference,
)
from .brownian import (
    ParticleEnsemble,
    advance_particles,
    particle_fluctuation,
    sample_initial_particles,
)
from .fhd import (
    NoiseSpec,
    SigmaReg,
    SpdeBlowupError,
    SpdeParams,
    SpdeState,
    ViolationStats,
    dk_truncated_run,
    initial_state,
    make_noise_increment,
    run_spde,
    spde_fluctuation,
    spde_step,
    stability_dt,
)
from .estimate import (
    BrownianParams,
    EstimateRecord,
    qv_estimate,
    rate_fit,
    run_qv_experiment,
    simulate_increments,
)
from .harness import ConfigError, ExperimentConfig, parse_config, report, run

__all__ = [name for name in dir() if not name.startswith("_")]
