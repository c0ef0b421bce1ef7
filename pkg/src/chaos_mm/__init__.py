"""chaos-mm: deterministic market-maker dynamics and chaos diagnostics.

Conservative models of a traded price coupled to market-maker inventory
under risk aversion, with symplectic integrators, surface-of-section and
Lyapunov/entropy analysis, action-angle perturbation predictions, and
seeded, bit-reproducible experiment ensembles.
"""

from .models import (
    Kick,
    ModelKind,
    ModelParams,
    PhaseState,
    PotentialGrid,
    Quadratic,
    SingularityError,
    dynamic_closed_form,
    el_rhs,
    energy,
    eom_rhs,
    grad_potential,
    hessian_potential,
    potential_grid,
    price_inventory,
)
from .integrate import (
    BLOWUP_THRESHOLD,
    YOSHIDA_W0,
    YOSHIDA_W1,
    SecondOrderTrajectory,
    TerminationStatus,
    Trajectory,
    integrate,
    integrate_el_rk4,
    step_leapfrog,
    step_yoshida4,
)
from .analysis import (
    CrossingPoint,
    LyapunovSpectrum,
    NoPeakError,
    PoincareSection,
    dominant_frequency,
    ellipse_residual,
    histogram,
    ks_entropy,
    lyapunov_spectrum,
    poincare_section,
    subsample,
)
from .kam import (
    ActionAngle,
    FrequencyReport,
    averaged_perturbation,
    canonicality_check,
    from_action_angle,
    predicted_frequencies,
    to_action_angle,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    PathResult,
    SamplingBox,
    SamplingExhaustedError,
    default_sampling_box,
    run_ensemble,
    run_lyapunov_sweep,
    sample_initial_condition,
)

__version__ = "0.1.0"
