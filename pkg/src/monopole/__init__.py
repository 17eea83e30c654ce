"""Pseudospectral simulator and verification harness for the planar
space-time monopole system in the potential (Coulomb) gauge.

The package reduces the first-order gauge system to two complexified wave
equations coupled to an elliptic constraint, steps them with an
exact-propagator Duhamel integrator, and ships the diagnostic toolkit used to
check the reduction: first-order residual reports, null-form evaluators,
wave-Sobolev estimate sampling, and the exponent-window calculator.
"""

#: Bumped whenever a sign or operator convention changes; stamped into every
#: snapshot header and run summary so outputs are comparable across builds.
CONVENTION_LEDGER_VERSION = "1"

__version__ = "0.1.0"

from .analysis import (  # noqa: E402,F401
    Interval,
    ParamWindow,
    RatioStats,
    SpaceTimeSample,
    admissible_params,
    estimate_ratio,
    mixed_norm,
    null_form_Q,
    null_form_Q12,
    scaling_residual,
    sobolev_norm,
    symbol_q,
    symbol_q_bound,
    symbol_q_region,
    trajectory_samples,
    wave_sobolev_norm,
)
from .auxsystem import (  # noqa: E402,F401
    AuxState,
    PhysState,
    Trajectory,
    assemble_Bpm,
    build_initial_data,
    consistency_report,
    elliptic_solve_A0,
    evolve,
    nonlinearity_B,
    picard_solve,
    reconstruct,
    wave_energy,
)
from .config import RunConfig, load_config, parse_config, save_config  # noqa: E402,F401
from .errors import (  # noqa: E402,F401
    BlowupError,
    ConfigError,
    GaugeError,
    MeanValueError,
    MonopoleError,
    NonContractionError,
    ReconstructionError,
    SmallnessError,
    SnapshotError,
)
from .gaugeforms import (  # noqa: E402,F401
    Connection,
    Curvature,
    FormField,
    coulomb_project,
    covariant_derivative,
    curvature,
    gauge_transform,
    hodge_star,
    monopole_residual,
)
from .kernels import backend_name  # noqa: E402,F401
from .liealg import (  # noqa: E402,F401
    bracket,
    dagger,
    frobenius_norm,
    is_antihermitian,
    is_traceless,
    lie_exp,
    project_antihermitian,
    random_su,
    su2_basis,
    sun_basis,
)
from .snapshot import load_snapshot, save_snapshot  # noqa: E402,F401
from .spectral import (  # noqa: E402,F401
    Multiplier,
    TorusGrid,
    apply_multiplier,
    duhamel_step,
    resample,
    wave_propagate,
)
