"""Quantum Otto cycle fuelled by thermally correlated atom pairs."""
from .correlations import (
    TwoQubitThermalState, concurrence, discord, discord_of, thermal_state, xi_for_discord,
)
from .cycle import (
    CycleConfig, CycleMoments, Mode, Variant, characteristic_function, cycle_moments, efficiency,
    tur_bound,
)
from .errors import (
    BranchCutError, ConvergenceError, DiagnosticError, DomainError, NormalizationError, OttoError,
    TruncationError,
)
from .fock_dynamics import (
    DrivingProtocol, lindblad_steady_state, nonadiabatic_factor_analytic,
    nonadiabatic_factor_numeric, unitary_transition_matrix,
)
from .reservoir import ReservoirKind, ReservoirSpec, effective_reservoir
from .stochastic import (
    JointWorkHeatDistribution, build_joint_distribution, build_reversed_distribution,
    entropy_production_distribution, sample_trajectories,
)

__version__ = "0.1.0"
