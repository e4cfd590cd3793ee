"""Design, stability analysis and simulation of cluster states of globally
coupled identical phase oscillators."""

__version__ = "0.1.0"

from .cluster_algebra import (
    Certificate,
    ClusterState,
    IsotropyClass,
    Partition,
    SingularJacobianError,
    SolverError,
    enumerate_isotropy,
    existence_residual,
    inequivalence_certificate,
    reduced_vector_field,
    solve_phases,
)
from .coupling import (
    PRESETS,
    BumpPerturbation,
    FourierCoupling,
    PerturbedCoupling,
    perturbed_coupling,
    preset,
)
from .portrait import FixedPointKind, ReducedFixedPoint, difference_field, export_portrait, find_fixed_points
from .simulator import (
    SimConfig,
    SimulationError,
    Trajectory,
    connection_check,
    detect_clustering,
    integrate,
    itinerary,
    observables,
    saddle_set,
)
from .stability import (
    Classification,
    StabilityReport,
    bifurcation_thresholds,
    full_jacobian,
    stability_report,
    tangential_eigenvalues,
    transverse_classification,
    transverse_exponents,
)

__all__ = [
    "BumpPerturbation",
    "Certificate",
    "Classification",
    "ClusterState",
    "FixedPointKind",
    "FourierCoupling",
    "IsotropyClass",
    "PRESETS",
    "Partition",
    "PerturbedCoupling",
    "ReducedFixedPoint",
    "SimConfig",
    "SimulationError",
    "SingularJacobianError",
    "SolverError",
    "StabilityReport",
    "Trajectory",
    "bifurcation_thresholds",
    "connection_check",
    "detect_clustering",
    "difference_field",
    "enumerate_isotropy",
    "existence_residual",
    "export_portrait",
    "find_fixed_points",
    "full_jacobian",
    "inequivalence_certificate",
    "integrate",
    "itinerary",
    "observables",
    "perturbed_coupling",
    "preset",
    "reduced_vector_field",
    "saddle_set",
    "solve_phases",
    "stability_report",
    "tangential_eigenvalues",
    "transverse_classification",
    "transverse_exponents",
]
