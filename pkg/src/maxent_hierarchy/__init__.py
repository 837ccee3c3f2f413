"""Maximum-entropy hierarchy of equilibrium ensembles for isolated spin chains."""

__version__ = "0.1.0"

from .basis import Basis, MomentVector, Rescale  # noqa: E402
from .ensembles import (  # noqa: E402
    DiagonalEnsemble,
    InitialState,
    diagonal_ensemble,
    moments_operator,
    moments_spectral,
    neel_state,
)
from .hierarchy import ExperimentConfig, HierarchyReport, run_hierarchy, snapshot_distribution  # noqa: E402
from .maxent import (  # noqa: E402
    MaxEntEnsemble,
    SolverOptions,
    consistency_report,
    gibbs_crosscheck,
    multipliers_monomial,
    solve_maxent,
)
from .metrics import (  # noqa: E402
    ConvergenceRecord,
    fidelity_series,
    mgf_compare,
    relative_entropy,
    shannon_entropy,
    trace_distance_commuting,
    trace_distance_pure_states,
)
from .spin_chain import SpectralData, SpinChainParams, build_hamiltonian, diagonalize  # noqa: E402
