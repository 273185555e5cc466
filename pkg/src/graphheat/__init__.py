"""graphheat: heat semigroups, spectral bottoms, and semilinear blow-up on
weighted graphs approximated by Dirichlet truncations."""

from .analysis import (
    Certificate,
    CriterionResult,
    H_tilde,
    LowerBoundCheck,
    PhiSeries,
    cumulative_H,
    lemma1_lower_bound_check,
    lemma2_blowup_time_bound,
    phi_ode_check,
    phi_series,
    theorem1_criterion,
    theorem2_certificate,
)
from .graphs import (
    FamilySpec,
    TruncatedDomain,
    WeightedGraph,
    build_graph,
    gen_cycle,
    gen_lattice_box,
    gen_tree_ball,
    load_graph,
    save_graph,
)
from .heat import (
    DecayRate,
    KernelColumn,
    KernelReport,
    envelope_constant,
    heat_apply,
    heat_kernel_column,
    kernel_decay_rate,
    validate_kernel,
)
from .solver import (
    BLOWUP,
    COMPLETED,
    FAILURE,
    MonitorResult,
    Problem,
    Trajectory,
    global_bound_monitor,
    mol_reference_solve,
    picard_slab,
    solve,
)
from .sources import SourceSpec
from .spectral import (
    ExhaustionResult,
    SpectralEstimate,
    apply_laplacian,
    lambda1,
    lambda1_exhaustion,
)

__version__ = "0.1.0"

__all__ = [
    "BLOWUP",
    "COMPLETED",
    "FAILURE",
    "Certificate",
    "CriterionResult",
    "DecayRate",
    "ExhaustionResult",
    "FamilySpec",
    "H_tilde",
    "KernelColumn",
    "KernelReport",
    "LowerBoundCheck",
    "MonitorResult",
    "PhiSeries",
    "Problem",
    "SourceSpec",
    "SpectralEstimate",
    "Trajectory",
    "TruncatedDomain",
    "WeightedGraph",
    "apply_laplacian",
    "build_graph",
    "cumulative_H",
    "envelope_constant",
    "gen_cycle",
    "gen_lattice_box",
    "gen_tree_ball",
    "global_bound_monitor",
    "heat_apply",
    "heat_kernel_column",
    "kernel_decay_rate",
    "lambda1",
    "lambda1_exhaustion",
    "lemma1_lower_bound_check",
    "lemma2_blowup_time_bound",
    "load_graph",
    "mol_reference_solve",
    "phi_ode_check",
    "phi_series",
    "picard_slab",
    "save_graph",
    "solve",
    "theorem1_criterion",
    "theorem2_certificate",
    "validate_kernel",
]
