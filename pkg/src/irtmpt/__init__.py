"""IRT-MPT picture-naming response model and identifiability diagnostics."""

from .graph import (
    CATEGORIES,
    CATEGORY_NAMES,
    PathSet,
    ProcessGraph,
    ResponseCategory,
    build_default_graph,
    enumerate_paths,
    oracle_distribution,
)
from .params import (
    AdditiveFit,
    GaugeShift,
    IrtParams,
    ModelDims,
    PsiTable,
    additive_decompose,
    build_psi_table,
    canonicalize,
    from_canonical_coords,
    gauge_shift,
    link,
    param_count,
    read_params,
    to_canonical_coords,
    write_params,
)
from .forward import (
    ConditionalProbs,
    EqualityReport,
    RatioSet,
    category_distribution,
    check_necessary_equalities,
    conditional_probs_from_distribution,
    conditional_probs_from_psi,
    derived_ratios,
    distribution_csv,
    distribution_table,
)
from .equivalence import (
    CaseLabel,
    EquivalentPair,
    EtaXiTransform,
    TransformResult,
    apply_transform,
    classify_case,
    eta_range,
    generate_nonidentifiable,
    generator_eta_range,
    lift_table,
    verify_pair,
    xi_range,
)
from .diagnostics import (
    JacobianMatrix,
    RankReport,
    ResponseCounts,
    fisher_information,
    identifiability_report,
    jacobian,
    log_likelihood,
    numerical_rank,
    simulate,
)

__version__ = "0.1.0"
