"""Continuous-variable quantum state tomography workbench.

Truncated Fock-basis states, homodyne/heterodyne measurement models,
Fisher-information error bounds, large-count sampling, maximum-likelihood
reconstruction, and a campaign runner that ties them together.
"""

from .errors import (
    DegenerateBinError,
    GridLeakageError,
    IllConditionedError,
    NoSignalError,
    NumericalError,
    TruncationBoundError,
    ValidationError,
)
from .fock import (
    DensityMatrix,
    GridSpec,
    StateSpec,
    coherent_overlap,
    default_heterodyne_grid,
    default_homodyne_grid,
    default_phases,
    heterodyne_pdf,
    homodyne_pdf,
    make_state,
    purity,
    quadrature_overlap,
    truncation_error,
    wigner,
)
from .ggm import (
    BlochVector,
    GgmBasis,
    build_basis,
    frobenius_sq,
    from_bloch,
    to_bloch,
)
from .fisher import (
    CfiMatrix,
    ConvergenceReport,
    convergence_sweep,
    crlb_frobenius,
    heterodyne_cfi,
    homodyne_cfi,
)
from .sim import (
    BinnedDistribution,
    Dataset,
    bin_distribution,
    load_dataset,
    sample_checkpoints,
    sample_counts,
    save_dataset,
)
from .mle import (
    MleConfig,
    MleResult,
    PovmSet,
    build_povm,
    log_likelihood,
    reconstruct,
    result_from_json,
    result_to_json,
)
from .bench import (
    CampaignConfig,
    ErrorCurve,
    campaign_from_config,
    default_checkpoints,
    emit_wigner_grid,
    run_campaign,
)

__version__ = "0.1.0"

__all__ = [
    "BinnedDistribution",
    "BlochVector",
    "CampaignConfig",
    "CfiMatrix",
    "ConvergenceReport",
    "Dataset",
    "DegenerateBinError",
    "DensityMatrix",
    "ErrorCurve",
    "GgmBasis",
    "GridLeakageError",
    "GridSpec",
    "IllConditionedError",
    "MleConfig",
    "MleResult",
    "NoSignalError",
    "NumericalError",
    "PovmSet",
    "StateSpec",
    "TruncationBoundError",
    "ValidationError",
    "bin_distribution",
    "build_basis",
    "build_povm",
    "campaign_from_config",
    "coherent_overlap",
    "convergence_sweep",
    "crlb_frobenius",
    "default_checkpoints",
    "default_heterodyne_grid",
    "default_homodyne_grid",
    "default_phases",
    "emit_wigner_grid",
    "frobenius_sq",
    "from_bloch",
    "heterodyne_cfi",
    "heterodyne_pdf",
    "homodyne_cfi",
    "homodyne_pdf",
    "load_dataset",
    "log_likelihood",
    "make_state",
    "purity",
    "quadrature_overlap",
    "reconstruct",
    "result_from_json",
    "result_to_json",
    "run_campaign",
    "sample_checkpoints",
    "sample_counts",
    "save_dataset",
    "to_bloch",
    "truncation_error",
    "wigner",
]
