"""Extract leading singular values from approximate singular subspaces.

Four extraction methods (Rayleigh-Ritz, one-sided projected SVD, generalized
Nystrom, HMT) plus structured matrix-perturbation bounds that are provably
tighter than the uniform spectral-norm baseline for leading singular values,
and an experiment harness that writes reproducible CSV sweeps.
"""

from .blockview import (
    BlockPartition,
    PerturbationBlocks,
    block_transform,
    perturbation_matrix,
    square_head_repartition,
)
from .bounds import (
    Block2x2,
    BlockTridiagonal,
    BoundReport,
    TridiagPerturbation,
    backward_bound,
    block2x2_bound,
    block_tridiagonal,
    composite_min_with_weyl,
    forward_bound,
    improved_oversampling_bound,
    right_perturbation_bound,
    tridiag_perturbation,
    tridiagonal_bound,
    weyl,
)
from .extract import (
    GN,
    HMT,
    METHODS,
    RR,
    SVD,
    CountingMatrix,
    ExtractionResult,
    extract_gn,
    extract_hmt,
    extract_rr,
    extract_svd,
)
from .kernels import (
    RankDeficientCore,
    SvdFactors,
    ThinQr,
    pinv_solve,
    singular_values,
    spectral_norm,
    svd_factors,
    thin_qr,
)
from .sketching import SubspacePair, exact_subspaces, random_subspaces, sketch_subspaces
from .synthgen import (
    ALGEBRAIC,
    EXPONENTIAL,
    SvProfile,
    SyntheticMatrix,
    assemble_synthetic,
    custom_profile,
    haar_orthonormal,
    sv_profile,
    to_matrix_market,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
