"""The four singular-value extraction algorithms, instrumented with access counters.

Each extractor consumes a :class:`CountingMatrix` so that the number of
matrix products with A and the number of passes over A can be checked against
the expected per-algorithm access pattern: RR (1 pass, 1 matmul), SVD (1, 1),
generalized Nystrom (1 pass, 2 matmuls, the two products being independent),
HMT (2 passes, 2 matmuls, the second product needing the first's result).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernels import as_matrix, check_triangular_rank, singular_values, thin_qr
from .sketching import SubspacePair, validate_pair

RR = "RR"
SVD = "SVD"
GN = "GN"
HMT = "HMT"
METHODS = (RR, SVD, GN, HMT)

#: Expected (pass_count, matmul_count) per method.
ACCESS_PATTERN = {RR: (1, 1), SVD: (1, 1), GN: (1, 2), HMT: (2, 2)}


class CountingMatrix:
    """A matrix wrapper that counts products with A and passes over A.

    A pass groups products declared concurrent: calling ``multiply`` or
    ``rmultiply`` with ``join_pass=True`` records the product as part of the
    access opened by the previous product. Counters only increase. An instance
    must not be shared across concurrent extractions.
    """

    def __init__(self, a):
        self.inner = as_matrix(a)
        self.matmul_count = 0
        self.pass_count = 0

    @property
    def shape(self):
        return self.inner.shape

    def _count(self, join_pass: bool) -> None:
        self.matmul_count += 1
        if not join_pass:
            self.pass_count += 1

    def multiply(self, x, join_pass: bool = False) -> np.ndarray:
        """Return ``A @ x``, counting one product with A."""
        self._count(join_pass)
        return self.inner @ x

    def rmultiply(self, x, join_pass: bool = False) -> np.ndarray:
        """Return ``x @ A``, counting one product with A."""
        self._count(join_pass)
        return x @ self.inner


@dataclass(frozen=True)
class ExtractionResult:
    """Per-method approximate singular values plus retained factors and counters."""

    method: str
    sigma_hat: np.ndarray
    matmul_count: int
    pass_count: int
    factors: dict = field(default_factory=dict)


def extract_rr(a: CountingMatrix, s: SubspacePair) -> ExtractionResult:
    """Rayleigh-Ritz extraction: singular values of the compressed u.T @ A @ v."""
    validate_pair(s)
    atv = a.multiply(s.v_tilde)
    core = s.u_tilde.T @ atv
    sigma = singular_values(core)
    return ExtractionResult(
        method=RR,
        sigma_hat=sigma[: s.r],
        matmul_count=a.matmul_count,
        pass_count=a.pass_count,
        factors={"core": core},
    )


def extract_svd(a: CountingMatrix, s: SubspacePair) -> ExtractionResult:
    """One-sided projected SVD: singular values of A @ v. Only v_tilde is used."""
    validate_pair(s)
    av = a.multiply(s.v_tilde)
    return ExtractionResult(
        method=SVD,
        sigma_hat=singular_values(av),
        matmul_count=a.matmul_count,
        pass_count=a.pass_count,
        factors={"av": av},
    )


def extract_gn(a: CountingMatrix, s: SubspacePair, allow_nonorthonormal: bool = False) -> ExtractionResult:
    """Generalized Nystrom extraction, structure-exploiting.

    Computes the top r singular values of ``A v (u.T A v)^+ u.T A`` without
    forming the m x n product: thin-QR both external factors, QR the core, then
    take the singular values of ``R1 R3^-1 Q3.T R2.T``. The two products with A
    are independent, so they count as a single pass.

    Set ``allow_nonorthonormal=True`` to accept raw (non-orthonormal) sampling
    factors; the extraction itself does not require orthonormality, but the
    perturbation-bound machinery does.
    """
    if not allow_nonorthonormal:
        validate_pair(s)
    atv = a.multiply(s.v_tilde)
    ua = a.rmultiply(s.u_tilde.T, join_pass=True)

    r1 = thin_qr(atv).r
    r2 = thin_qr(ua.T).r
    core_qr = thin_qr(s.u_tilde.T @ atv)
    check_triangular_rank(core_qr.r)
    # Order of operations matters: contract Q3.T into R2.T before the
    # triangular solve so the ill-conditioned R3 inverse acts last.
    p = core_qr.q.T @ r2.T
    x = scipy.linalg.solve_triangular(core_qr.r, r1.T, trans="T", lower=False).T
    sigma = singular_values(x @ p)
    return ExtractionResult(
        method=GN,
        sigma_hat=sigma[: s.r],
        matmul_count=a.matmul_count,
        pass_count=a.pass_count,
        factors={"r1": r1, "r2": r2, "q3": core_qr.q, "r3": core_qr.r},
    )


def extract_hmt(a: CountingMatrix, s: SubspacePair) -> ExtractionResult:
    """HMT extraction: QR of A @ v, then singular values of Q.T @ A.

    Only v_tilde is used. The second product needs the first one's Q factor,
    so the two products are sequential: two passes over A.
    """
    validate_pair(s)
    atv = a.multiply(s.v_tilde)
    q = thin_qr(atv).q
    qa = a.rmultiply(q.T)
    return ExtractionResult(
        method=HMT,
        sigma_hat=singular_values(qa),
        matmul_count=a.matmul_count,
        pass_count=a.pass_count,
        factors={"q": q},
    )


EXTRACTORS = {RR: extract_rr, SVD: extract_svd, GN: extract_gn, HMT: extract_hmt}
