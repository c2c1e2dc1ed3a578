"""Dense linear-algebra primitives: thin QR, SVD, spectral norm, pseudoinverse solves.

Everything here operates on plain 2-D float64 ``numpy`` arrays and is a pure
function of its inputs, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Relative threshold on the diagonal of a triangular factor below which a
# nominally full-column-rank matrix is treated as rank deficient.
RANK_TOL = 1e-12


class RankDeficientCore(Exception):
    """The core matrix of a pseudoinverse application is numerically rank deficient."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


@dataclass(frozen=True)
class ThinQr:
    """Reduced QR factorization: ``q`` has orthonormal columns, ``r`` is upper triangular."""

    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SvdFactors:
    """Economic SVD ``u @ diag(sigma) @ v.T`` with descending nonnegative ``sigma``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def thin_qr(m) -> ThinQr:
    """Reduced QR factorization of a tall (rows >= cols) matrix.

    Deterministic for a fixed input; raises ``ValueError`` for wide matrices.
    """
    m = as_matrix(m)
    rows, cols = m.shape
    if cols == 0 or rows < cols:
        raise ValueError(f"thin_qr needs rows >= cols >= 1, got {rows}x{cols}")
    q, r = np.linalg.qr(m)
    return ThinQr(q=q, r=r)


def singular_values(m) -> np.ndarray:
    """All singular values of ``m``, descending.

    Size-zero inputs (used for degenerate block bookkeeping) yield an empty array.
    """
    m = as_matrix(m)
    if m.size == 0:
        return np.zeros(min(m.shape))
    return np.linalg.svd(m, compute_uv=False)


def svd_factors(m) -> SvdFactors:
    """Economic SVD of ``m``."""
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdFactors(u=u, sigma=s, v=vt.T)


def spectral_norm(m) -> float:
    """Largest singular value of ``m``; zero for size-zero inputs."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def check_triangular_rank(r: np.ndarray, tol: float = RANK_TOL) -> None:
    """Raise ``RankDeficientCore`` if the triangular factor ``r`` signals rank loss.

    The test is ``min |diag(r)| < tol * max |diag(r)|``, i.e. a relative drop on
    the diagonal of the R factor from a QR factorization.
    """
    d = np.abs(np.diag(r))
    if d.size == 0 or d.max() == 0.0 or d.min() < tol * d.max():
        raise RankDeficientCore(
            f"triangular factor diagonal spans [{d.min() if d.size else 0.0:.3e}, "
            f"{d.max() if d.size else 0.0:.3e}], below relative tolerance {tol:g}"
        )


def pinv_solve(core, rhs) -> np.ndarray:
    """Apply the pseudoinverse of a full-column-rank ``core`` to ``rhs``.

    Computes ``core^+ @ rhs`` as ``R^-1 (Q.T @ rhs)`` from the reduced QR
    factorization ``core = Q R``. Raises ``RankDeficientCore`` when the R
    diagonal drops below ``RANK_TOL`` relative to its largest entry.
    """
    core = as_matrix(core, "core")
    rhs = as_matrix(rhs, "rhs")
    if rhs.shape[0] != core.shape[0]:
        raise ValueError(
            f"rhs has {rhs.shape[0]} rows, core has {core.shape[0]}"
        )
    qr = thin_qr(core)
    check_triangular_rank(qr.r)
    if rhs.shape[1] == 0:
        return np.zeros((core.shape[1], 0))
    return scipy.linalg.solve_triangular(qr.r, qr.q.T @ rhs, lower=False)
