"""Orthogonal block coordinates for subspace pairs.

Rotating A by Q1 = [u_tilde, complement] on the left and Q2 = [v_tilde,
complement] on the right turns each extraction method into a structured
perturbation of the rotated matrix. This module materializes the rotated 2x2
block partition, the per-method perturbation blocks, and the square-head
repartition used by the oversampling heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extract import GN, RR, SVD
from .kernels import as_matrix, pinv_solve, spectral_norm
from .sketching import SubspacePair, validate_pair


@dataclass(frozen=True)
class BlockPartition:
    """The rotated matrix Q1.T @ A @ Q2 split at row r+ell and column r."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    q1: np.ndarray
    q2: np.ndarray

    @property
    def r(self) -> int:
        return self.a11.shape[1]

    @property
    def head(self) -> int:
        """Row count of the (1,1) block, i.e. r + ell."""
        return self.a11.shape[0]

    @property
    def ell(self) -> int:
        return self.head - self.r

    @property
    def m(self) -> int:
        return self.a11.shape[0] + self.a21.shape[0]

    @property
    def n(self) -> int:
        return self.a11.shape[1] + self.a12.shape[1]

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.a11, self.a12])
        bottom = np.hstack([self.a21, self.a22])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class PerturbationBlocks:
    """Blocks of a structured perturbation, with the assembled spectral norm."""

    f11: np.ndarray
    f12: np.ndarray
    f21: np.ndarray
    f22: np.ndarray
    norm_f: float

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.f11, self.f12])
        bottom = np.hstack([self.f21, self.f22])
        return np.vstack([top, bottom])


def perturbation_blocks(f11, f12, f21, f22) -> PerturbationBlocks:
    """Bundle perturbation blocks, computing the assembled spectral norm."""
    p = PerturbationBlocks(f11=f11, f12=f12, f21=f21, f22=f22, norm_f=0.0)
    return PerturbationBlocks(f11=f11, f12=f12, f21=f21, f22=f22, norm_f=spectral_norm(p.assemble()))


def orthonormal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of range(basis) in R^dim.

    Uses the trailing columns of a complete Householder QR of ``basis``, which
    is deterministic for a fixed input.
    """
    k = basis.shape[1]
    if k == dim:
        return np.zeros((dim, 0))
    full_q, _ = np.linalg.qr(basis, mode="complete")
    return full_q[:, k:]


def block_transform(a, s: SubspacePair) -> BlockPartition:
    """Rotate ``a`` into the coordinates of the subspace pair and partition it."""
    a = as_matrix(a)
    validate_pair(s)
    m, n = a.shape
    if s.u_tilde.shape[0] != m or s.v_tilde.shape[0] != n:
        raise ValueError("subspace pair does not match the matrix dimensions")
    q1 = np.hstack([s.u_tilde, orthonormal_complement(s.u_tilde, m)])
    q2 = np.hstack([s.v_tilde, orthonormal_complement(s.v_tilde, n)])
    abar = q1.T @ (a @ q2)
    head, r = s.r + s.ell, s.r
    return BlockPartition(
        a11=abar[:head, :r],
        a12=abar[:head, r:],
        a21=abar[head:, :r],
        a22=abar[head:, r:],
        q1=q1,
        q2=q2,
    )


def projection_residual(p: BlockPartition) -> np.ndarray:
    """The (1,2) perturbation block of generalized Nystrom: a12 minus its
    projection onto the column space of a11.

    Identically zero when a11 is square, where the pseudoinverse is a two-sided
    inverse; the zero block is returned exactly in that case.
    """
    if p.ell == 0:
        return np.zeros_like(p.a12)
    return p.a12 - p.a11 @ pinv_solve(p.a11, p.a12)


def perturbation_matrix(p: BlockPartition, method: str) -> PerturbationBlocks:
    """Perturbation blocks for a method, in the rotated coordinates.

    GN: [0, a12 - a11 a11^+ a12; 0, a22 - a21 a11^+ a12], the right block column
    being the projection residual and the generalized Schur complement.
    RR: [0, a12; a21, a22].
    SVD: the single block row [0, stack(a12, a22)] of the column-rotated matrix,
    padded with height-zero lower blocks so the 2x2 machinery applies uniformly.
    """
    if method == GN:
        x = pinv_solve(p.a11, p.a12)
        f12 = np.zeros_like(p.a12) if p.ell == 0 else p.a12 - p.a11 @ x
        f22 = p.a22 - p.a21 @ x
        return perturbation_blocks(np.zeros_like(p.a11), f12, np.zeros_like(p.a21), f22)
    if method == RR:
        return perturbation_blocks(np.zeros_like(p.a11), p.a12, p.a21, p.a22)
    if method == SVD:
        tail = np.vstack([p.a12, p.a22])
        return perturbation_blocks(
            np.zeros((p.m, p.r)),
            tail,
            np.zeros((0, p.r)),
            np.zeros((0, p.n - p.r)),
        )
    raise ValueError(f"no perturbation blocks for method {method!r}")


def square_head_repartition(p: BlockPartition) -> BlockPartition:
    """Rotate the head so the (1,1) block is diagonal, then re-split it at r x r.

    Requires ell > 0. Diagonalizes a11 = X S Y.T by SVD, applies diag(X.T, I)
    and diag(Y, I) to the partition, and moves the split so the new (1,1) block
    is the r x r top of S. The composed q1, q2 keep the partition orthogonally
    equivalent to the original matrix.
    """
    if p.ell == 0:
        raise ValueError("square_head_repartition requires ell > 0")
    x, _, yt = np.linalg.svd(p.a11, full_matrices=True)
    y = yt.T
    head11 = (x.T @ p.a11) @ y
    head12 = x.T @ p.a12
    r = p.r
    q1 = p.q1.copy()
    q1[:, : p.head] = p.q1[:, : p.head] @ x
    q2 = p.q2.copy()
    q2[:, :r] = p.q2[:, :r] @ y
    return BlockPartition(
        a11=head11[:r],
        a12=head12[:r],
        a21=np.vstack([head11[r:], p.a21 @ y]),
        a22=np.vstack([head12[r:], p.a22]),
        q1=q1,
        q2=q2,
    )
