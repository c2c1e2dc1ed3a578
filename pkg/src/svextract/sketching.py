"""Approximate singular subspaces: Gaussian sketches, exact subspaces, random ones.

Seeding follows the same rule as :mod:`svextract.synthgen`: one SeedSequence
child per random probe, left/U-side probe first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import as_matrix, thin_qr
from .synthgen import SyntheticMatrix

#: Max deviation of Q.T @ Q from the identity tolerated for orthonormal factors.
ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class SubspacePair:
    """Orthonormal approximations u_tilde (m x (r+ell)) and v_tilde (n x r)."""

    u_tilde: np.ndarray
    v_tilde: np.ndarray
    r: int
    ell: int
    provenance: str


def orthonormality_defect(q: np.ndarray) -> float:
    """Max-norm deviation of ``q.T @ q`` from the identity."""
    k = q.shape[1]
    if k == 0:
        return 0.0
    return float(np.abs(q.T @ q - np.eye(k)).max())


def validate_pair(s: SubspacePair) -> None:
    """Check the shape and orthonormality invariants of a subspace pair."""
    m, ku = s.u_tilde.shape
    n, kv = s.v_tilde.shape
    if s.r < 1 or s.ell < 0 or kv != s.r or ku != s.r + s.ell:
        raise ValueError(f"inconsistent pair shapes: u {m}x{ku}, v {n}x{kv}, r={s.r}, ell={s.ell}")
    if m < ku or n < kv:
        raise ValueError("subspace factors must be tall")
    for name, q in (("u_tilde", s.u_tilde), ("v_tilde", s.v_tilde)):
        defect = orthonormality_defect(q)
        if defect > ORTHO_TOL:
            raise ValueError(f"{name} is not orthonormal (defect {defect:.3e})")


def _orth(x: np.ndarray) -> np.ndarray:
    return thin_qr(x).q


def sketch_subspaces(a, r: int, ell: int, q: int, seed) -> SubspacePair:
    """Sketch subspaces from Gaussian probes with ``q`` rounds of power products.

    For q = 1 this is exactly one product per side before orthonormalization:
    v_tilde = orth(a.T @ omega1) with omega1 m x r, and
    u_tilde = orth(a @ omega2) with omega2 n x (r+ell).
    For q > 1, alternating products are applied, v_tilde spanning
    (a.T a)^(q-1) a.T omega1 and u_tilde spanning (a a.T)^(q-1) a omega2,
    re-orthonormalizing after every product for stability.
    """
    a = as_matrix(a)
    m, n = a.shape
    if q < 1:
        raise ValueError("q must be >= 1")
    if r < 1 or ell < 0 or n < r or m < r + ell:
        raise ValueError(f"inconsistent dimensions: a is {m}x{n}, r={r}, ell={ell}")
    ss_u, ss_v = np.random.SeedSequence(seed).spawn(2)
    omega2 = np.random.default_rng(ss_u).standard_normal((n, r + ell))
    omega1 = np.random.default_rng(ss_v).standard_normal((m, r))

    v = _orth(a.T @ omega1)
    u = _orth(a @ omega2)
    for _ in range(q - 1):
        v = _orth(a.T @ _orth(a @ v))
        u = _orth(a @ _orth(a.T @ u))
    return SubspacePair(u_tilde=u, v_tilde=v, r=r, ell=ell, provenance=f"sketched(q={q})")


def exact_subspaces(truth: SyntheticMatrix, r: int, ell: int) -> SubspacePair:
    """Leading exact singular subspaces taken from the ground-truth factors."""
    if r < 1 or ell < 0:
        raise ValueError("need r >= 1 and ell >= 0")
    u = truth.u_true[:, : r + ell].copy()
    v = truth.v_true[:, :r].copy()
    pair = SubspacePair(u_tilde=u, v_tilde=v, r=r, ell=ell, provenance="exact")
    validate_pair(pair)
    return pair


def random_subspaces(m: int, n: int, r: int, ell: int, seed) -> SubspacePair:
    """Orthonormalized Gaussian subspaces with no contact with any matrix.

    u_tilde and v_tilde use independent SeedSequence children (0 and 1).
    """
    if r < 1 or ell < 0 or n < r or m < r + ell:
        raise ValueError(f"inconsistent dimensions: m={m}, n={n}, r={r}, ell={ell}")
    ss_u, ss_v = np.random.SeedSequence(seed).spawn(2)
    u = _orth(np.random.default_rng(ss_u).standard_normal((m, r + ell)))
    v = _orth(np.random.default_rng(ss_v).standard_normal((n, r)))
    return SubspacePair(u_tilde=u, v_tilde=v, r=r, ell=ell, provenance="random")
