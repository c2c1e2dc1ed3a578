"""Synthetic test matrices with known SVD: Haar factors and prescribed spectra.

Reproducibility rule: every operation that consumes a ``seed`` builds a
``numpy.random.SeedSequence(seed)`` and spawns one child per random factor, in
a fixed documented order (left factor first, then right). Repeated calls with
the same seed are bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io

from .kernels import as_matrix

EXPONENTIAL = "exponential"
ALGEBRAIC = "algebraic"
CUSTOM = "custom"

#: Decades spanned by the exponential profile: sigma_1 = 1 down to sigma_n = 1e-30.
EXP_DECADES = 30.0


@dataclass(frozen=True)
class SvProfile:
    """A prescribed singular-value profile: ``values`` descending, ``values[0] > 0``."""

    kind: str
    n: int
    values: np.ndarray


def sv_profile(kind: str, n: int) -> SvProfile:
    """Build a named singular-value profile of length ``n``.

    ``exponential``: sigma_i = exp(-i * (30/(n-1)) * ln 10) for 0-based i, so the
    spectrum always spans 1 down to 1e-30 regardless of n.
    ``algebraic``: sigma_i = (1/(i+1))^4.
    """
    if n < 2:
        raise ValueError("profiles need n >= 2")
    idx = np.arange(n, dtype=np.float64)
    if kind == EXPONENTIAL:
        values = np.exp(-idx * (EXP_DECADES / (n - 1)) * np.log(10.0))
    elif kind == ALGEBRAIC:
        values = (1.0 / (idx + 1.0)) ** 4
    else:
        raise ValueError(f"unknown profile kind {kind!r}, use custom_profile for explicit values")
    return SvProfile(kind=kind, n=n, values=values)


def custom_profile(values) -> SvProfile:
    """Wrap explicit descending nonnegative values as a profile."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("values must be a nonempty 1-D array")
    if values[0] <= 0 or np.any(values < 0) or np.any(np.diff(values) > 0):
        raise ValueError("values must be descending, nonnegative, with values[0] > 0")
    return SvProfile(kind=CUSTOM, n=values.size, values=values)


def haar_orthonormal(rows: int, cols: int, seed) -> np.ndarray:
    """Haar-distributed matrix with orthonormal columns.

    QR of a standard Gaussian matrix with the R diagonal forced positive, which
    makes the Q factor uniform over the orthogonal group (Stiefel manifold for
    rows > cols). ``seed`` is an integer or a ``numpy.random.SeedSequence``.
    """
    if rows < cols or cols < 1:
        raise ValueError(f"haar_orthonormal needs rows >= cols >= 1, got {rows}x{cols}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * signs


@dataclass(frozen=True)
class SyntheticMatrix:
    """A test matrix with its ground-truth SVD factors attached."""

    a: np.ndarray
    u_true: np.ndarray
    sigma_true: SvProfile
    v_true: np.ndarray
    seed: int


def assemble_synthetic(profile: SvProfile, m: int, seed: int) -> SyntheticMatrix:
    """Assemble ``a = u_true @ diag(values) @ v_true.T`` with Haar factors.

    ``u_true`` is m x n with Haar orthonormal columns (child seed 0), ``v_true``
    is n x n Haar (child seed 1).
    """
    n = profile.n
    if m < n:
        raise ValueError(f"need m >= profile.n, got m={m}, n={n}")
    ss_u, ss_v = np.random.SeedSequence(seed).spawn(2)
    u = haar_orthonormal(m, n, ss_u)
    v = haar_orthonormal(n, n, ss_v)
    a = (u * profile.values) @ v.T
    return SyntheticMatrix(a=a, u_true=u, sigma_true=profile, v_true=v, seed=seed)


def to_matrix_market(path, m) -> None:
    """Export a dense matrix in MatrixMarket array format (column-major fields)."""
    scipy.io.mmwrite(path, as_matrix(m))
