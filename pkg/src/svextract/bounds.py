"""Structured singular-value perturbation bounds.

All bounds share one mechanism: a per-index amplification factor tau built
from off-diagonal block norms over a spectral gap, with the bound quadratic in
tau. The 2x2-block bound handles a general block perturbation; the
block-tridiagonal bound chains damping factors across blocks; the forward,
improved, and backward bounds specialize the 2x2 machinery to the extraction
methods via their block perturbations. A bound beats the plain spectral-norm
(Weyl) baseline exactly when tau < 1, so every report also carries the Weyl
value and the elementwise minimum of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .blockview import BlockPartition, PerturbationBlocks, perturbation_blocks, perturbation_matrix, square_head_repartition
from .extract import GN, HMT, RR, SVD
from .kernels import as_matrix, pinv_solve, singular_values, spectral_norm


@dataclass
class BoundReport:
    """Per-index bound data: tau, bound value, applicability, Weyl baseline.

    ``bound[i]`` is +inf where the bound is inapplicable (gap denominator not
    positive); ``composite`` is the elementwise min of bound and the Weyl
    value, so inapplicable indices fall back to Weyl.
    """

    method: str
    tau: np.ndarray
    bound: np.ndarray
    applicable: np.ndarray
    weyl: float
    gap: np.ndarray
    composite: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.composite is None:
            self.composite = np.minimum(self.bound, self.weyl)


def composite_min_with_weyl(rep: BoundReport) -> BoundReport:
    """Recompute the composite column as min(bound, weyl) per index."""
    return replace(rep, composite=np.minimum(rep.bound, rep.weyl))


def weyl(e) -> float:
    """The uniform perturbation baseline: the spectral norm of E.

    Accepts perturbation blocks or a dense matrix. Guarantees
    ``|sigma_i(M) - sigma_i(M + E)| <= weyl(E)`` for every index i.
    """
    if isinstance(e, PerturbationBlocks):
        return e.norm_f
    return spectral_norm(e)


def spectral_gap(sigma_i: float, block: np.ndarray) -> float:
    """Distance from sigma_i to the spectrum of the symmetric embedding of ``block``.

    The embedding [[0, B], [B.T, 0]] has eigenvalues +-sigma_k(B) plus
    |rows - cols| zeros, so non-square blocks contribute zero to the candidate
    spectrum. For a block with no spectrum at all the gap is +inf.
    """
    block = np.asarray(block)
    svals = singular_values(block)
    candidates = []
    if svals.size:
        candidates.append(float(np.abs(sigma_i - svals).min()))
    if block.shape[0] != block.shape[1]:
        candidates.append(abs(float(sigma_i)))
    return min(candidates) if candidates else math.inf


def _gap_from_spectrum(sigma_i: float, svals: np.ndarray, has_zero: bool) -> float:
    candidates = []
    if svals.size:
        candidates.append(float(np.abs(sigma_i - svals).min()))
    if has_zero:
        candidates.append(abs(float(sigma_i)))
    return min(candidates) if candidates else math.inf


# ---------------------------------------------------------------------------
# 2x2 block bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block2x2:
    """A 2x2 block matrix [g1, b; c, g2]; blocks may be rectangular or empty."""

    g1: np.ndarray
    b: np.ndarray
    c: np.ndarray
    g2: np.ndarray

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.g1, self.b])
        bottom = np.hstack([self.c, self.g2])
        return np.vstack([top, bottom])


def block2x2_bound(h: Block2x2, f: PerturbationBlocks, sigma, method: str = "block2x2") -> BoundReport:
    """Structured bound on |sigma_i(H) - sigma_i(H + F)| for a 2x2 block perturbation.

    With tau_i = (max(|b|, |c|) + max(|f12|, |f21|)) / (gap_i - 2 |F|), where
    gap_i is the distance from sigma_i to the spectrum of g2, the change of
    sigma_i is at most |f11| + 2 max(|f12|, |f21|) tau_i + |f22| tau_i^2
    whenever the gap denominator is positive. ``sigma`` holds the singular
    values of the unperturbed H, supplied by the caller.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    off_h = max(spectral_norm(h.b), spectral_norm(h.c))
    off_f = max(spectral_norm(f.f12), spectral_norm(f.f21))
    norm_f11 = spectral_norm(f.f11)
    norm_f22 = spectral_norm(f.f22)
    norm_f = f.norm_f
    g2_svals = singular_values(h.g2)
    g2_has_zero = h.g2.shape[0] != h.g2.shape[1]

    k = sigma.size
    tau = np.full(k, math.inf)
    bound = np.full(k, math.inf)
    applicable = np.zeros(k, dtype=bool)
    gap = np.empty(k)
    for i in range(k):
        gap[i] = _gap_from_spectrum(sigma[i], g2_svals, g2_has_zero)
        denom = gap[i] - 2.0 * norm_f
        if denom <= 0.0 or not math.isfinite(denom):
            continue
        t = (off_h + off_f) / denom
        tau[i] = t
        bound[i] = norm_f11 + 2.0 * off_f * t + norm_f22 * t * t
        applicable[i] = True
    return BoundReport(method=method, tau=tau, bound=bound, applicable=applicable, weyl=norm_f, gap=gap)


def right_perturbation_bound(h: Block2x2, f1, f2, sigma) -> BoundReport:
    """Specialization for a perturbation touching only the right block column.

    F = [0, f1; 0, f2] gives tau_i = (max(|b|, |c|) + |f1|) / (gap_i - 2 |F|)
    and the bound 2 |f1| tau_i + |f2| tau_i^2, term by term the general 2x2
    formula with the left column zeroed out.
    """
    f1 = as_matrix(f1, "f1")
    f2 = as_matrix(f2, "f2")
    f = perturbation_blocks(np.zeros_like(h.g1), f1, np.zeros_like(h.c), f2)
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    off_h = max(spectral_norm(h.b), spectral_norm(h.c))
    norm_f1 = spectral_norm(f1)
    norm_f2 = spectral_norm(f2)
    norm_f = f.norm_f
    g2_svals = singular_values(h.g2)
    g2_has_zero = h.g2.shape[0] != h.g2.shape[1]

    k = sigma.size
    tau = np.full(k, math.inf)
    bound = np.full(k, math.inf)
    applicable = np.zeros(k, dtype=bool)
    gap = np.empty(k)
    for i in range(k):
        gap[i] = _gap_from_spectrum(sigma[i], g2_svals, g2_has_zero)
        denom = gap[i] - 2.0 * norm_f
        if denom <= 0.0 or not math.isfinite(denom):
            continue
        t = (off_h + norm_f1) / denom
        tau[i] = t
        bound[i] = 2.0 * norm_f1 * t + norm_f2 * t * t
        applicable[i] = True
    return BoundReport(method="right2x2", tau=tau, bound=bound, applicable=applicable, weyl=norm_f, gap=gap)


# ---------------------------------------------------------------------------
# Block tridiagonal bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockTridiagonal:
    """Block tridiagonal matrix: diagonal blocks g, super-diagonal b, sub-diagonal c.

    Rectangular blocks are allowed as long as the block grid is conformal.
    """

    diag: tuple
    sup: tuple
    sub: tuple

    @property
    def nblocks(self) -> int:
        return len(self.diag)

    def assemble(self) -> np.ndarray:
        row_sizes = [g.shape[0] for g in self.diag]
        col_sizes = [g.shape[1] for g in self.diag]
        out = np.zeros((sum(row_sizes), sum(col_sizes)))
        row_off = np.concatenate([[0], np.cumsum(row_sizes)])
        col_off = np.concatenate([[0], np.cumsum(col_sizes)])
        for q, g in enumerate(self.diag):
            out[row_off[q]:row_off[q + 1], col_off[q]:col_off[q + 1]] = g
        for q, b in enumerate(self.sup):
            out[row_off[q]:row_off[q + 1], col_off[q + 1]:col_off[q + 2]] = b
        for q, c in enumerate(self.sub):
            out[row_off[q + 1]:row_off[q + 2], col_off[q]:col_off[q + 1]] = c
        return out


def block_tridiagonal(diag, sup, sub) -> BlockTridiagonal:
    """Validate conformal block sizes and bundle a block tridiagonal matrix."""
    diag = tuple(as_matrix(g, f"diag[{q}]") for q, g in enumerate(diag))
    sup = tuple(as_matrix(b, f"sup[{q}]") for q, b in enumerate(sup))
    sub = tuple(as_matrix(c, f"sub[{q}]") for q, c in enumerate(sub))
    n = len(diag)
    if n < 1 or len(sup) != n - 1 or len(sub) != n - 1:
        raise ValueError("need N diagonal blocks and N-1 super/sub-diagonal blocks")
    for q in range(n - 1):
        if sup[q].shape != (diag[q].shape[0], diag[q + 1].shape[1]):
            raise ValueError(f"sup[{q}] has shape {sup[q].shape}, expected "
                             f"({diag[q].shape[0]}, {diag[q + 1].shape[1]})")
        if sub[q].shape != (diag[q + 1].shape[0], diag[q].shape[1]):
            raise ValueError(f"sub[{q}] has shape {sub[q].shape}, expected "
                             f"({diag[q + 1].shape[0]}, {diag[q].shape[1]})")
    return BlockTridiagonal(diag=diag, sup=sup, sub=sub)


@dataclass(frozen=True)
class TridiagPerturbation:
    """Perturbation touching diagonal block s plus the couplings to block s+1.

    ``s`` is the 0-based index of the perturbed diagonal block; delta_b sits at
    block position (s, s+1) and delta_c at (s+1, s). Both are None when absent
    (always the case for s = N-1).
    """

    s: int
    delta_g: np.ndarray
    delta_b: np.ndarray | None
    delta_c: np.ndarray | None
    norm_f: float


def tridiag_perturbation(t: BlockTridiagonal, s: int, delta_g=None, delta_b=None, delta_c=None) -> TridiagPerturbation:
    """Bundle a local perturbation of a block tridiagonal matrix.

    Blocks omitted default to zero. The assembled perturbation norm is
    computed here once.
    """
    n = t.nblocks
    if not 0 <= s < n:
        raise ValueError(f"block index s={s} out of range for {n} blocks")
    delta_g = np.zeros_like(t.diag[s]) if delta_g is None else as_matrix(delta_g, "delta_g")
    if delta_g.shape != t.diag[s].shape:
        raise ValueError("delta_g shape does not match the perturbed diagonal block")
    if s == n - 1:
        if delta_b is not None or delta_c is not None:
            raise ValueError("no coupling blocks exist beyond the last diagonal block")
    else:
        if delta_b is not None:
            delta_b = as_matrix(delta_b, "delta_b")
            if delta_b.shape != t.sup[s].shape:
                raise ValueError("delta_b shape does not match sup[s]")
        if delta_c is not None:
            delta_c = as_matrix(delta_c, "delta_c")
            if delta_c.shape != t.sub[s].shape:
                raise ValueError("delta_c shape does not match sub[s]")

    f = perturbed_tridiagonal(t, TridiagPerturbation(s, delta_g, delta_b, delta_c, 0.0)).assemble() - t.assemble()
    return TridiagPerturbation(s=s, delta_g=delta_g, delta_b=delta_b, delta_c=delta_c,
                               norm_f=spectral_norm(f))


def perturbed_tridiagonal(t: BlockTridiagonal, p: TridiagPerturbation) -> BlockTridiagonal:
    """The block tridiagonal matrix with the perturbation applied."""
    diag = list(t.diag)
    sup = list(t.sup)
    sub = list(t.sub)
    diag[p.s] = diag[p.s] + p.delta_g
    if p.delta_b is not None:
        sup[p.s] = sup[p.s] + p.delta_b
    if p.delta_c is not None:
        sub[p.s] = sub[p.s] + p.delta_c
    return BlockTridiagonal(diag=tuple(diag), sup=tuple(sup), sub=tuple(sub))


class _ChainData:
    """Per-orientation data for the tridiagonal chain bound, 1-based block indices."""

    def __init__(self, diag, sup, sub):
        self.nblocks = len(diag)
        self.svals = [singular_values(g) for g in diag]
        self.has_zero = [g.shape[0] != g.shape[1] for g in diag]
        self.smax = [float(s[0]) if s.size else 0.0 for s in self.svals]
        # gamma[q] couples blocks q and q+1; gamma[0] = gamma[N] = 0.
        self.gamma = np.zeros(self.nblocks + 1)
        for q in range(1, self.nblocks):
            self.gamma[q] = max(spectral_norm(sup[q - 1]), spectral_norm(sub[q - 1]))

    def gap(self, sigma_i: float, q: int) -> float:
        return _gap_from_spectrum(sigma_i, self.svals[q - 1], self.has_zero[q - 1])

    def separated(self, sigma_i: float, q: int, norm_f: float) -> bool:
        eta = self.gamma[q] + self.gamma[q - 1] + norm_f
        return sigma_i > self.smax[q - 1] + eta


def _chain_bound(data: _ChainData, s: int, dg_norm: float, dgamma: float, norm_f: float, sigma_i: float):
    """Evaluate the damping-chain bound for one index and one orientation.

    ``s`` is 1-based. The index must be separated from the spectra of blocks 1
    through s+t, with the horizon t grown greedily while each extra damping
    factor has a positive denominator and is below one. Returns
    (bound, damping, gap_at_s) or None when inapplicable.
    """
    n = data.nblocks
    for q in range(1, s + 1):
        if not data.separated(sigma_i, q, norm_f):
            return None
    den0 = data.gap(sigma_i, s) - norm_f - dg_norm - data.gamma[s - 1]
    if den0 <= 0.0:
        return None
    deltas = [(data.gamma[s] + dgamma) / den0]
    t = 0
    while s + t + 1 <= n - 1:
        qn = t + 1
        if not data.separated(sigma_i, s + qn, norm_f):
            break
        if qn == 1:
            den = data.gap(sigma_i, s + 1) - norm_f - data.gamma[s] - dgamma
        else:
            den = data.gap(sigma_i, s + qn) - norm_f - data.gamma[s + qn - 1]
        if den <= 0.0:
            break
        d = data.gamma[s + qn] / den
        if d >= 1.0:
            break
        deltas.append(d)
        t += 1
    prod_all = math.prod(deltas)
    prod_tail = math.prod(deltas[1:])
    bound = dg_norm * prod_all**2 + 2.0 * dgamma * deltas[0] * prod_tail**2
    return bound, prod_all, data.gap(sigma_i, s)


def tridiagonal_bound(t: BlockTridiagonal, p: TridiagPerturbation, sigma) -> BoundReport:
    """Chain bound on singular-value changes of a locally perturbed block tridiagonal.

    The bound damps the perturbation through the diagonal blocks separating the
    index's singular vectors from the perturbed block: with damping factors
    delta_0..delta_t (each an off-diagonal coupling over a gap), the change is
    at most |dG| (prod delta)^2 + 2 max(|dB|, |dC|) delta_0 (prod_{q>=1})^2.
    The chain is evaluated in the stated orientation (vectors concentrated in
    trailing blocks) and, for diagonal-only perturbations, also on the
    block-reversed matrix; per index the smaller applicable bound is kept.
    ``sigma`` holds the singular values of the unperturbed matrix.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    n = t.nblocks
    s1 = p.s + 1
    dg_norm = spectral_norm(p.delta_g)
    dgamma = max(
        spectral_norm(p.delta_b) if p.delta_b is not None else 0.0,
        spectral_norm(p.delta_c) if p.delta_c is not None else 0.0,
    )
    norm_f = p.norm_f
    forward = _ChainData(t.diag, t.sup, t.sub)
    # Reversing the block order maps a diagonal-only perturbation at block s to
    # one at block N+1-s with the same structure, giving a second valid chain.
    mirrored = None
    if dgamma == 0.0:
        mirrored = _ChainData(t.diag[::-1], t.sub[::-1], t.sup[::-1])

    k = sigma.size
    tau = np.full(k, math.inf)
    bound = np.full(k, math.inf)
    applicable = np.zeros(k, dtype=bool)
    gap = np.full(k, math.inf)
    for i in range(k):
        results = []
        if s1 <= n - 1:
            res = _chain_bound(forward, s1, dg_norm, dgamma, norm_f, sigma[i])
            if res is not None:
                results.append(res)
        if mirrored is not None:
            res = _chain_bound(mirrored, n + 1 - s1, dg_norm, 0.0, norm_f, sigma[i])
            if res is not None:
                results.append(res)
        if results:
            b, damping, g = min(results, key=lambda r: r[0])
            bound[i] = b
            tau[i] = damping
            gap[i] = g
            applicable[i] = True
    return BoundReport(method="tridiagonal", tau=tau, bound=bound, applicable=applicable,
                       weyl=norm_f, gap=gap)


# ---------------------------------------------------------------------------
# Method-specific bounds on extracted singular values
# ---------------------------------------------------------------------------


def _partition_h(p: BlockPartition, method: str) -> Block2x2:
    if method == SVD:
        return Block2x2(
            g1=np.vstack([p.a11, p.a21]),
            b=np.vstack([p.a12, p.a22]),
            c=np.zeros((0, p.r)),
            g2=np.zeros((0, p.n - p.r)),
        )
    return Block2x2(g1=p.a11, b=p.a12, c=p.a21, g2=p.a22)


def forward_bound(p: BlockPartition, method: str, sigma) -> BoundReport:
    """A-priori bound per leading index, from exact singular values.

    Feeds the method's perturbation blocks through the 2x2 machinery on the
    rotated partition. For GN the perturbation touches only the right block
    column (projection residual and Schur complement); RR perturbs everything
    off the (1,1) block; SVD reduces to a single block row, making the gap
    simply sigma_i. HMT uses the GN formulas and expects a partition built
    from the pair (v_tilde, orth(A v_tilde)).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    perturb_as = GN if method == HMT else method
    f = perturbation_matrix(p, perturb_as)
    rep = block2x2_bound(_partition_h(p, perturb_as), f, sigma[: p.r], method=method)
    return rep


def improved_oversampling_bound(p: BlockPartition, sigma) -> BoundReport:
    """Oversampling heuristic: re-split the partition square-headed, then bound.

    Requires ell > 0. Rotating the head block diagonal and moving the split to
    r x r usually tightens the forward bound; the result is a heuristic, not a
    theorem, and is reported under the method tag ``GN+improved``.
    """
    rep = forward_bound(square_head_repartition(p), GN, sigma)
    rep.method = "GN+improved"
    return rep


def backward_bound(p: BlockPartition, sigma_gn, approximate_gap: bool = False) -> BoundReport:
    """A-posteriori bound using only computed quantities; requires ell = 0.

    Reverses the perturbation roles so the gap is measured from the computed
    values sigma_gn to the spectrum of w = a21 a11^-1 a12: with
    tau_i = max(|a12|, |a21|) / (gap_i - 2 |E|), the error is at most
    |a22 - w| tau_i^2. With ``approximate_gap`` the gap is replaced by
    sigma_gn[i] - |w|, which avoids the spectrum of w entirely.
    """
    if p.ell != 0:
        raise ValueError("the backward bound is defined without oversampling (ell = 0)")
    sigma_gn = np.atleast_1d(np.asarray(sigma_gn, dtype=np.float64))
    f = perturbation_matrix(p, GN)
    w = p.a21 @ pinv_solve(p.a11, p.a12)
    w_svals = singular_values(w)
    w_has_zero = w.shape[0] != w.shape[1]
    norm_w = float(w_svals[0]) if w_svals.size else 0.0
    off = max(spectral_norm(p.a12), spectral_norm(p.a21))
    schur_norm = spectral_norm(f.f22)
    norm_e = f.norm_f

    k = sigma_gn.size
    tau = np.full(k, math.inf)
    bound = np.full(k, math.inf)
    applicable = np.zeros(k, dtype=bool)
    gap = np.empty(k)
    for i in range(k):
        if approximate_gap:
            gap[i] = sigma_gn[i] - norm_w
        else:
            gap[i] = _gap_from_spectrum(sigma_gn[i], w_svals, w_has_zero)
        denom = gap[i] - 2.0 * norm_e
        if denom <= 0.0 or not math.isfinite(denom):
            continue
        ti = off / denom
        tau[i] = ti
        bound[i] = schur_norm * ti * ti
        applicable[i] = True
    tag = "GN-backward-approx" if approximate_gap else "GN-backward"
    return BoundReport(method=tag, tau=tau, bound=bound, applicable=applicable, weyl=norm_e, gap=gap)
