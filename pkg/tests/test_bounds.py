import math

import numpy as np
import pytest

from svextract.blockview import PerturbationBlocks, block_transform, perturbation_blocks, perturbation_matrix
from svextract.bounds import (
    Block2x2,
    backward_bound,
    block2x2_bound,
    composite_min_with_weyl,
    forward_bound,
    improved_oversampling_bound,
    right_perturbation_bound,
    spectral_gap,
    weyl,
)
from svextract.extract import GN, HMT, RR, SVD, CountingMatrix, EXTRACTORS, extract_gn, extract_hmt
from svextract.kernels import singular_values, spectral_norm
from svextract.sketching import SubspacePair, exact_subspaces, sketch_subspaces
from svextract.synthgen import ALGEBRAIC, EXPONENTIAL, assemble_synthetic, sv_profile

EPS = np.finfo(float).eps


def random_blocks2x2(rng, sizes, scale_g1=1.0, scale_g2=0.1, off=0.01):
    m1, n1, m2, n2 = sizes
    return Block2x2(
        g1=scale_g1 * rng.standard_normal((m1, n1)),
        b=off * rng.standard_normal((m1, n2)),
        c=off * rng.standard_normal((m2, n1)),
        g2=scale_g2 * rng.standard_normal((m2, n2)),
    )


def test_weyl_examples():
    assert weyl(np.zeros((3, 3))) == 0.0
    assert weyl(0.1 * np.eye(4)) == pytest.approx(0.1, rel=1e-14)


def test_weyl_dominates_all_changes():
    rng = np.random.default_rng(60)
    m = rng.standard_normal((30, 30))
    e = 0.05 * rng.standard_normal((30, 30))
    sig = singular_values(m)
    sig2 = singular_values(m + e)
    assert np.abs(sig - sig2).max() <= weyl(e) + 1e-12


def test_weyl_accepts_perturbation_blocks():
    f = perturbation_blocks(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
    assert weyl(f) == f.norm_f


def test_spectral_gap_square_and_rectangular():
    block = np.diag([3.0, 1.0])
    assert spectral_gap(2.1, block) == pytest.approx(0.9, rel=1e-14)
    # a rectangular block contributes zero to the embedded spectrum
    rect = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert spectral_gap(0.5, rect) == pytest.approx(0.5, rel=1e-14)
    empty = np.zeros((0, 4))
    assert spectral_gap(0.7, empty) == pytest.approx(0.7, rel=1e-14)
    assert spectral_gap(0.7, np.zeros((0, 0))) == math.inf


def test_block2x2_zero_perturbation():
    rng = np.random.default_rng(61)
    h = random_blocks2x2(rng, (4, 4, 5, 5))
    f = perturbation_blocks(*[np.zeros_like(x) for x in (h.g1, h.b, h.c, h.g2)])
    sig = singular_values(h.assemble())
    rep = block2x2_bound(h, f, sig)
    assert np.all(rep.bound[rep.applicable] == 0.0)
    assert rep.applicable.any()


def test_block2x2_frozen_scalar_example():
    # 1x1 blocks: H = [[2, 0], [0, 0.1]], F = [[0, 0.05], [0, 0.05]]
    h = Block2x2(g1=np.array([[2.0]]), b=np.array([[0.0]]),
                 c=np.array([[0.0]]), g2=np.array([[0.1]]))
    f = perturbation_blocks(np.array([[0.0]]), np.array([[0.05]]),
                            np.array([[0.0]]), np.array([[0.05]]))
    sig = singular_values(h.assemble())
    rep = block2x2_bound(h, f, sig)
    # scalar hand-derivation of the same quantities
    norm_f = 0.05 * math.sqrt(2.0)
    tau1 = 0.05 / (1.9 - 2.0 * norm_f)
    bound1 = 2.0 * 0.05 * tau1 + 0.05 * tau1**2
    assert rep.applicable[0]
    assert rep.tau[0] == pytest.approx(tau1, rel=1e-12)
    assert rep.bound[0] == pytest.approx(bound1, rel=1e-12)
    # oracle: two full SVDs confirm validity
    sig2 = singular_values(h.assemble() + f.assemble())
    assert abs(sig[0] - sig2[0]) <= rep.bound[0]
    # sigma_2 = 0.1 collides with the g2 spectrum: inapplicable
    assert not rep.applicable[1]
    assert rep.bound[1] == math.inf


def test_block2x2_zero_numerator_limit():
    # decoupled H and a perturbation only in the (2,2) block: tau = 0 and the
    # bound collapses to |f11| = 0, the exact-subspace limit
    h = Block2x2(g1=np.diag([2.0, 1.5]), b=np.zeros((2, 2)),
                 c=np.zeros((2, 2)), g2=np.diag([0.2, 0.1]))
    f = perturbation_blocks(np.zeros((2, 2)), np.zeros((2, 2)),
                            np.zeros((2, 2)), 0.01 * np.eye(2))
    rep = block2x2_bound(h, f, singular_values(h.assemble()))
    assert rep.applicable[0] and rep.tau[0] == 0.0 and rep.bound[0] == 0.0


def test_block2x2_soundness_fuzz():
    rng = np.random.default_rng(62)
    checked = 0
    for _ in range(60):
        sizes = tuple(int(x) for x in rng.integers(1, 13, size=4))
        h = random_blocks2x2(rng, sizes,
                             scale_g1=10.0 ** rng.uniform(-1, 1),
                             scale_g2=10.0 ** rng.uniform(-2, 0.5),
                             off=10.0 ** rng.uniform(-3, -0.5))
        hm = h.assemble()
        sig = singular_values(hm)
        gaps = [spectral_gap(s, h.g2) for s in sig]
        positive = [g for g in gaps if g > 0]
        if not positive:
            continue
        fscale = 0.1 * min(positive)
        raw = [rng.standard_normal(x.shape) for x in (h.g1, h.b, h.c, h.g2)]
        norm0 = spectral_norm(np.vstack([np.hstack(raw[:2]), np.hstack(raw[2:])]))
        f = perturbation_blocks(*[x * fscale / norm0 for x in raw])
        rep = block2x2_bound(h, f, sig)
        sig2 = singular_values(hm + f.assemble())
        err = np.abs(sig - sig2)
        mask = rep.applicable
        checked += int(mask.sum())
        assert np.all(err[mask] <= rep.bound[mask] + 1e-12 * sig[0])
    assert checked > 100


def test_right_perturbation_matches_general_exactly():
    # term-by-term identity: the specialized right-column formula and the
    # general one produce bitwise equal tau and bound
    rng = np.random.default_rng(63)
    for _ in range(10):
        h = random_blocks2x2(rng, tuple(int(x) for x in rng.integers(2, 9, size=4)))
        f1 = 0.01 * rng.standard_normal(h.b.shape)
        f2 = 0.01 * rng.standard_normal(h.g2.shape)
        sig = singular_values(h.assemble())
        special = right_perturbation_bound(h, f1, f2, sig)
        general = block2x2_bound(
            h, perturbation_blocks(np.zeros_like(h.g1), f1, np.zeros_like(h.c), f2), sig
        )
        assert np.array_equal(special.applicable, general.applicable)
        assert np.array_equal(special.tau, general.tau)
        assert np.array_equal(special.bound, general.bound)
        assert special.weyl == general.weyl


def test_matches_symmetric_eigenvalue_formula():
    # for symmetric PSD data the singular-value bound must coincide term by
    # term with the eigenvalue version evaluated on eigen-data
    rng = np.random.default_rng(64)
    for _ in range(5):
        c = rng.standard_normal((12, 12))
        hm = c @ c.T
        hm /= spectral_norm(hm)
        k = 5
        h = Block2x2(g1=hm[:k, :k], b=hm[:k, k:], c=hm[k:, :k], g2=hm[k:, k:])
        e = rng.standard_normal((12, 12))
        e = 1e-3 * (e + e.T)
        f = perturbation_blocks(e[:k, :k], e[:k, k:], e[k:, :k], e[k:, k:])
        sig = singular_values(hm)
        rep = block2x2_bound(h, f, sig)

        lam_h = np.sort(np.linalg.eigvalsh(hm))[::-1]
        lam_g2 = np.linalg.eigvalsh(h.g2)
        norm_b = spectral_norm(h.b)
        norm_e21 = spectral_norm(f.f21)
        norm_e = spectral_norm(e)
        compared = 0
        for i in range(12):
            gap = np.abs(lam_h[i] - lam_g2).min()
            denom = gap - 2.0 * norm_e
            if denom <= 1e-2:
                # near-zero denominators amplify last-ulp spectrum differences
                # between eigvalsh and svd; the identity is only checkable
                # where the formulas are numerically stable
                continue
            tau = (norm_b + norm_e21) / denom
            bound = spectral_norm(f.f11) + 2.0 * norm_e21 * tau + spectral_norm(f.f22) * tau**2
            assert rep.applicable[i]
            assert rep.tau[i] == pytest.approx(tau, rel=1e-12, abs=0)
            assert rep.bound[i] == pytest.approx(bound, rel=1e-12, abs=0)
            compared += 1
        assert compared >= 3


@pytest.fixture(scope="module")
def instance():
    prof = sv_profile(EXPONENTIAL, 100)
    truth = assemble_synthetic(prof, 100, seed=70)
    pair = sketch_subspaces(truth.a, r=10, ell=0, q=1, seed=71)
    part = block_transform(truth.a, pair)
    return prof, truth, pair, part


def test_gn_tau_is_half_rr_tau_with_equal_norms(instance):
    # feeding both bounds the same perturbation norm makes the GN tau exactly
    # half the RR tau: same gap, numerators max(|a12|,|a21|) vs twice that
    _, _, _, part = instance
    sig = singular_values(part.assemble())
    h = Block2x2(g1=part.a11, b=part.a12, c=part.a21, g2=part.a22)
    f_gn = perturbation_matrix(part, GN)
    f_rr = perturbation_matrix(part, RR)
    shared_norm = f_rr.norm_f
    f_gn_shared = PerturbationBlocks(f_gn.f11, f_gn.f12, f_gn.f21, f_gn.f22, shared_norm)
    rep_gn = block2x2_bound(h, f_gn_shared, sig[:10])
    rep_rr = block2x2_bound(h, f_rr, sig[:10])
    mask = rep_gn.applicable & rep_rr.applicable
    assert mask.any()
    assert np.array_equal(rep_gn.tau[mask], 0.5 * rep_rr.tau[mask])


def test_weyl_crossing_implication(instance):
    # bound < weyl can only happen with tau < 1 (RR and GN without oversampling)
    prof, _, _, part = instance
    for method in (RR, GN):
        rep = forward_bound(part, method, prof.values)
        for i in range(10):
            if rep.applicable[i] and rep.bound[i] < rep.weyl:
                assert rep.tau[i] < 1.0


def test_forward_gn_exact_subspaces_vanishes(instance):
    prof, truth, _, _ = instance
    part = block_transform(truth.a, exact_subspaces(truth, r=10, ell=0))
    rep = forward_bound(part, GN, prof.values)
    assert np.all(rep.bound[rep.applicable] <= 1e-25)
    assert rep.applicable[:5].all()


def test_forward_bound_soundness_all_methods(instance):
    prof, truth, pair, part = instance
    floor = 100 * EPS * prof.values[0]
    for method in (RR, SVD, GN):
        res = EXTRACTORS[method](CountingMatrix(truth.a), pair)
        rep = forward_bound(part, method, prof.values)
        err = np.abs(prof.values[:10] - res.sigma_hat)
        for i in range(10):
            if rep.applicable[i] and err[i] >= floor:
                assert err[i] <= rep.bound[i] + 1e-10 * prof.values[0]


def test_forward_hmt_uses_range_pair(instance):
    prof, truth, pair, _ = instance
    res = extract_hmt(CountingMatrix(truth.a), pair)
    hmt_pair = SubspacePair(u_tilde=res.factors["q"], v_tilde=pair.v_tilde,
                            r=10, ell=0, provenance="hmt-range")
    hmt_part = block_transform(truth.a, hmt_pair)
    rep = forward_bound(hmt_part, HMT, prof.values)
    err = np.abs(prof.values[:10] - res.sigma_hat)
    floor = 100 * EPS * prof.values[0]
    assert rep.method == HMT
    for i in range(10):
        if rep.applicable[i] and err[i] >= floor:
            assert err[i] <= rep.bound[i] + 1e-10 * prof.values[0]


def test_svd_forward_bound_gap_is_sigma(instance):
    # the one-sided bound reduces the gap to sigma_i itself
    prof, _, _, part = instance
    rep = forward_bound(part, SVD, prof.values)
    tail_norm = spectral_norm(np.vstack([part.a12, part.a22]))
    for i in range(3):
        assert rep.gap[i] == pytest.approx(prof.values[i], rel=1e-12)
        expected_tau = 2.0 * tail_norm / (prof.values[i] - 2.0 * tail_norm)
        assert rep.tau[i] == pytest.approx(expected_tau, rel=1e-12)


def test_improved_requires_oversampling(instance):
    _, _, _, part = instance
    with pytest.raises(ValueError):
        improved_oversampling_bound(part, np.ones(10))


def test_improved_bound_oversampled(instance):
    prof, truth, _, _ = instance
    pair = sketch_subspaces(truth.a, r=10, ell=5, q=1, seed=72)
    part = block_transform(truth.a, pair)
    plain = forward_bound(part, GN, prof.values)
    improved = improved_oversampling_bound(part, prof.values)
    assert improved.method == "GN+improved"
    mask = plain.applicable & improved.applicable
    assert mask.any()
    # the heuristic usually tightens the plain bound on leading indices
    lead = mask[:5]
    assert np.all(improved.bound[:5][lead] <= plain.bound[:5][lead])


def test_backward_bound_requires_no_oversampling(instance):
    prof, truth, _, _ = instance
    pair = sketch_subspaces(truth.a, r=10, ell=5, q=1, seed=73)
    part = block_transform(truth.a, pair)
    with pytest.raises(ValueError):
        backward_bound(part, prof.values[:10])


def test_backward_bound_exact_subspaces_vanishes(instance):
    prof, truth, _, _ = instance
    part = block_transform(truth.a, exact_subspaces(truth, r=10, ell=0))
    rep = backward_bound(part, prof.values[:10])
    assert np.all(rep.bound[rep.applicable] <= 1e-22)


def test_backward_bound_soundness(instance):
    prof, truth, pair, part = instance
    res = extract_gn(CountingMatrix(truth.a), pair)
    err = np.abs(prof.values[:10] - res.sigma_hat)
    floor = 100 * EPS * prof.values[0]
    for approx in (False, True):
        rep = backward_bound(part, res.sigma_hat, approximate_gap=approx)
        for i in range(10):
            if rep.applicable[i] and err[i] >= floor:
                assert err[i] <= rep.bound[i] + 1e-10 * prof.values[0]


def test_composite_min_with_weyl(instance):
    prof, _, _, part = instance
    rep = forward_bound(part, GN, prof.values)
    comp = composite_min_with_weyl(rep)
    for i in range(10):
        if rep.bound[i] == math.inf:
            assert comp.composite[i] == rep.weyl
        else:
            assert comp.composite[i] == min(rep.bound[i], rep.weyl)
    zero = composite_min_with_weyl(
        block2x2_bound(
            Block2x2(g1=np.eye(2), b=np.zeros((2, 2)), c=np.zeros((2, 2)), g2=0.1 * np.eye(2)),
            perturbation_blocks(*[np.zeros((2, 2))] * 4),
            np.array([1.0]),
        )
    )
    assert zero.composite[0] == 0.0


def test_gn_composite_usually_beats_rr_composite():
    # on the standard no-oversampling instance the composite GN bound is at
    # least as tight as the composite RR bound for most leading-half indices
    prof = sv_profile(EXPONENTIAL, 400)
    wins = total = 0
    for seed in range(20):
        truth = assemble_synthetic(prof, 400, seed=700 + seed)
        pair = sketch_subspaces(truth.a, r=50, ell=0, q=1, seed=800 + seed)
        part = block_transform(truth.a, pair)
        rep_gn = forward_bound(part, GN, prof.values)
        rep_rr = forward_bound(part, RR, prof.values)
        total += 25
        wins += int(np.sum(rep_gn.composite[:25] <= rep_rr.composite[:25]))
    assert wins >= 0.8 * total, f"{wins}/{total}"


def test_improved_bound_usually_tighter_than_plain():
    # with ell = r/2 the square-head repartition tightens the plain forward
    # bound on a majority of leading-half indices
    prof = sv_profile(EXPONENTIAL, 400)
    wins = total = 0
    for seed in range(20):
        truth = assemble_synthetic(prof, 400, seed=100 + seed)
        pair = sketch_subspaces(truth.a, r=50, ell=25, q=1, seed=200 + seed)
        part = block_transform(truth.a, pair)
        plain = forward_bound(part, GN, prof.values)
        improved = improved_oversampling_bound(part, prof.values)
        mask = plain.applicable[:25] & improved.applicable[:25]
        total += int(mask.sum())
        wins += int(np.sum(improved.bound[:25][mask] <= plain.bound[:25][mask]))
    assert wins >= 0.6 * total, f"{wins}/{total}"


def test_central_soundness_grid():
    # the soundness property over the full parameter grid: every applicable
    # forward/backward bound dominates the oracle error
    checked = 0
    seed = 0
    for n in (100, 400):
        r = n // 8
        for decay in (EXPONENTIAL, ALGEBRAIC):
            prof = sv_profile(decay, n)
            floor = 100 * EPS * prof.values[0]
            for ell in (0, r // 2):
                for q in (1, 2):
                    seed += 1
                    if n == 400 and seed % 2 == 0:
                        continue  # thin out the heavy size, 12 instances total
                    truth = assemble_synthetic(prof, n, seed=7000 + seed)
                    pair = sketch_subspaces(truth.a, r=r, ell=ell, q=q, seed=7100 + seed)
                    part = block_transform(truth.a, pair)
                    for method in (RR, SVD, GN):
                        res = EXTRACTORS[method](CountingMatrix(truth.a), pair)
                        rep = forward_bound(part, method, prof.values)
                        err = np.abs(prof.values[:r] - res.sigma_hat)
                        ok = rep.applicable & (err >= floor)
                        checked += int(ok.sum())
                        assert np.all(err[ok] <= rep.bound[ok] + 1e-10 * prof.values[0])
                    if ell == 0:
                        res = EXTRACTORS[GN](CountingMatrix(truth.a), pair)
                        err = np.abs(prof.values[:r] - res.sigma_hat)
                        for approx in (False, True):
                            rep = backward_bound(part, res.sigma_hat, approximate_gap=approx)
                            ok = rep.applicable & (err >= floor)
                            checked += int(ok.sum())
                            assert np.all(err[ok] <= rep.bound[ok] + 1e-10 * prof.values[0])
    assert checked > 200
