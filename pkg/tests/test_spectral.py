"""Tests for the Galerkin spectrum of the Hilbert-Brunn-Minkowski operator."""

import numpy as np
import pytest

from calab.bodies import (
    ball,
    ellipsoid,
    evaluate_on_grid,
    perturbed_ball,
    random_even_body,
)
from calab.calculus import build_state
from calab.spectral import (
    GalerkinBasis,
    assemble,
    bochner_residual,
    discrete_bochner_residual,
    first_eigenspace_deficiency,
    hessian_gap_even,
    invariance_check,
    solve_spectrum,
    spectrum_of_body,
)
from calab.sphere import ScalarField, build_grid, synthesize


def system_for(body, n, L, **kw):
    g = build_grid(n, L)
    st = build_state(evaluate_on_grid(body, g))
    basis = GalerkinBasis(g, L, **kw)
    return st, assemble(st, basis)


# ---------------------------------------------------------------------------
# assembly structure
# ---------------------------------------------------------------------------


def test_ball_assembly_closed_form():
    # on the unit ball the operator is the round Laplacian: the stiffness
    # diagonalizes on harmonics with entries l(l+1) and the mass is identity
    g = build_grid(3, 8)
    st = build_state(evaluate_on_grid(ball(1.0, 3), g))
    basis = GalerkinBasis(g, 4)
    sys_ = assemble(st, basis)
    degs = basis.degrees
    expected = np.diag([l * (l + 1) for l in degs]).astype(float)
    assert np.abs(sys_.stiffness - expected).max() < 1e-8
    assert np.abs(sys_.mass - np.eye(basis.size)).max() < 1e-10


def test_constant_gives_zero_stiffness_row():
    st, sys_ = system_for(perturbed_ball(3, 0.1), 3, 12)
    const_row = np.flatnonzero(sys_.basis.degrees == 0)[0]
    assert np.abs(sys_.stiffness[const_row]).max() < 1e-9
    assert np.abs(sys_.hessform[const_row]).max() < 1e-8


def test_matrices_symmetric_and_definite():
    st, sys_ = system_for(random_even_body(2, seed=3), 2, 16)
    for A in (sys_.stiffness, sys_.mass, sys_.hessform):
        assert np.abs(A - A.T).max() < 1e-10 * max(np.abs(A).max(), 1.0)
    assert np.linalg.eigvalsh(sys_.mass).min() > 0
    assert np.linalg.eigvalsh(sys_.stiffness).min() > -1e-8


def test_basis_band_limit_capped_by_grid():
    g = build_grid(2, 8)
    with pytest.raises(ValueError):
        GalerkinBasis(g, 16)


# ---------------------------------------------------------------------------
# spectra (paper closed forms)
# ---------------------------------------------------------------------------


def test_ball_spectrum_n3():
    g = build_grid(3, 16)
    rep = spectrum_of_body(ball(1.0, 3), g, k=12)
    assert abs(rep.eigenvalues[0]) < 1e-8
    assert rep.multiplicities[0][1] == 1
    v1, m1 = rep.multiplicities[1]
    assert abs(v1 - 2.0) < 1e-8 and m1 == 3
    v2, m2 = rep.multiplicities[2]
    assert abs(v2 - 6.0) < 1e-8 and m2 == 5
    assert rep.residuals.max() < 1e-8


def test_ball_even_gap_n2():
    g = build_grid(2, 16)
    rep = spectrum_of_body(ball(1.0, 2), g)
    assert abs(rep.lambda1_even - 4.0) < 1e-9


def test_ellipsoid_spectrum_matches_ball():
    g = build_grid(3, 16)
    rep = spectrum_of_body(ellipsoid(np.diag([2.0, 1.0, 1.0])), g, k=10)
    assert abs(rep.lambda1 - 2.0) < 1e-6
    assert abs(rep.lambda1_even - 6.0) < 1e-3


def test_even_subspace_solve():
    g = build_grid(2, 16)
    st = build_state(evaluate_on_grid(ball(1.0, 2), g))
    sys_ = assemble(st, GalerkinBasis(g, 16))
    rep = solve_spectrum(sys_, k=4, subspace="even-nonconstant")
    # even spectrum of the circle Laplacian: 4, 4, 16, 16
    assert np.abs(rep.eigenvalues - np.array([4.0, 4.0, 16.0, 16.0])).max() < 1e-8


def test_eigenvalues_nonnegative_random_bodies():
    for seed in range(3):
        body = random_even_body(2, seed=seed)
        g = build_grid(2, 16)
        rep = spectrum_of_body(body, g, k=10)
        assert rep.eigenvalues.min() > -1e-8
        assert rep.residuals.max() < 1e-8


def test_lambda1_is_dimension_minus_one():
    # Hilbert's theorem: lambda_1 = n-1 with multiplicity exactly n
    g2 = build_grid(2, 62, n_nodes=256)
    for seed in (0, 1):
        rep = spectrum_of_body(random_even_body(2, seed=seed), g2, k=6)
        assert abs(rep.lambda1 - 1.0) < 1e-6
        lam1_cluster = [m for v, m in rep.multiplicities
                        if abs(v - rep.lambda1) < 1e-3]
        assert lam1_cluster[0] == 2

    g3 = build_grid(3, 20)
    rep = spectrum_of_body(perturbed_ball(3, 0.1), g3, k=6)
    assert abs(rep.lambda1 - 2.0) < 1e-3
    lam1_cluster = [m for v, m in rep.multiplicities
                    if abs(v - rep.lambda1) < 1e-2]
    assert lam1_cluster[0] == 3


def test_first_eigenspace_spanned_by_adapted_linear():
    g = build_grid(3, 16)
    body = perturbed_ball(3, 0.1)
    st = build_state(evaluate_on_grid(body, g))
    sys_ = assemble(st, GalerkinBasis(g, 16))
    assert first_eigenspace_deficiency(st, sys_) < 1e-3


# ---------------------------------------------------------------------------
# Bochner identities
# ---------------------------------------------------------------------------


def test_bochner_residual_constant_is_zero():
    g = build_grid(2, 16)
    st = build_state(evaluate_on_grid(ball(1.0, 2), g))
    f = ScalarField.from_values(g, np.full(g.node_count, 2.0))
    assert bochner_residual(st, f) == 0.0


@pytest.mark.parametrize("n,L,tol", [(2, 24, 1e-6), (3, 16, 1e-3)])
def test_bochner_residual_random_fields(n, L, tol):
    g = build_grid(n, L)
    rng = np.random.default_rng(n)
    for seed in range(3):
        body = random_even_body(n, seed=seed)
        st = build_state(evaluate_on_grid(body, g))
        for _ in range(4):
            c = rng.normal(size=g.basis.size) * (g.basis.degrees <= L // 3)
            f = synthesize(g, c)
            assert bochner_residual(st, f) < tol


@pytest.mark.parametrize("n,L,tol", [(2, 20, 1e-6), (3, 14, 1e-3)])
def test_discrete_bochner_identity(n, L, tol):
    body = random_even_body(n, seed=7)
    st, sys_ = system_for(body, n, L)
    assert discrete_bochner_residual(sys_, k=6) < tol


# ---------------------------------------------------------------------------
# Hessian gap
# ---------------------------------------------------------------------------


def test_ball_hessian_gap_is_n_plus_2():
    for n, L in [(2, 16), (3, 12)]:
        st, sys_ = system_for(ball(1.0, n), n, L)
        assert abs(hessian_gap_even(sys_) - (n + 2)) < 1e-7


def test_hessian_gap_at_least_one():
    # the p=1 case of the gap inequality holds unconditionally
    for seed in range(4):
        body = random_even_body(2, seed=seed)
        st, sys_ = system_for(body, 2, 16)
        assert hessian_gap_even(sys_) >= 1.0 - 1e-6


def test_gap_identity_links_to_even_eigenvalue():
    # gap = lambda_1_even - (n - 2) through the integrated Bochner identity
    for body, n, L in [
        (ball(1.0, 2), 2, 16),
        (ellipsoid(np.diag([1.5, 1.0])), 2, 20),
        (perturbed_ball(3, 0.1), 3, 16),
    ]:
        st, sys_ = system_for(body, n, L)
        gap = hessian_gap_even(sys_)
        rep = solve_spectrum(sys_, k=2, subspace="even-nonconstant")
        lam = rep.lambda1_even
        assert abs(gap - (lam - n + 2)) / lam < 1e-3


# ---------------------------------------------------------------------------
# centro-affine invariance of the spectrum
# ---------------------------------------------------------------------------


def test_invariance_identity_map():
    g = build_grid(2, 16)
    res = invariance_check(perturbed_ball(2, 0.1), np.eye(2), g)
    assert res["max_gap"] < 1e-12


def test_invariance_rotation():
    g = build_grid(3, 14)
    th = 0.7
    R = np.array([
        [np.cos(th), -np.sin(th), 0.0],
        [np.sin(th), np.cos(th), 0.0],
        [0.0, 0.0, 1.0],
    ])
    res = invariance_check(perturbed_ball(3, 0.1), R, g, count=10)
    assert res["max_gap"] < 1e-8


def test_invariance_diagonal_stretch():
    g = build_grid(3, 24)
    res = invariance_check(perturbed_ball(3, 0.1), np.diag([2.0, 1.0, 1.0]), g,
                           count=10)
    assert res["max_gap"] < 1e-3

    g2 = build_grid(2, 24)
    res2 = invariance_check(perturbed_ball(2, 0.1), np.diag([2.0, 1.0]), g2,
                            count=10)
    assert res2["max_gap"] < 1e-3
