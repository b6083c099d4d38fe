"""Tests for grids, quadrature, and tangential calculus on S^{n-1}."""

import numpy as np
import pytest

from calab.sphere import (
    ScalarField,
    build_grid,
    quadrature,
    tangential_gradient,
    tangential_hessian,
    parity_split,
    laplace_beltrami,
    analyze,
    synthesize,
    fd_gradient_on_sphere,
    fd_hessian_on_sphere,
    SURFACE_MEASURE,
)


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


def test_build_grid_n2_node_count_and_weights():
    g = build_grid(2, 16)
    assert g.node_count == 68
    assert abs(g.weights.sum() - 2.0 * np.pi) < 1e-10


def test_build_grid_n3_weights_sum():
    g = build_grid(3, 16)
    assert abs(g.weights.sum() - 4.0 * np.pi) < 1e-10


def test_build_grid_rejects_unsupported_dimension():
    with pytest.raises(ValueError):
        build_grid(4, 16)


def test_build_grid_rejects_odd_band_limit():
    with pytest.raises(ValueError):
        build_grid(2, 15)


@pytest.mark.parametrize("n,L", [(2, 8), (2, 16), (3, 8), (3, 16)])
def test_grid_invariants(n, L):
    g = build_grid(n, L)
    norms = np.linalg.norm(g.nodes, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-14
    assert (g.weights > 0).all()
    assert abs(g.weights.sum() - SURFACE_MEASURE[n]) < 1e-10
    # antipodal pairing is exact and involutive
    assert np.abs(g.nodes[g.antipodal_index] + g.nodes).max() < 1e-12
    assert (g.antipodal_index[g.antipodal_index] == np.arange(g.node_count)).all()


def test_n2_node_count_override():
    g = build_grid(2, 62, n_nodes=256)
    assert g.node_count == 256
    assert abs(g.weights.sum() - 2.0 * np.pi) < 1e-10


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def test_quadrature_constant_circle():
    g = build_grid(2, 8)
    f = ScalarField.from_values(g, np.ones(g.node_count))
    assert abs(quadrature(f) - 2.0 * np.pi) < 1e-12


def test_quadrature_linear_sphere_vanishes():
    g = build_grid(3, 8)
    e = np.array([0.3, -0.5, 0.81])
    e /= np.linalg.norm(e)
    f = ScalarField.from_function(g, lambda x: x @ e)
    assert abs(quadrature(f)) < 1e-12


def test_quadrature_second_moment_sphere():
    # closed form: int <theta,e>^2 dm = 4 pi / 3; cross-checked by Monte Carlo
    g = build_grid(3, 8)
    e = np.array([0.6, 0.0, 0.8])
    f = ScalarField.from_function(g, lambda x: (x @ e) ** 2)
    val = quadrature(f)
    assert abs(val - 4.0 * np.pi / 3.0) < 1e-12

    rng = np.random.default_rng(7)
    pts = rng.normal(size=(200_000, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    mc = 4.0 * np.pi * np.mean((pts @ e) ** 2)
    # MC standard error ~ 4pi * std/sqrt(N) ~ 0.008
    assert abs(val - mc) < 0.03


def test_quadrature_odd_field_is_zero():
    for n in (2, 3):
        g = build_grid(n, 8)
        rng = np.random.default_rng(n)
        v = rng.normal(size=g.node_count)
        _, odd = parity_split(ScalarField.from_values(g, v))
        assert abs(quadrature(odd)) < 1e-12


# ---------------------------------------------------------------------------
# parity
# ---------------------------------------------------------------------------


def test_parity_split_reconstructs_and_classifies():
    g = build_grid(3, 8)
    e = np.array([0.0, 1.0, 0.0])
    lin = g.nodes @ e
    f = ScalarField.from_values(g, lin + lin**2)
    even, odd = parity_split(f)
    assert np.allclose(even.values + odd.values, f.values, atol=1e-14)
    assert np.allclose(even.values, lin**2, atol=1e-14)
    assert np.allclose(odd.values, lin, atol=1e-14)
    assert even.parity == "even" and odd.parity == "odd"


def test_parity_detection():
    g = build_grid(2, 8)
    const = ScalarField.from_values(g, np.full(g.node_count, 2.5))
    assert const.parity == "even"
    lin = ScalarField.from_function(g, lambda x: x[:, 0])
    assert lin.parity == "odd"


# ---------------------------------------------------------------------------
# spectral transform
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3])
def test_analysis_synthesis_roundtrip(n):
    g = build_grid(n, 8)
    rng = np.random.default_rng(42)
    c = rng.normal(size=g.basis.size) * np.exp(-0.3 * g.basis.degrees)
    f = synthesize(g, c)
    c2 = analyze(f)
    assert np.abs(c2 - c).max() < 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_basis_orthonormal_under_quadrature(n):
    g = build_grid(n, 8)
    B, _, _ = g.basis_tables()
    gram = B.T @ (g.weights[:, None] * B)
    assert np.abs(gram - np.eye(g.basis.size)).max() < 1e-10


# ---------------------------------------------------------------------------
# tangential derivatives
# ---------------------------------------------------------------------------


def test_gradient_of_constant_vanishes():
    g = build_grid(3, 8)
    f = ScalarField.from_values(g, np.full(g.node_count, 3.0))
    assert np.abs(tangential_gradient(f).vectors).max() < 1e-11
    assert np.abs(tangential_hessian(f).tensors).max() < 1e-11


def test_gradient_of_linear_field():
    g = build_grid(3, 8)
    e = np.array([0.0, 0.0, 1.0])
    f = ScalarField.from_function(g, lambda x: x @ e)
    grad = tangential_gradient(f).vectors
    # grad of <theta,e> is the tangential projection of e
    proj = e[None, :] - (g.nodes @ e)[:, None] * g.nodes
    assert np.abs(grad - proj).max() < 1e-10


def test_hessian_of_linear_field_is_degree_one_identity():
    # degree-1 harmonic: covariant Hessian = -f * P_tangent
    g = build_grid(3, 8)
    e = np.array([1.0, 0.0, 0.0])
    f = ScalarField.from_function(g, lambda x: x @ e)
    H = tangential_hessian(f).tensors
    P = np.eye(3)[None] - g.nodes[:, :, None] * g.nodes[:, None, :]
    expected = -(g.nodes @ e)[:, None, None] * P
    assert np.abs(H - expected).max() < 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_gradient_hessian_match_fd_oracle(n):
    # random band-8 field against the finite-difference oracle
    g = build_grid(n, 16)
    rng = np.random.default_rng(3)
    mask = g.basis.degrees <= 8
    c = np.where(mask, rng.normal(size=g.basis.size), 0.0)
    f = synthesize(g, c)

    def fn(x):
        return g.basis.eval(x) @ c

    keep = ~g.pole_mask
    grad = tangential_gradient(f).vectors
    grad_fd = fd_gradient_on_sphere(fn, g.nodes)
    assert np.abs(grad - grad_fd)[keep].max() < 1e-6

    hess = tangential_hessian(f).tensors
    hess_fd = fd_hessian_on_sphere(fn, g.nodes)
    assert np.abs(hess - hess_fd)[keep].max() < 1e-6


def test_derivative_fields_are_tangential():
    g = build_grid(3, 16)
    rng = np.random.default_rng(11)
    c = rng.normal(size=g.basis.size) * np.exp(-0.5 * g.basis.degrees)
    f = synthesize(g, c)
    grad = tangential_gradient(f).vectors
    radial = np.einsum("ik,ik->i", grad, g.nodes)
    scale = np.abs(grad).max()
    assert np.abs(radial).max() < 1e-10 * max(scale, 1.0)
    H = tangential_hessian(f).tensors
    Hrad = np.einsum("ikl,il->ik", H, g.nodes)
    assert np.abs(Hrad).max() < 1e-10 * max(np.abs(H).max(), 1.0)
    assert np.abs(H - H.transpose(0, 2, 1)).max() < 1e-12


def test_spherical_harmonics_eigenfunctions_of_laplacian():
    # closed-form check up to degree L/2
    g = build_grid(3, 16)
    B, _, _ = g.basis_tables()
    for a in range(g.basis.size):
        l = g.basis.degrees[a]
        if l > g.band_limit // 2:
            continue
        f = ScalarField.from_values(g, B[:, a])
        lap = laplace_beltrami(f).values
        assert np.abs(lap + l * (l + 1) * B[:, a]).max() < 1e-8


def test_divergence_identity():
    # int <grad f, grad g> dm = -int f * (Laplace-Beltrami g) dm
    for n in (2, 3):
        g = build_grid(n, 16)
        rng = np.random.default_rng(n + 5)
        damp = np.exp(-0.4 * g.basis.degrees)
        cf = rng.normal(size=g.basis.size) * damp
        cg = rng.normal(size=g.basis.size) * damp
        f = synthesize(g, cf)
        h = synthesize(g, cg)
        gf = tangential_gradient(f).vectors
        gh = tangential_gradient(h).vectors
        lhs = g.weights @ np.einsum("ik,ik->i", gf, gh)
        rhs = -(g.weights @ (f.values * laplace_beltrami(h).values))
        assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), abs(rhs), 1e-12)


def test_tail_warning_for_rough_field():
    g = build_grid(2, 8)
    # sawtooth-like field far above the band limit
    t = np.arctan2(g.nodes[:, 1], g.nodes[:, 0])
    f = ScalarField.from_values(g, np.sign(np.sin(17.0 * t)) + np.cos(t))
    assert tangential_gradient(f).tail_warning


def test_grid_json_roundtrip():
    import json

    g = build_grid(3, 8)
    d = json.loads(g.to_json())
    assert d == {"dimension": 3, "band_limit": 8, "node_count": g.node_count}


def test_field_csv_export(tmp_path):
    from calab.sphere import field_to_csv

    g = build_grid(2, 8)
    f = ScalarField.from_function(g, lambda x: x[:, 0] ** 2)
    path = tmp_path / "field.csv"
    field_to_csv(f, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "index,x,y,value"
    assert len(lines) == g.node_count + 1
    idx, x, y, v = lines[1].split(",")
    assert abs(float(v) - float(x) ** 2) < 1e-15
