"""Tests for the centro-affine metric, conjugate calculus, Ricci and duality."""

import numpy as np
import pytest

from calab.bodies import (
    ball,
    ellipsoid,
    evaluate_on_grid,
    linear_image,
    perturbed_ball,
    polar,
    random_even_body,
)
from calab.calculus import (
    _conjugate_hessian_arrays,
    _hbm_arrays,
    adapted_linear,
    adapted_linear_derivs,
    build_state,
    conjugate_christoffels,
    conjugate_hessian,
    duality_isometry_check,
    duality_map,
    duality_roundtrip_error,
    hbm_apply,
    integrated_divergence_residual,
    pushforward_invariance_error,
    ricci_star_check,
    state_diagnostics,
    _sphere_symbols,
    _tangential_pinv,
)
from calab.sphere import (
    ScalarField,
    build_grid,
    synthesize,
    tangential_hessian,
)


def state_for(body, n, L):
    g = build_grid(n, L)
    return build_state(evaluate_on_grid(body, g))


# ---------------------------------------------------------------------------
# state densities
# ---------------------------------------------------------------------------


def test_ball_state_densities():
    st = state_for(ball(1.0, 3), 3, 8)
    assert np.abs(st.nu_density - 1.0).max() < 1e-10
    assert np.abs(st.nu_star_density - 1.0).max() < 1e-10
    r = 1.3
    st = state_for(ball(r, 3), 3, 8)
    assert np.abs(st.nu_density - r**3).max() < 1e-9
    assert np.abs(st.nu_star_density - r**-3).max() < 1e-10


def test_measure_conjugacy_invariant():
    for body, n in [(ellipsoid(np.diag([2.0, 1.0])), 2),
                    (ellipsoid(np.diag([2.0, 1.0, 0.6])), 3),
                    (perturbed_ball(3, 0.1), 3)]:
        st = state_for(body, n, 12)
        detg = np.array([np.prod(e) for e in
                         np.linalg.eigvalsh(st.bg.g)[:, 1:]])  # drop kernel 0
        rel = np.abs(st.nu_density * st.nu_star_density - detg) / detg
        assert rel.max() < 1e-8


def test_state_requires_valid_body():
    g = build_grid(2, 16)
    bg = evaluate_on_grid(perturbed_ball(2, 1.5), g)
    with pytest.raises(ValueError):
        build_state(bg)


def test_tangential_pinv():
    g = build_grid(3, 8)
    bg = evaluate_on_grid(ellipsoid(np.diag([2.0, 1.0, 0.7])), g)
    Q = _tangential_pinv(bg.D2h, g.nodes)
    # Q * D2h = tangential projector
    prod = np.einsum("ikl,ilm->ikm", Q, bg.D2h)
    proj = np.eye(3)[None] - g.nodes[:, :, None] * g.nodes[:, None, :]
    assert np.abs(prod - proj).max() < 1e-9


# ---------------------------------------------------------------------------
# conjugate Hessian
# ---------------------------------------------------------------------------


def test_conjugate_hessian_on_ball_is_spherical_hessian():
    g = build_grid(3, 12)
    st = build_state(evaluate_on_grid(ball(1.0, 3), g))
    rng = np.random.default_rng(0)
    c = rng.normal(size=g.basis.size) * np.exp(-0.6 * g.basis.degrees)
    f = synthesize(g, c)
    Hs = conjugate_hessian(st, f).tensors
    H = tangential_hessian(f).tensors
    assert np.abs(Hs - H).max() < 1e-10


def test_conjugate_hessian_of_constant_is_zero():
    st = state_for(ellipsoid(np.diag([2.0, 1.0])), 2, 16)
    f = ScalarField.from_values(st.grid, np.full(st.grid.node_count, 4.2))
    assert np.abs(conjugate_hessian(st, f).tensors).max() < 1e-10


@pytest.mark.parametrize("body,n,L", [
    (ellipsoid(np.diag([2.0, 1.0])), 2, 24),
    (ellipsoid(np.diag([1.6, 1.0, 0.8])), 3, 16),
    (perturbed_ball(2, 0.1), 2, 24),
])
def test_adapted_linear_hessian_identity(body, n, L):
    # Hess* of <theta,xi>/h equals -f g, pointwise (closed-form derivatives:
    # the field is analytic but not band-limited)
    st = state_for(body, n, L)
    for k in range(n):
        xi = np.zeros(n)
        xi[k] = 1.0
        fv, grad, hess = adapted_linear_derivs(st, xi)
        Hs = _conjugate_hessian_arrays(st, grad, hess)
        target = -fv[:, None, None] * st.bg.g
        scale = np.linalg.norm(st.bg.g, axis=(1, 2)).max()
        assert np.abs(Hs - target).max() < 1e-8 * scale


# ---------------------------------------------------------------------------
# the HBM operator as the induced Laplacian
# ---------------------------------------------------------------------------


def test_hbm_kills_constants():
    st = state_for(perturbed_ball(3, 0.1), 3, 12)
    f = ScalarField.from_values(st.grid, np.ones(st.grid.node_count))
    assert np.abs(hbm_apply(st, f).values).max() < 1e-9


@pytest.mark.parametrize("body,n,L", [
    (ellipsoid(np.diag([2.0, 1.0])), 2, 24),
    (ellipsoid(np.diag([1.6, 1.0, 0.8])), 3, 16),
    (perturbed_ball(3, 0.1), 3, 16),
])
def test_adapted_linear_functions_are_first_eigenfunctions(body, n, L):
    st = state_for(body, n, L)
    rng = np.random.default_rng(1)
    xi = rng.normal(size=n)
    fv, grad, hess = adapted_linear_derivs(st, xi)
    lf = _hbm_arrays(st, grad, hess)
    # -L f = (n-1) f
    scale = np.abs(fv).max()
    assert np.abs(lf + (n - 1) * fv).max() < 1e-8 * scale


def test_ball_hbm_is_laplace_beltrami():
    g = build_grid(3, 12)
    st = build_state(evaluate_on_grid(ball(1.0, 3), g))
    B, _, _ = g.basis_tables()
    idx = int(np.flatnonzero(g.basis.degrees == 2)[0])
    f = ScalarField.from_values(g, B[:, idx])
    lf = hbm_apply(st, f)
    # -L f = l(l+1) f = 2n f on degree-2 harmonics
    assert np.abs(lf.values + 6.0 * f.values).max() < 1e-9


# ---------------------------------------------------------------------------
# Christoffel symbols and curvature
# ---------------------------------------------------------------------------


def test_ball_conjugate_symbols_are_sphere_symbols():
    g = build_grid(3, 8)
    st = build_state(evaluate_on_grid(ball(1.0, 3), g))
    G = conjugate_christoffels(st)
    keep = ~g.pole_mask
    from calab.sphere import _angles_from_points

    theta, _ = _angles_from_points(g.nodes, 3)
    G0 = _sphere_symbols(theta[keep])
    assert np.abs(G[keep] - G0).max() < 1e-12


def test_conjugate_symbols_are_torsion_free():
    st = state_for(perturbed_ball(3, 0.1), 3, 12)
    G = conjugate_christoffels(st)
    keep = ~st.grid.pole_mask
    assert np.abs(G[keep] - G[keep].transpose(0, 2, 1, 3)).max() < 1e-12


def test_conjugate_symbols_require_n3():
    st = state_for(ellipsoid(np.diag([2.0, 1.0])), 2, 16)
    with pytest.raises(ValueError):
        conjugate_christoffels(st)


def test_conjugacy_of_connections_fd_oracle():
    """d_u g(V,W) = g(grad_u V, W) + g(V, grad*_u W) with the primal action
    reconstructed from the Gauss structure equation (finite differences)."""
    n, L = 3, 16
    body = ellipsoid(np.array([[1.5, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 0.8]]))
    g = build_grid(n, L)
    bg = evaluate_on_grid(body, g)
    st = build_state(bg)
    rng = np.random.default_rng(2)
    A = rng.normal(size=(n, n))
    Bm = rng.normal(size=(n, n))

    def Vf(p):
        w = p @ A.T
        return w - np.einsum("ij,ij->i", w, p)[:, None] * p

    def Wf(p):
        w = p @ Bm.T
        return w - np.einsum("ij,ij->i", w, p)[:, None] * p

    def gmat(p):
        h = body.support(p)
        H = body.support_hess(p)
        proj = np.eye(n)[None] - p[:, :, None] * p[:, None, :]
        D2 = np.einsum("iab,ibc,icd->iad", proj, H, proj)
        return D2 / h[:, None, None]

    keep = np.flatnonzero(~g.pole_mask)[::7]
    pts = g.nodes[keep]
    frames = g.tangent_frames()[keep]
    eps = 1e-5
    worst = 0.0
    for q in range(n - 1):
        u = frames[:, :, q]

        def curve(t):
            c = pts + t * u
            return c / np.linalg.norm(c, axis=1, keepdims=True)

        def scal(t):
            c = curve(t)
            return np.einsum("ik,ikl,il->i", Vf(c), gmat(c), Wf(c))

        lhs = (scal(eps) - scal(-eps)) / (2 * eps)

        # conjugate covariant derivative of W (first-derivative formula)
        dW = (Wf(curve(eps)) - Wf(curve(-eps))) / (2 * eps)
        proj = np.eye(n)[None] - pts[:, :, None] * pts[:, None, :]
        sphW = np.einsum("ikl,il->ik", proj, dW)
        glh = st.log_h_gradient.vectors[keep]
        W0, V0 = Wf(pts), Vf(pts)
        ulogh = np.einsum("ik,ik->i", u, glh)
        Wlogh = np.einsum("ik,ik->i", W0, glh)
        covW = sphW - ulogh[:, None] * W0 - Wlogh[:, None] * u

        # primal covariant derivative of V via the Gauss equation:
        # dx(grad_u V) = D_u(dx(V)) + g(u, V) x
        def dxV(t):
            c = curve(t)
            H = body.support_hess(c)
            return np.einsum("ikl,il->ik", H, Vf(c))

        DuF = (dxV(eps) - dxV(-eps)) / (2 * eps)
        guv = np.einsum("ik,ikl,il->i", u, gmat(pts), V0)
        xb = bg.x[keep]
        rhs_vec = DuF + guv[:, None] * xb
        tang = np.einsum("ikl,il->ik", proj, rhs_vec)
        D2 = bg.D2h[keep]
        covV = np.einsum("ikl,il->ik", _tangential_pinv(D2, pts), tang)

        G0 = gmat(pts)
        rhs = np.einsum("ik,ikl,il->i", covV, G0, W0) + np.einsum(
            "ik,ikl,il->i", V0, G0, covW
        )
        scale = np.maximum(np.abs(lhs), 1.0)
        worst = max(worst, float((np.abs(lhs - rhs) / scale).max()))
    assert worst < 1e-4


def test_ricci_constancy():
    st = state_for(ball(1.0, 3), 3, 12)
    assert ricci_star_check(st)["max_relative_deviation"] < 1e-6

    st = state_for(ellipsoid(np.diag([2.0, 1.0, 1.0])), 3, 24)
    assert ricci_star_check(st)["max_relative_deviation"] < 1e-2

    st2 = state_for(ellipsoid(np.diag([2.0, 1.0])), 2, 16)
    assert ricci_star_check(st2)["max_relative_deviation"] == 0.0


# ---------------------------------------------------------------------------
# duality
# ---------------------------------------------------------------------------


def test_duality_ball_self_dual():
    g = build_grid(3, 12)
    bg = evaluate_on_grid(ball(1.0, 3), g)
    res = duality_isometry_check(bg, bg)  # unit ball is its own polar
    assert res["metric_pullback_error"] < 1e-10
    assert res["omega_mass_gap"] < 1e-12
    assert duality_roundtrip_error(bg, ball(1.0, 3)) < 1e-12


def test_duality_map_directions():
    g = build_grid(2, 16)
    A = np.diag([2.0, 1.0])
    bg = evaluate_on_grid(ellipsoid(A), g)
    d = duality_map(bg).directions
    expected = bg.x / np.linalg.norm(bg.x, axis=1, keepdims=True)
    assert np.allclose(d, expected)


def test_duality_isometry_ellipsoid():
    g = build_grid(3, 24)
    A = np.diag([1.5, 1.0, 0.8])
    bgK = evaluate_on_grid(ellipsoid(A), g)
    bgP = evaluate_on_grid(ellipsoid(np.linalg.inv(A)), g)
    res = duality_isometry_check(bgK, bgP)
    assert res["metric_pullback_error"] < 1e-2
    assert res["omega_mass_gap"] < 1e-3
    assert duality_roundtrip_error(bgK, ellipsoid(np.linalg.inv(A))) < 1e-10


def test_duality_isometry_numeric_polar():
    g = build_grid(2, 24)
    K = perturbed_ball(2, 0.1)
    bgK = evaluate_on_grid(K, g)
    bgP = evaluate_on_grid(polar(K, g), g)
    res = duality_isometry_check(bgK, bgP)
    assert res["metric_pullback_error"] < 1e-2
    assert res["omega_mass_gap"] < 1e-3


# ---------------------------------------------------------------------------
# integral identities
# ---------------------------------------------------------------------------


def test_integrated_divergence_residual():
    for n, L, seed in [(2, 24, 3), (3, 16, 4)]:
        body = random_even_body(n, seed=seed)
        g = build_grid(n, L)
        st = build_state(evaluate_on_grid(body, g))
        rng = np.random.default_rng(seed)
        c = rng.normal(size=g.basis.size) * (g.basis.degrees <= 6)
        f = synthesize(g, c)
        assert integrated_divergence_residual(st, f) < 1e-6


def test_unimodular_pushforward_invariance():
    n = 3
    g = build_grid(n, 20)
    K = perturbed_ball(n, 0.1)
    T = np.array([[1.2, 0.1, 0.0], [0.1, 0.9, 0.05], [0.0, 0.05, 1.0]])
    T /= np.linalg.det(T) ** (1.0 / n)
    bgK = evaluate_on_grid(K, g)
    bgTK = evaluate_on_grid(linear_image(K, T), g)
    a = np.array([0.3, -0.2, 0.5])

    def test_fn(x):
        return np.exp(x @ a)

    assert pushforward_invariance_error(bgK, bgTK, T, test_fn) < 1e-4


def test_state_diagnostics_report():
    st = state_for(ellipsoid(np.diag([2.0, 1.0, 0.8])), 3, 12)
    rep = state_diagnostics(st)
    names = {r["name"] for r in rep}
    assert names == {"measure_conjugacy", "adapted_linear_hessian"}
    assert all(r["max_error"] < 1e-6 for r in rep)
