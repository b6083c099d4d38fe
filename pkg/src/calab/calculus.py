"""Centro-affine differential structures on the sphere parametrization.

Carries the metric g = D^2h/h, the primal/dual volume densities h det(D^2h)
and h^{-n}, the conjugate-connection calculus (Christoffel symbols, conjugate
Hessian, the induced Laplacian), the duality map, and the constant-Ricci
check.  The primal connection is never assembled; everything routes through
the conjugate side and the metric, which keeps third derivatives of h out of
the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from calab.bodies import BodyEvaluator, BodyOnGrid, quantities
from calab.sphere import (
    ScalarField,
    TangentField,
    TangentTensorField,
    analyze,
    quad_values,
    tangential_gradient,
    tangential_hessian,
    _sph_frames,
    _angles_from_points,
)


@dataclass(frozen=True)
class CentroAffineState:
    bg: BodyOnGrid
    nu_density: np.ndarray        # h * det D^2 h (primal volume density)
    nu_star_density: np.ndarray   # h^{-n} (dual volume density)
    log_h_gradient: TangentField
    frames: np.ndarray            # (N, n, n-1) orthonormal tangent frames
    ginv: np.ndarray              # (N, n, n) tangential inverse metric

    @property
    def grid(self):
        return self.bg.grid

    @property
    def n(self):
        return self.bg.grid.n


def _tangential_pinv(tensors: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Inverse on the tangent space of symmetric tensors annihilating the
    node direction: inv(A + theta theta^t) - theta theta^t."""
    pad = nodes[:, :, None] * nodes[:, None, :]
    return np.linalg.inv(tensors + pad) - pad


def _smooth_frames(grid) -> np.ndarray:
    """Spherical-coordinate orthonormal frames (smooth away from the poles)."""
    if grid.n == 2:
        t = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        tau = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        return tau[:, :, None]
    theta, phi = _angles_from_points(grid.nodes, 3)
    e_th, e_ph = _sph_frames(theta, phi)
    return np.stack([e_th, e_ph], axis=-1)


def build_state(bg: BodyOnGrid) -> CentroAffineState:
    if not bg.valid:
        raise ValueError("state requires a strongly convex body on the grid")
    n = bg.grid.n
    nu = bg.h * bg.sk_density
    nu_star = bg.h ** (-float(n))
    # grad of log h = tangential part of the boundary point over h
    glh = (bg.x - bg.h[:, None] * bg.grid.nodes) / bg.h[:, None]
    ginv = bg.h[:, None, None] * _tangential_pinv(bg.D2h, bg.grid.nodes)
    return CentroAffineState(
        bg=bg,
        nu_density=nu,
        nu_star_density=nu_star,
        log_h_gradient=TangentField(bg.grid, glh),
        frames=_smooth_frames(bg.grid),
        ginv=ginv,
    )


# ----------------------------------------------------------------------
# conjugate Hessian and the induced (Hilbert-Brunn-Minkowski) Laplacian


def _conjugate_hessian_arrays(state: CentroAffineState, grad: np.ndarray,
                              hess: np.ndarray) -> np.ndarray:
    glh = state.log_h_gradient.vectors
    cross = glh[:, :, None] * grad[:, None, :]
    return hess + cross + cross.transpose(0, 2, 1)


def conjugate_hessian(state: CentroAffineState, f: ScalarField) -> TangentTensorField:
    """Hessian of f for the conjugate connection:
    Hess* f = Hess_sphere f + d(log h) (x) df + df (x) d(log h)."""
    grad = tangential_gradient(f)
    hess = tangential_hessian(f)
    tens = _conjugate_hessian_arrays(state, grad.vectors, hess.tensors)
    return TangentTensorField(state.grid, tens,
                              tail_warning=grad.tail_warning or hess.tail_warning)


def _hbm_arrays(state: CentroAffineState, grad: np.ndarray,
                hess: np.ndarray) -> np.ndarray:
    Hs = _conjugate_hessian_arrays(state, grad, hess)
    return np.einsum("ikl,ilk->i", state.ginv, Hs)


def hbm_apply(state: CentroAffineState, f: ScalarField) -> ScalarField:
    """The Hilbert-Brunn-Minkowski operator: trace of Hess* f in the metric."""
    grad = tangential_gradient(f)
    hess = tangential_hessian(f)
    return ScalarField.from_values(state.grid, _hbm_arrays(state, grad.vectors,
                                                           hess.tensors))


def grad_norm_sq(state: CentroAffineState, f: ScalarField) -> np.ndarray:
    """|grad_g f|^2 = g^{ij} f_i f_j per node."""
    df = tangential_gradient(f).vectors
    return np.einsum("ik,ikl,il->i", df, state.ginv, df)


def hess_norm_sq(state: CentroAffineState, f: ScalarField) -> np.ndarray:
    """||Hess* f||_g^2 = tr(g^{-1} Hess* g^{-1} Hess*) per node."""
    Hs = conjugate_hessian(state, f).tensors
    M = np.einsum("ikl,ilm->ikm", state.ginv, Hs)
    return np.einsum("ikl,ilk->i", M, M)


def adapted_linear(state: CentroAffineState, xi: np.ndarray) -> ScalarField:
    """The first-eigenfunction family <theta, xi>/h."""
    vals = (state.grid.nodes @ np.asarray(xi, dtype=float)) / state.bg.h
    return ScalarField.from_values(state.grid, vals)


def adapted_linear_derivs(state: CentroAffineState, xi: np.ndarray):
    """Values, tangential gradient, and covariant Hessian of <theta,xi>/h in
    closed form (the field is analytic but not band-limited, so spectral
    differentiation would inject representation error into identity checks)."""
    xi = np.asarray(xi, dtype=float)
    bg = state.bg
    nodes = state.grid.nodes
    h, x = bg.h, bg.x
    u = nodes @ xi
    f = u / h
    grad = xi[None, :] / h[:, None] - (f / h)[:, None] * x
    cross = xi[None, :, None] * x[:, None, :]
    D2f = (
        -(cross + cross.transpose(0, 2, 1)) / h[:, None, None] ** 2
        - (u / h**2)[:, None, None] * bg.D2h
        + 2.0 * (u / h**3)[:, None, None] * (x[:, :, None] * x[:, None, :])
    )
    proj = np.eye(state.n)[None] - nodes[:, :, None] * nodes[:, None, :]
    grad = np.einsum("ikl,il->ik", proj, grad)
    hess = np.einsum("iab,ibc,icd->iad", proj, D2f, proj)
    return f, grad, hess


# ----------------------------------------------------------------------
# conjugate Christoffel symbols and the Ricci check


_SPHERE_COORD_EPS = 1e-4


def _coord_partials_log_h(body: BodyEvaluator, theta, phi):
    """Coordinate partials (d_theta log h, d_phi log h) at given angles."""
    st, ct = np.sin(theta), np.cos(theta)
    pts = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)
    h = body.support(pts)
    xb = body.support_grad(pts)
    glh = (xb - h[:, None] * pts) / h[:, None]
    e_th, e_ph = _sph_frames(theta, phi)
    return (
        np.einsum("ik,ik->i", glh, e_th),
        np.einsum("ik,ik->i", glh, e_ph) * st,
    )


def _sphere_symbols(theta):
    """Round-sphere Christoffels in (theta, phi) coordinates, (P, 2, 2, 2)."""
    P = len(theta)
    G = np.zeros((P, 2, 2, 2))  # indices [i, j, k] for Gamma^k_{ij}
    st, ct = np.sin(theta), np.cos(theta)
    G[:, 1, 1, 0] = -st * ct          # Gamma^theta_{phi phi}
    G[:, 0, 1, 1] = ct / st           # Gamma^phi_{theta phi}
    G[:, 1, 0, 1] = ct / st
    return G


def _sphere_symbols_dtheta(theta):
    """Analytic theta-derivatives of the round-sphere symbols."""
    P = len(theta)
    dG = np.zeros((P, 2, 2, 2))
    st = np.sin(theta)
    dG[:, 1, 1, 0] = -np.cos(2.0 * theta)
    dG[:, 0, 1, 1] = -1.0 / st**2
    dG[:, 1, 0, 1] = -1.0 / st**2
    return dG


def _body_symbols_at(body: BodyEvaluator, theta, phi):
    """Body-dependent part of the conjugate symbols (smooth, no cot terms)."""
    lt, lp = _coord_partials_log_h(body, theta, phi)
    dlog = np.stack([lt, lp], axis=-1)  # (P, 2)
    out = np.zeros((len(theta), 2, 2, 2))
    for k in range(2):
        out[:, k, :, k] -= dlog
        out[:, :, k, k] -= dlog
    return out


def _conjugate_symbols_at(body: BodyEvaluator, theta, phi):
    return _sphere_symbols(theta) + _body_symbols_at(body, theta, phi)


def conjugate_christoffels(state: CentroAffineState) -> np.ndarray:
    """Conjugate-connection symbols in (theta, phi) coordinates at the nodes.

    n=3 only; the n=2 analogue is the scalar -2 d_t(log h) and carries no
    curvature content.  Raises when every node is pole-masked.
    """
    if state.n != 3:
        raise ValueError("coordinate Christoffel symbols are built for n=3")
    grid = state.grid
    keep = ~grid.pole_mask
    if not keep.any():
        raise ValueError("all nodes are pole-masked")
    theta, phi = _angles_from_points(grid.nodes, 3)
    out = np.full((grid.node_count, 2, 2, 2), np.nan)
    out[keep] = _conjugate_symbols_at(state.bg.body, theta[keep], phi[keep])
    return out


def ricci_star_check(state: CentroAffineState) -> dict:
    """Max relative deviation of the conjugate Ricci tensor from (n-2) g.

    The Ricci tensor is assembled from the conjugate symbols and their
    coordinate derivatives (central differences of the symbol field).
    Constant for every body; n=2 manifolds carry no Ricci (deviation 0).
    """
    if state.n == 2:
        return {"max_relative_deviation": 0.0, "node": -1}
    grid = state.grid
    body = state.bg.body
    keep = np.flatnonzero(~grid.pole_mask)
    theta, phi = _angles_from_points(grid.nodes, 3)
    th, ph = theta[keep], phi[keep]
    eps = _SPHERE_COORD_EPS

    G0 = _conjugate_symbols_at(body, th, ph)
    # sphere part differentiated analytically (FD on cot terms loses digits
    # near the poles); the smooth body part is centrally differenced
    dG = np.empty(G0.shape + (2,))
    dG[..., 0] = _sphere_symbols_dtheta(th) + (
        _body_symbols_at(body, th + eps, ph)
        - _body_symbols_at(body, th - eps, ph)
    ) / (2 * eps)
    dG[..., 1] = (
        _body_symbols_at(body, th, ph + eps)
        - _body_symbols_at(body, th, ph - eps)
    ) / (2 * eps)

    # Ric_{jk} = d_i G^i_{jk} - d_j G^i_{ik} + G^i_{ip} G^p_{jk}
    #                                        - G^i_{jp} G^p_{ik}
    P = len(keep)
    ric = np.zeros((P, 2, 2))
    for j in range(2):
        for k in range(2):
            for i in range(2):
                ric[:, j, k] += dG[:, j, k, i, i] - dG[:, i, k, i, j]
                for p in range(2):
                    ric[:, j, k] += (
                        G0[:, i, p, i] * G0[:, j, k, p]
                        - G0[:, j, p, i] * G0[:, i, k, p]
                    )

    # coordinate components of g at the nodes
    st = np.sin(th)
    e_th, e_ph = _sph_frames(th, ph)
    J = np.stack([e_th, st[:, None] * e_ph], axis=-1)  # (P, 3, 2)
    gmat = state.bg.g[keep]
    gcoord = np.einsum("ika,ikl,ilb->iab", J, gmat, J)
    dev = np.linalg.norm(ric - (state.n - 2) * gcoord, axis=(1, 2))
    scale = np.linalg.norm(gcoord, axis=(1, 2))
    rel = dev / scale
    worst = int(np.argmax(rel))
    return {"max_relative_deviation": float(rel[worst]), "node": int(keep[worst])}


# ----------------------------------------------------------------------
# duality


@dataclass(frozen=True)
class DualityMap:
    grid: object
    directions: np.ndarray  # per node, the image direction x/|x| on S^{n-1}


def duality_map(bg: BodyOnGrid) -> DualityMap:
    d = bg.x / np.linalg.norm(bg.x, axis=1, keepdims=True)
    return DualityMap(bg.grid, d)


def duality_roundtrip_error(bg: BodyOnGrid, polar_body: BodyEvaluator) -> float:
    """Applying the map for K then for the polar returns the start direction."""
    d = duality_map(bg).directions
    back = polar_body.support_grad(d)
    back /= np.linalg.norm(back, axis=1, keepdims=True)
    keep = ~bg.grid.pole_mask
    return float(np.abs(back[keep] - bg.grid.nodes[keep]).max())


def duality_isometry_check(bgK: BodyOnGrid, bgKpolar: BodyOnGrid) -> dict:
    """Pull the polar metric back through the duality map and compare with
    g_K; compare the centro-affine surface-area masses.

    The polar metric is evaluated exactly through its evaluator at the mapped
    directions (band-limited/exact evaluation, not nearest-node lookup).
    """
    if bgK.grid is not bgKpolar.grid:
        raise ValueError("both bodies must live on the same grid")
    grid = bgK.grid
    keep = ~grid.pole_mask
    polar_body = bgKpolar.body

    xs = bgK.x
    r = np.linalg.norm(xs, axis=1)
    dirs = xs / r[:, None]

    hp = polar_body.support(dirs)
    Hp = polar_body.support_hess(dirs)
    proj = np.eye(grid.n)[None] - dirs[:, :, None] * dirs[:, None, :]
    D2hp = np.einsum("iab,ibc,icd->iad", proj, Hp, proj)
    gP = D2hp / hp[:, None, None]

    frames = grid.tangent_frames()
    # differential of the map theta -> x/|x|: (P_perp/|x|) D2h
    dM = np.einsum("iab,ibc,icq->iaq",
                   proj / r[:, None, None], bgK.D2h, frames)
    gK_f = np.einsum("ikq,ikl,ilr->iqr", frames, bgK.g, frames)
    gP_f = np.einsum("ikq,ikl,ilr->iqr", dM, gP, dM)
    num = np.linalg.norm(gP_f - gK_f, axis=(1, 2))
    den = np.linalg.norm(gK_f, axis=(1, 2))
    pull_err = float((num / den)[keep].max())

    qK = quantities(bgK)
    qP = quantities(bgKpolar)
    omega_gap = abs(qK.omega_n - qP.omega_n) / qK.omega_n
    return {"metric_pullback_error": pull_err, "omega_mass_gap": float(omega_gap)}


# ----------------------------------------------------------------------
# integral identities


def integrated_divergence_residual(state: CentroAffineState, f: ScalarField) -> float:
    """Divergence-theorem consistency for the field grad_g f: the integral of
    g(grad f, grad(Lf)) + (n-2)|grad f|^2 + ||Hess* f||^2 against nu vanishes.
    Returns the residual relative to the largest term."""
    w = state.grid.weights * state.nu_density
    Lf = hbm_apply(state, f)
    df = tangential_gradient(f).vectors
    dLf = tangential_gradient(Lf).vectors
    t1 = float(w @ np.einsum("ik,ikl,il->i", df, state.ginv, dLf))
    t2 = float((state.n - 2) * (w @ grad_norm_sq(state, f)))
    t3 = float(w @ hess_norm_sq(state, f))
    scale = max(abs(t1), abs(t2), abs(t3))
    if scale == 0.0:
        return 0.0
    return abs(t1 + t2 + t3) / scale


def pushforward_invariance_error(bgK: BodyOnGrid, bgTK: BodyOnGrid,
                                 T: np.ndarray, test_fn) -> float:
    """Unimodular invariance of the primal volume measure: integrating a test
    function against nu_{T(K)} equals integrating its pullback through
    theta -> T^{-t} theta / |T^{-t} theta| against nu_K."""
    Tinv_t = np.linalg.inv(np.asarray(T, dtype=float)).T
    grid = bgK.grid
    lhs = quad_values(grid, test_fn(grid.nodes) * bgTK.h * bgTK.sk_density)
    mapped = grid.nodes @ Tinv_t.T
    mapped /= np.linalg.norm(mapped, axis=1, keepdims=True)
    rhs = quad_values(grid, test_fn(mapped) * bgK.h * bgK.sk_density)
    return abs(lhs - rhs) / max(abs(lhs), 1e-300)


def state_diagnostics(state: CentroAffineState) -> list[dict]:
    """Machine-readable invariant report: {name, max error, node of max}."""
    n = state.n
    out = []
    detg = state.nu_density * state.nu_star_density
    detg_direct = state.bg.sk_density / state.bg.h ** (n - 1)
    err = np.abs(detg - detg_direct) / np.abs(detg_direct)
    i = int(np.argmax(err))
    out.append({"name": "measure_conjugacy", "max_error": float(err[i]), "node": i})

    errs = []
    for k in range(n):
        xi = np.zeros(n)
        xi[k] = 1.0
        fv, grad, hess = adapted_linear_derivs(state, xi)
        Hs = _conjugate_hessian_arrays(state, grad, hess)
        target = -fv[:, None, None] * state.bg.g
        e = np.linalg.norm(Hs - target, axis=(1, 2))
        errs.append(e)
    e = np.max(errs, axis=0) / np.maximum(
        np.linalg.norm(state.bg.g, axis=(1, 2)), 1e-300
    )
    i = int(np.argmax(e))
    out.append({"name": "adapted_linear_hessian", "max_error": float(e[i]), "node": i})
    return out
