"""Variational solver for the discrete even L^p-Minkowski problem.

Minimizes the scale-invariant functional whose critical points solve
h^{1-p} det(D^2 h) = c f for a prescribed positive even density f.  The
variable is the even-harmonic coefficient vector of the support function, so
evenness and smoothness are built in; strong convexity is maintained by a
backtracking line search with an eigenvalue floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from calab.bodies import BodyEvaluator, BodyOnGrid, SpectralBody, evaluate_on_grid
from calab.sphere import HarmonicBasis, ScalarField, SphereGrid


@dataclass(frozen=True)
class TargetMeasure:
    grid: SphereGrid
    density: np.ndarray
    even: bool = True

    @classmethod
    def from_density(cls, grid: SphereGrid, density) -> "TargetMeasure":
        f = np.asarray(density, dtype=float)
        if f.shape != (grid.node_count,):
            raise ValueError("density does not match the grid")
        if np.any(f <= 0):
            raise ValueError("density must be strictly positive")
        anti = f[grid.antipodal_index]
        if np.abs(f - anti).max() > 1e-12 * f.max():
            raise ValueError("density must be even (antipodally symmetric)")
        return cls(grid, f, True)

    @classmethod
    def from_body(cls, bg: BodyOnGrid, p: float) -> "TargetMeasure":
        """The L^p surface-area density h^{1-p} det D^2 h of a valid body."""
        if not bg.valid:
            raise ValueError("target body must be strongly convex")
        return cls.from_density(bg.grid, bg.h ** (1.0 - p) * bg.sk_density)

    @property
    def mass(self) -> float:
        return float(self.grid.weights @ self.density)


@dataclass
class SolveOptions:
    band: int = 16
    max_iter: int = 4000
    gtol: float = 1e-9
    eig_floor_factor: float = 1e-6
    step0: float = 0.5
    precondition: bool = True


@dataclass(frozen=True)
class SolveResult:
    coeffs: np.ndarray          # full-basis coefficients of h (odd entries 0)
    band: int
    n: int
    value: float                # functional at the result
    el_residual: float          # sup |h^{1-p} det D^2h / (c f) - 1|, c fitted
    iterations: int
    converged: bool
    normalization: float        # scale factor applied to reach V = 1
    history: tuple = ()         # functional value after each accepted step
    message: str = ""

    @property
    def body(self) -> BodyEvaluator:
        basis = HarmonicBasis(self.n, self.band)
        return SpectralBody(self.n, self.coeffs, basis, label="minkowski-solution")

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "dimension": self.n,
            "value": float(self.value),
            "el_residual": float(self.el_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "normalization": float(self.normalization),
            "coefficients": [float(c) for c in self.coeffs],
            "message": self.message,
        }


# ----------------------------------------------------------------------
# the functional


def functional(bg: BodyOnGrid, mu: TargetMeasure, p: float) -> float:
    """Scale-invariant target: (1/p) int h^p dmu / V^{p/n} for p != 0 and
    exp(int log h dmu~)/V^{1/n} at p = 0 (mu~ the normalized measure)."""
    if not (-bg.grid.n < p < 1):
        raise ValueError("p must lie in (-n, 1)")
    if bg.grid is not mu.grid:
        raise ValueError("body and measure must share a grid")
    w = bg.grid.weights
    n = bg.grid.n
    V = float(w @ bg.vk_density)
    if p == 0:
        avg = float(w @ (mu.density * np.log(bg.h))) / mu.mass
        return float(np.exp(avg) / V ** (1.0 / n))
    E = float(w @ (mu.density * bg.h**p)) / p
    return E / V ** (p / n)


# ----------------------------------------------------------------------
# solver internals


class _EvenModel:
    """Geometry of h = sum c_a phi_a on the grid, restricted to even degrees."""

    def __init__(self, grid: SphereGrid, band: int):
        if band > grid.band_limit:
            raise ValueError("solver band exceeds grid band limit")
        self.grid = grid
        self.basis = HarmonicBasis(grid.n, band)
        self.even = self.basis.parity > 0
        B, G, H = self.basis.eval_derivs(grid.nodes, order=2)
        self.B, self.G, self.H = B, G, H
        nodes = grid.nodes
        self.proj = np.eye(grid.n)[None] - nodes[:, :, None] * nodes[:, None, :]
        self.pad = nodes[:, :, None] * nodes[:, None, :]
        self.tau = grid.tangent_frames()

    def ball_coeffs(self, radius: float = 1.0) -> np.ndarray:
        c = np.zeros(self.basis.size)
        c[0] = radius / float(self.B[0, 0])  # constant basis fn is 1/sqrt(|S|)
        return c

    def geometry(self, c: np.ndarray):
        """h, D2h, det, min tangential eigenvalue for coefficients c."""
        h = self.B @ c
        if np.any(h <= 0):
            return h, None, None, -np.inf
        hess = np.einsum("iakl,a->ikl", self.H, c)
        D2h = hess + h[:, None, None] * self.proj
        det = np.linalg.det(D2h + self.pad)
        eig = np.linalg.eigvalsh(
            np.einsum("ikq,ikl,ilr->iqr", self.tau, D2h, self.tau)
        )
        return h, D2h, det, float(eig.min())


def _value_and_grad(model: _EvenModel, mu: TargetMeasure, p: float,
                    c: np.ndarray, h, det):
    """Functional value and gradient w.r.t. even coefficients at V = 1."""
    w = model.grid.weights
    n = model.grid.n
    V = float(w @ (h * det)) / n
    dV = model.B.T @ (w * det)  # first variation of volume against S_L
    if p == 0:
        mass = mu.mass
        avg = float(w @ (mu.density * np.log(h))) / mass
        F = np.exp(avg) / V ** (1.0 / n)
        dE = model.B.T @ (w * mu.density / h) / mass
        grad = F * (dE - dV / (n * V))
    else:
        E = float(w @ (mu.density * h**p)) / p
        dE = model.B.T @ (w * mu.density * h ** (p - 1.0))
        F = E / V ** (p / n)
        grad = dE / V ** (p / n) - (p / n) * E * V ** (-p / n - 1.0) * dV
    return F, grad


def minimize(mu: TargetMeasure, p: float, init: np.ndarray | None = None,
             options: SolveOptions | None = None) -> SolveResult:
    """Descend the functional over even-coefficient support functions.

    The iteration renormalizes to unit volume (the functional is
    0-homogeneous), takes preconditioned steepest-descent steps with Armijo
    backtracking, and rejects steps that leave the strongly convex cone
    (minimum eigenvalue of D^2 h below the floor)."""
    opts = options or SolveOptions()
    grid = mu.grid
    n = grid.n
    if not (-n < p < 1):
        raise ValueError("p must lie in (-n, 1)")
    model = _EvenModel(grid, opts.band)

    c = model.ball_coeffs() if init is None else np.asarray(init, dtype=float).copy()
    if len(c) != model.basis.size:
        raise ValueError("initial coefficients do not match the solver basis")
    c[~model.even] = 0.0

    h, D2h, det, mn = model.geometry(c)
    if det is None or mn <= 0:
        raise ValueError("infeasible initial body")

    def renorm(c, h, det):
        V = float(grid.weights @ (h * det)) / n
        s = V ** (-1.0 / n)
        return c * s, h * s, det * s ** (n - 1), s

    total_scale = 1.0
    c, h, det, s = renorm(c, h, det)
    total_scale *= s

    degs = model.basis.degrees.astype(float)
    precond = 1.0 / (1.0 + degs * (degs + n - 2)) if opts.precondition \
        else np.ones_like(degs)

    F, grad = _value_and_grad(model, mu, p, c, h, det)
    history = [F]
    step = opts.step0
    iterations = 0
    converged = False
    message = "max iterations reached"
    for iterations in range(1, opts.max_iter + 1):
        d = -precond * grad
        d[~model.even] = 0.0
        slope = float(grad @ d)
        gnorm = float(np.abs(d).max())
        if gnorm <= opts.gtol * max(abs(F), 1.0):
            converged = True
            message = "gradient tolerance reached"
            break
        accepted = False
        t = step
        for _ in range(40):
            cand = c + t * d
            hc, D2c, detc, mnc = model.geometry(cand)
            if detc is not None and mnc > opts.eig_floor_factor * np.mean(hc):
                Fc, gradc = _value_and_grad(model, mu, p, cand, hc, detc)
                if Fc <= F + 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            message = "line search stalled"
            break
        c, h, det = cand, hc, detc
        c, h, det, s = renorm(c, h, det)
        total_scale *= s
        F, grad = _value_and_grad(model, mu, p, c, h, det)
        history.append(F)
        step = min(t * 1.5, 4.0)

    # Euler-Lagrange certificate: h^{1-p} det D2h proportional to the density
    X = h ** (1.0 - p) * det
    wts = grid.weights
    cfit = float((wts * X) @ mu.density) / float((wts * mu.density) @ mu.density)
    el = float(np.abs(X / (cfit * mu.density) - 1.0).max())

    full = np.zeros(model.basis.size)
    full[:] = c
    return SolveResult(
        coeffs=full, band=opts.band, n=n, value=F, el_residual=el,
        iterations=iterations, converged=converged,
        normalization=total_scale, history=tuple(history), message=message,
    )


# ----------------------------------------------------------------------
# uniqueness probing


def _normalized_h(grid: SphereGrid, result: SolveResult) -> np.ndarray:
    h = result.body.support(grid.nodes)
    n = grid.n
    bg = evaluate_on_grid(result.body, grid)
    V = float(grid.weights @ bg.vk_density)
    return h * V ** (-1.0 / n)


def uniqueness_probe(bodyK: BodyEvaluator, p: float, n_starts: int, seed: int,
                     grid: SphereGrid | None = None,
                     options: SolveOptions | None = None) -> dict:
    """Minimize from several random feasible starts with mu = S_p K and
    cluster the minimizers up to scaling.

    One cluster is evidence of (not proof of) a unique minimizer."""
    opts = options or SolveOptions()
    if grid is None:
        raise ValueError("grid required")
    bg = evaluate_on_grid(bodyK, grid)
    mu = TargetMeasure.from_body(bg, p)
    model = _EvenModel(grid, opts.band)
    rng = np.random.default_rng(seed)

    results = []
    for _ in range(n_starts):
        c = model.ball_coeffs()
        pert = rng.normal(size=model.basis.size) * np.exp(-0.7 * model.basis.degrees)
        pert[~model.even] = 0.0
        pert[0] = 0.0
        scale = 0.3
        for _ in range(20):
            cand = c + scale * pert
            _, _, det, mn = model.geometry(cand)
            if det is not None and mn > 1e-4:
                c = cand
                break
            scale *= 0.5
        results.append(minimize(mu, p, init=c, options=opts))

    hs = [_normalized_h(grid, r) for r in results]
    k = len(hs)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            d = np.abs(hs[i] - hs[j]).max() / np.mean(hs[i])
            dist[i, j] = dist[j, i] = d

    # single-linkage clustering at threshold 1e-2
    labels = -np.ones(k, dtype=int)
    cluster = 0
    for i in range(k):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = cluster
        while stack:
            a = stack.pop()
            for b in range(k):
                if labels[b] < 0 and dist[a, b] <= 1e-2:
                    labels[b] = cluster
                    stack.append(b)
        cluster += 1
    return {
        "clusters": int(cluster),
        "labels": [int(v) for v in labels],
        "pairwise_sup_distances": dist,
        "results": results,
    }


# ----------------------------------------------------------------------
# the L^p-Minkowski inequality


def minkowski_inequality_gap(bgK: BodyOnGrid, bgL: BodyOnGrid, p: float) -> float:
    """LHS - RHS of the even L^p-Minkowski inequality (log form at p = 0);
    nonnegative when the inequality holds."""
    if bgK.grid is not bgL.grid:
        raise ValueError("bodies must share a grid")
    w = bgK.grid.weights
    n = bgK.grid.n
    VK = float(w @ bgK.vk_density)
    VL = float(w @ bgL.vk_density)
    if p == 0:
        lhs = float(w @ (bgK.vk_density * np.log(bgL.h / bgK.h))) / VK
        return lhs - np.log(VL / VK) / n
    spK = bgK.h ** (1.0 - p) * bgK.sk_density
    lhs = float(w @ (spK * bgL.h**p)) / p
    rhs = n / p * VK ** (1.0 - p / n) * VL ** (p / n)
    return lhs - rhs
