"""Origin-symmetric strongly convex bodies represented by support functions.

A body is an evaluator for its 1-homogeneous support function h with ambient
gradient and Hessian access (closed-form where the family allows it, finite
differences otherwise).  Grid sampling is a view: linear images, Firey sums
and polars compose evaluators exactly, without resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from calab.sphere import (
    HarmonicBasis,
    SphereGrid,
    build_grid,
    tangential_eigenvalues,
)


@dataclass(frozen=True)
class Tolerances:
    derivative_step: float = 1e-5
    eig_tol: float = 1e-12
    quad_tol: float = 1e-10

    def __post_init__(self):
        if min(self.derivative_step, self.eig_tol, self.quad_tol) <= 0:
            raise ValueError("tolerances must be positive")


def _as_points(X, n):
    pts = np.atleast_2d(np.asarray(X, dtype=float))
    if pts.shape[1] != n:
        raise ValueError(f"expected points in R^{n}")
    return pts


class BodyEvaluator:
    """Base class: positive 1-homogeneous support function with derivatives.

    Subclasses implement support(); support_grad()/support_hess() default to
    finite differences (Richardson-extrapolated central differences, with the
    Euler identity and radial annihilation enforced on the results).
    """

    def __init__(self, n: int, even: bool = True, label: str = ""):
        self.n = n
        self.even = even
        self.label = label

    # -- interface ------------------------------------------------------
    def support(self, X) -> np.ndarray:
        raise NotImplementedError

    def support_grad(self, X) -> np.ndarray:
        return self._fd_grad(X)

    def support_hess(self, X) -> np.ndarray:
        return self._fd_hess(X)

    def gauge_body(self) -> "BodyEvaluator | None":
        """Closed-form evaluator for the Minkowski gauge ||.||_K, if known."""
        return None

    # -- finite-difference fallbacks -------------------------------------
    def _fd_grad(self, X, step: float = 1e-5) -> np.ndarray:
        pts = _as_points(X, self.n)

        def g(h):
            out = np.empty_like(pts)
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = h
                out[:, j] = (self.support(pts + e) - self.support(pts - e)) / (2 * h)
            return out

        grad = (4.0 * g(step / 2.0) - g(step)) / 3.0
        # enforce the Euler identity <x, grad> = h exactly
        r2 = np.einsum("ij,ij->i", pts, pts)
        rad = np.einsum("ij,ij->i", grad, pts)
        corr = (self.support(pts) - rad) / r2
        return grad + corr[:, None] * pts

    def _fd_hess(self, X, step: float = 1e-4) -> np.ndarray:
        pts = _as_points(X, self.n)
        H = np.empty((len(pts), self.n, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = step
            H[:, :, j] = (self.support_grad(pts + e) - self.support_grad(pts - e)) / (
                2 * step
            )
        H = 0.5 * (H + H.transpose(0, 2, 1))
        # the Hessian of a 1-homogeneous function annihilates the position
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        u = pts / r
        proj = np.eye(self.n)[None] - u[:, :, None] * u[:, None, :]
        return np.einsum("iab,ibc,icd->iad", proj, H, proj)


# ----------------------------------------------------------------------
# concrete families


class BallBody(BodyEvaluator):
    def __init__(self, r: float, n: int):
        if r <= 0:
            raise ValueError("radius must be positive")
        super().__init__(n, even=True, label=f"ball({r})")
        self.r = float(r)

    def support(self, X):
        return self.r * np.linalg.norm(_as_points(X, self.n), axis=1)

    def support_grad(self, X):
        pts = _as_points(X, self.n)
        return self.r * pts / np.linalg.norm(pts, axis=1, keepdims=True)

    def support_hess(self, X):
        pts = _as_points(X, self.n)
        r = np.linalg.norm(pts, axis=1)
        u = pts / r[:, None]
        proj = np.eye(self.n)[None] - u[:, :, None] * u[:, None, :]
        return (self.r / r)[:, None, None] * proj

    def gauge_body(self):
        return BallBody(1.0 / self.r, self.n)


class EllipsoidBody(BodyEvaluator):
    """K = A(B_2^n) for symmetric positive-definite A; h(x) = |A x|."""

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        if np.abs(A - A.T).max() > 1e-12 * max(np.abs(A).max(), 1.0):
            raise ValueError("A must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("A must be positive-definite")
        super().__init__(A.shape[0], even=True, label="ellipsoid")
        self.A = A
        self._A2 = A @ A

    def support(self, X):
        pts = _as_points(X, self.n)
        return np.linalg.norm(pts @ self.A.T, axis=1)

    def support_grad(self, X):
        pts = _as_points(X, self.n)
        h = self.support(pts)
        return (pts @ self._A2.T) / h[:, None]

    def support_hess(self, X):
        pts = _as_points(X, self.n)
        h = self.support(pts)
        w = pts @ self._A2.T
        return (
            self._A2[None, :, :] / h[:, None, None]
            - w[:, :, None] * w[:, None, :] / h[:, None, None] ** 3
        )

    def gauge_body(self):
        return EllipsoidBody(np.linalg.inv(self.A))


class SpectralBody(BodyEvaluator):
    """h restricted to the sphere is a band-limited harmonic expansion."""

    def __init__(self, n: int, coeffs: np.ndarray, basis: HarmonicBasis | None = None,
                 label: str = "spectral"):
        coeffs = np.asarray(coeffs, dtype=float)
        if basis is None:
            raise ValueError("basis required")
        if len(coeffs) != basis.size:
            raise ValueError("coefficient length does not match basis")
        even = bool(np.all(coeffs[basis.parity < 0] == 0.0))
        super().__init__(n, even=even, label=label)
        self.basis = basis
        self.coeffs = coeffs

    def _restriction(self, pts, order):
        u = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        B, G, H = self.basis.eval_derivs(u, order=order)
        f = B @ self.coeffs
        gf = np.einsum("iak,a->ik", G, self.coeffs) if order >= 1 else None
        hf = np.einsum("iakl,a->ikl", H, self.coeffs) if order >= 2 else None
        return u, f, gf, hf

    def support(self, X):
        pts = _as_points(X, self.n)
        _, f, _, _ = self._restriction(pts, 0)
        return np.linalg.norm(pts, axis=1) * f

    def support_grad(self, X):
        pts = _as_points(X, self.n)
        u, f, gf, _ = self._restriction(pts, 1)
        return gf + f[:, None] * u

    def support_hess(self, X):
        pts = _as_points(X, self.n)
        r = np.linalg.norm(pts, axis=1)
        u, f, _, hf = self._restriction(pts, 2)
        proj = np.eye(self.n)[None] - u[:, :, None] * u[:, None, :]
        return (hf + f[:, None, None] * proj) / r[:, None, None]


class LinearImageBody(BodyEvaluator):
    """T(K) for invertible T; h'(u) = h(T^t u), exact composition."""

    def __init__(self, base: BodyEvaluator, T: np.ndarray):
        T = np.asarray(T, dtype=float)
        if T.shape != (base.n, base.n):
            raise ValueError("shape mismatch")
        if abs(np.linalg.det(T)) < 1e-14:
            raise ValueError("singular linear map")
        super().__init__(base.n, even=base.even, label=f"{base.label}@T")
        self.base = base
        self.T = T

    def support(self, X):
        return self.base.support(_as_points(X, self.n) @ self.T)

    def support_grad(self, X):
        return self.base.support_grad(_as_points(X, self.n) @ self.T) @ self.T.T

    def support_hess(self, X):
        H = self.base.support_hess(_as_points(X, self.n) @ self.T)
        return np.einsum("ab,ibc,dc->iad", self.T, H, self.T)

    def gauge_body(self):
        gb = self.base.gauge_body()
        if gb is None:
            return None
        return LinearImageBody(gb, np.linalg.inv(self.T).T)


class FireySumBody(BodyEvaluator):
    """Candidate support function (a h_K^p + b h_L^p)^(1/p); h_K^a h_L^b at p=0.

    For p < 1 the result may fail convexity; validity is reported by
    evaluate_on_grid, not repaired here.
    """

    def __init__(self, a: float, K: BodyEvaluator, b: float, L: BodyEvaluator,
                 p: float):
        if K.n != L.n:
            raise ValueError("dimension mismatch")
        if a < 0 or b < 0:
            raise ValueError("weights must be nonnegative")
        if p == 0 and abs(a + b - 1.0) > 1e-12:
            raise ValueError("p=0 requires a + b = 1")
        super().__init__(K.n, even=K.even and L.even, label=f"firey(p={p})")
        self.a, self.b, self.p = float(a), float(b), float(p)
        self.K, self.L = K, L

    def support(self, X):
        u, v = self.K.support(X), self.L.support(X)
        if self.p == 0:
            return u**self.a * v**self.b
        return (self.a * u**self.p + self.b * v**self.p) ** (1.0 / self.p)

    def support_grad(self, X):
        u, v = self.K.support(X), self.L.support(X)
        du, dv = self.K.support_grad(X), self.L.support_grad(X)
        if self.p == 0:
            F = u**self.a * v**self.b
            return F[:, None] * (self.a * du / u[:, None] + self.b * dv / v[:, None])
        p = self.p
        F = (self.a * u**p + self.b * v**p) ** (1.0 / p)
        G = self.a * u ** (p - 1.0) * du.T + self.b * v ** (p - 1.0) * dv.T
        return (F ** (1.0 - p) * G).T

    def support_hess(self, X):
        u, v = self.K.support(X), self.L.support(X)
        du, dv = self.K.support_grad(X), self.L.support_grad(X)
        Hu, Hv = self.K.support_hess(X), self.L.support_hess(X)
        a, b, p = self.a, self.b, self.p
        if p == 0:
            F = u**a * v**b
            W = a * du / u[:, None] + b * dv / v[:, None]
            out = F[:, None, None] * (W[:, :, None] * W[:, None, :])
            out += F[:, None, None] * (
                a * Hu / u[:, None, None]
                - a * du[:, :, None] * du[:, None, :] / u[:, None, None] ** 2
                + b * Hv / v[:, None, None]
                - b * dv[:, :, None] * dv[:, None, :] / v[:, None, None] ** 2
            )
            return out
        F = (a * u**p + b * v**p) ** (1.0 / p)
        G = (a * u ** (p - 1.0))[:, None] * du + (b * v ** (p - 1.0))[:, None] * dv
        out = (1.0 - p) * (F ** (1.0 - 2.0 * p))[:, None, None] * (
            G[:, :, None] * G[:, None, :]
        )
        inner = (
            (a * (p - 1.0) * u ** (p - 2.0))[:, None, None]
            * (du[:, :, None] * du[:, None, :])
            + (a * u ** (p - 1.0))[:, None, None] * Hu
            + (b * (p - 1.0) * v ** (p - 2.0))[:, None, None]
            * (dv[:, :, None] * dv[:, None, :])
            + (b * v ** (p - 1.0))[:, None, None] * Hv
        )
        out += (F ** (1.0 - p))[:, None, None] * inner
        return out


class LqNormBody(BodyEvaluator):
    """h(x) = ||x||_q for even integer q >= 4 (support function of the
    unit l_{q'} ball); closed-form derivatives, smooth away from the origin."""

    def __init__(self, q: int, n: int):
        if q < 4 or q % 2 != 0:
            raise ValueError("q must be an even integer >= 4")
        super().__init__(n, even=True, label=f"l{q}-norm")
        self.q = q

    def support(self, X):
        pts = _as_points(X, self.n)
        return (pts**self.q).sum(axis=1) ** (1.0 / self.q)

    def support_grad(self, X):
        pts = _as_points(X, self.n)
        h = self.support(pts)
        return pts ** (self.q - 1) / h[:, None] ** (self.q - 1)

    def support_hess(self, X):
        pts = _as_points(X, self.n)
        q = self.q
        h = self.support(pts)
        w = pts ** (q - 1)
        diag = (q - 1) * pts ** (q - 2) / h[:, None] ** (q - 1)
        out = np.zeros((len(pts), self.n, self.n))
        idx = np.arange(self.n)
        out[:, idx, idx] = diag
        out -= (q - 1) * (w[:, :, None] * w[:, None, :]) / h[:, None, None] ** (
            2 * q - 1
        )
        return out


class PolarBody(BodyEvaluator):
    """Numeric polar: h_{K deg}(u) = sup over directions of <u, theta>/h(theta).

    The supremum is seeded by the best node of a reference grid and refined by
    10 projected-gradient ascent steps plus a short Newton polish on the
    sphere.  The gradient of the result is envelope-exact (= maximizer point
    on the boundary of the polar); the Hessian is differenced from it.
    """

    _PG_STEPS = 10
    _NEWTON_STEPS = 4

    def __init__(self, base: BodyEvaluator, grid: SphereGrid):
        super().__init__(base.n, even=base.even, label=f"polar({base.label})")
        self.base = base
        self._ref_nodes = grid.nodes
        self._ref_h = base.support(grid.nodes)
        self._cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    # -- maximizer of <u, theta>/h(theta) over unit theta ----------------
    def _psi(self, U, TH):
        return np.einsum("ij,ij->i", U, TH) / self.base.support(TH)

    def _psi_grad(self, U, TH):
        h = self.base.support(TH)
        dh = self.base.support_grad(TH)
        g = U / h[:, None] - (np.einsum("ij,ij->i", U, TH) / h**2)[:, None] * dh
        g -= np.einsum("ij,ij->i", g, TH)[:, None] * TH
        return g

    def _maximize(self, U, warm_start: np.ndarray | None = None):
        if warm_start is None:
            key = U.tobytes()
            hit = self._cache.get(key)
            if hit is not None:
                return hit
            scores = (U @ self._ref_nodes.T) / self._ref_h[None, :]
            th = self._ref_nodes[np.argmax(scores, axis=1)].copy()
            val = self._psi(U, th)
            step = np.full(len(U), 0.2)
            for _ in range(self._PG_STEPS):
                g = self._psi_grad(U, th)
                cand = th + step[:, None] * g
                cand /= np.linalg.norm(cand, axis=1, keepdims=True)
                cval = self._psi(U, cand)
                ok = cval >= val
                th[ok] = cand[ok]
                val[ok] = cval[ok]
                step = np.where(ok, step * 1.5, step * 0.4)
        else:
            th = warm_start.copy()
            val = self._psi(U, th)
        th, val = self._newton(U, th, val)
        if warm_start is None:
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[key] = (th, val)
        return th, val

    def _newton(self, U, th, val):
        n = self.n
        for _ in range(self._NEWTON_STEPS):
            h = self.base.support(th)
            dh = self.base.support_grad(th)
            Hh = self.base.support_hess(th)
            ut = np.einsum("ij,ij->i", U, th)
            # ambient Hessian of the 0-homogeneous objective psi
            cross = U[:, :, None] * dh[:, None, :]
            Hpsi = (
                -(cross + cross.transpose(0, 2, 1)) / h[:, None, None] ** 2
                - Hh * (ut / h**2)[:, None, None]
                + 2.0 * (ut / h**3)[:, None, None] * (dh[:, :, None] * dh[:, None, :])
            )
            # frame per point (rows orthonormal, orthogonal to th)
            frames = _tangent_frames(th)
            g = self._psi_grad(U, th)
            gf = np.einsum("ikq,ik->iq", frames, g)
            Hf = np.einsum("ikq,ikl,ilr->iqr", frames, Hpsi, frames)
            # Newton step, guarded to stay an ascent step
            lam = np.linalg.eigvalsh(Hf).max(axis=1)
            shift = np.maximum(lam + 1e-9, 0.0)
            Hf -= (shift + 1e-12)[:, None, None] * np.eye(n - 1)[None]
            s = -np.linalg.solve(Hf, gf[:, :, None])[:, :, 0]
            norm = np.linalg.norm(s, axis=1)
            s *= (np.minimum(norm, 0.2) / np.maximum(norm, 1e-300))[:, None]
            cand = th + np.einsum("ikq,iq->ik", frames, s)
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            cval = self._psi(U, cand)
            ok = cval >= val
            th[ok] = cand[ok]
            val[ok] = cval[ok]
        return th, val

    # -- evaluator interface ----------------------------------------------
    def support(self, X):
        pts = _as_points(X, self.n)
        r = np.linalg.norm(pts, axis=1)
        _, val = self._maximize(pts / r[:, None])
        return r * val

    def support_grad(self, X):
        pts = _as_points(X, self.n)
        r = np.linalg.norm(pts, axis=1)
        th, _ = self._maximize(pts / r[:, None])
        return th / self.base.support(th)[:, None]

    def support_hess(self, X, step: float = 1e-4):
        # difference the envelope gradient, warm-starting the maximizer at
        # each shifted point from the unshifted one (Newton-only refinement)
        pts = _as_points(X, self.n)
        r = np.linalg.norm(pts, axis=1)
        U = pts / r[:, None]
        th0, _ = self._maximize(U)
        H = np.empty((len(U), self.n, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = step
            gp = self._envelope_grad(U + e, th0)
            gm = self._envelope_grad(U - e, th0)
            H[:, :, j] = (gp - gm) / (2.0 * step)
        H = 0.5 * (H + H.transpose(0, 2, 1))
        proj = np.eye(self.n)[None] - U[:, :, None] * U[:, None, :]
        H = np.einsum("iab,ibc,icd->iad", proj, H, proj)
        return H / r[:, None, None]

    def _envelope_grad(self, X, warm_start):
        U = X / np.linalg.norm(X, axis=1, keepdims=True)
        th, _ = self._maximize(U, warm_start=warm_start)
        return th / self.base.support(th)[:, None]


def _tangent_frames(points: np.ndarray) -> np.ndarray:
    """Orthonormal tangent frames at unit points, shape (P, n, n-1).

    Householder completion of the point direction (vectorized)."""
    pts = np.atleast_2d(points)
    P, n = pts.shape
    v = pts.copy()
    v[:, 0] += np.where(pts[:, 0] < 0.99, -1.0, 1.0)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.eye(n)[None, :, 1:] - 2.0 * v[:, :, None] * v[:, None, 1:]


# ----------------------------------------------------------------------
# constructors


def ball(r: float, n: int) -> BodyEvaluator:
    return BallBody(r, n)


def ellipsoid(A) -> BodyEvaluator:
    return EllipsoidBody(np.asarray(A, dtype=float))


def _coeff_vector(n: int, entries, basis: HarmonicBasis) -> np.ndarray:
    """Coefficient vector from (degree, order, value) triples.

    n=2: order 0 = cos(k t), 1 = sin(k t).  n=3: order m in [-l, l], with
    m > 0 the cos-type and m < 0 the sin-type real harmonic.
    """
    c = np.zeros(basis.size)
    for deg, order, val in entries:
        if n == 2:
            if deg == 0:
                c[0] += val
                continue
            idx = 1 + 2 * (deg - 1) + order
        else:
            if abs(order) > deg:
                raise ValueError("order exceeds degree")
            base = deg**2  # functions of degree < deg
            if order == 0:
                idx = base
            elif order > 0:
                idx = base + 2 * order - 1
            else:
                idx = base - 2 * order
        c[idx] += val
    return c


# canonical mix: curvature pinching of perturbed_ball(n, 0.1) stays well
# inside strong convexity (min eig D^2 h ~ 0.4-0.6), so polars stay resolvable
_DEFAULT_PERTURBATION = {
    2: [(2, 0, 1.0), (4, 0, 0.35), (6, 1, 0.12)],
    3: [(2, 0, 1.0), (2, 2, 0.5), (4, 1, 0.25), (6, -3, 0.1)],
}


def perturbed_ball(n: int, eps: float, coeffs=None) -> BodyEvaluator:
    """h = 1 + eps * (even-harmonic combination); eps = 0 gives the unit ball."""
    if coeffs is None:
        coeffs = _DEFAULT_PERTURBATION[n]
    degs = [c[0] for c in coeffs]
    if any(d % 2 != 0 for d in degs):
        raise ValueError("perturbation must use even degrees")
    band = max(degs) if degs else 2
    basis = HarmonicBasis(n, band)
    c = eps * _coeff_vector(n, coeffs, basis)
    c[0] += 1.0 / basis.eval(np.eye(n)[:1])[0, 0]  # constant term = 1
    return SpectralBody(n, c, basis, label=f"perturbed_ball(eps={eps})")


def random_even_body(n: int, seed: int, budget: int = 32, band: int = 8,
                     strength: float = 0.3) -> BodyEvaluator:
    """Random valid origin-symmetric body; rejection-samples until D^2 h > 0."""
    rng = np.random.default_rng(seed)
    basis = HarmonicBasis(n, band)
    check_grid = build_grid(n, max(2 * band, 8))
    even_pert = (basis.parity > 0) & (basis.degrees > 0)
    for trial in range(budget):
        c = np.zeros(basis.size)
        amp = rng.normal(size=int(even_pert.sum()))
        decay = np.exp(-0.5 * basis.degrees[even_pert])
        c[even_pert] = strength * amp * decay / np.sqrt(even_pert.sum())
        c[0] = 1.0 / basis.eval(np.eye(n)[:1])[0, 0]
        body = SpectralBody(n, c, basis, label=f"random(seed={seed},try={trial})")
        try:
            bg = evaluate_on_grid(body, check_grid)
        except ValueError:  # h <= 0 somewhere: reject the draw
            continue
        if bg.valid:
            return body
    raise RuntimeError(f"rejection budget exhausted after {budget} draws")


def lq_gauge_body(q: int, n: int) -> BodyEvaluator:
    """The unit l_q ball (gauge ||.||_q); its support function is the dual norm.

    Not strongly convex as given (curvature degenerates on the axes); used as
    a rough input for the smoothing construction, which only needs its gauge.
    """

    class _LqBall(BodyEvaluator):
        def __init__(self):
            super().__init__(n, even=True, label=f"l{q}-ball")
            qd = q / (q - 1)
            self._qd = qd

        def support(self, X):
            pts = _as_points(X, self.n)
            return (np.abs(pts) ** self._qd).sum(axis=1) ** (1.0 / self._qd)

        def gauge_body(self):
            return LqNormBody(q, n)

    return _LqBall()


def linear_image(body: BodyEvaluator, T) -> BodyEvaluator:
    return LinearImageBody(body, np.asarray(T, dtype=float))


def firey_sum(a: float, bodyK: BodyEvaluator, b: float, bodyL: BodyEvaluator,
              p: float) -> BodyEvaluator:
    return FireySumBody(a, bodyK, b, bodyL, p)


def polar(body: BodyEvaluator, grid: SphereGrid) -> BodyEvaluator:
    return PolarBody(body, grid)


# ----------------------------------------------------------------------
# grid evaluation


@dataclass(frozen=True)
class BodyOnGrid:
    body: BodyEvaluator
    grid: SphereGrid
    h: np.ndarray            # support values per node
    x: np.ndarray            # boundary points (ambient gradient of h)
    D2h: np.ndarray          # tangential Hessian of h, ambient matrices
    g: np.ndarray            # centro-affine metric D2h / h
    sk_density: np.ndarray   # det of D2h on the tangent space
    vk_density: np.ndarray   # cone-volume density h * sk / n
    eig_D2h: np.ndarray      # per-node tangential eigenvalues, (N, n-1)
    min_eig_D2h: float
    max_eig_D2h: float
    valid: bool
    tol: Tolerances = field(default_factory=Tolerances)

    @property
    def n(self) -> int:
        return self.grid.n


def evaluate_on_grid(body: BodyEvaluator, grid: SphereGrid,
                     tol: Tolerances = Tolerances()) -> BodyOnGrid:
    """Sample a body on a grid and populate the derived geometric state."""
    if body.n != grid.n:
        raise ValueError("body/grid dimension mismatch")
    nodes = grid.nodes
    h = body.support(nodes)
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ValueError("support function must be positive and finite on the grid")
    x = body.support_grad(nodes)
    H = body.support_hess(nodes)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(H))):
        raise ValueError("non-finite derivative on the grid")
    proj = np.eye(grid.n)[None] - nodes[:, :, None] * nodes[:, None, :]
    D2h = np.einsum("iab,ibc,icd->iad", proj, H, proj)
    D2h = 0.5 * (D2h + D2h.transpose(0, 2, 1))
    g = D2h / h[:, None, None]
    # tangential determinant: pad the radial kernel direction with 1
    padded = D2h + nodes[:, :, None] * nodes[:, None, :]
    sk = np.linalg.det(padded)
    vk = h * sk / grid.n
    eig = tangential_eigenvalues(grid, D2h)
    mn, mx = float(eig.min()), float(eig.max())
    return BodyOnGrid(
        body=body, grid=grid, h=h, x=x, D2h=D2h, g=g,
        sk_density=sk, vk_density=vk, eig_D2h=eig,
        min_eig_D2h=mn, max_eig_D2h=mx, valid=bool(mn > tol.eig_tol), tol=tol,
    )


# ----------------------------------------------------------------------
# scalar quantities


@dataclass(frozen=True)
class Quantities:
    volume: float
    sp_total: float
    omega_n: float
    r_in: float
    R_out: float
    polar_volume: float


def quantities(bg: BodyOnGrid, p: float = 1.0) -> Quantities:
    """Volume, total L^p surface area, centro-affine surface area, and the
    origin-symmetric sandwich radii r_in <= h <= R_out."""
    if not bg.valid:
        raise ValueError("body is not strongly convex on the grid")
    w = bg.grid.weights
    n = bg.grid.n
    volume = float(w @ bg.vk_density)
    sp_total = float(w @ (bg.h ** (1.0 - p) * bg.sk_density))
    omega = float(w @ np.sqrt(bg.sk_density / bg.h ** (n - 1))) / n
    polar_volume = float(w @ bg.h ** (-n)) / n
    return Quantities(
        volume=volume,
        sp_total=sp_total,
        omega_n=omega,
        r_in=float(bg.h.min()),
        R_out=float(bg.h.max()),
        polar_volume=polar_volume,
    )


def body_to_json(body: BodyEvaluator) -> dict:
    return {"label": body.label, "dimension": body.n, "even": body.even}


def body_on_grid_to_csv(bg: BodyOnGrid, path) -> None:
    cols = ["index"] + ["x", "y", "z"][: bg.grid.n] + [
        "h", "sk_density", "vk_density", "min_eig", "valid",
    ]
    mn = bg.eig_D2h.min(axis=1)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i, (pnt, hv, sk, vk, m) in enumerate(
            zip(bg.grid.nodes, bg.h, bg.sk_density, bg.vk_density, mn)
        ):
            coords = ",".join(repr(float(c)) for c in pnt)
            fh.write(f"{i},{coords},{float(hv)!r},{float(sk)!r},{float(vk)!r},"
                     f"{float(m)!r},{int(m > 0)}\n")
