"""Galerkin discretization and spectrum of the Hilbert-Brunn-Minkowski operator.

The operator is discretized in the grid's global harmonic basis; stiffness,
mass, and conjugate-Hessian forms are assembled against the primal volume
density h det(D^2 h).  The generalized eigenproblem is dense symmetric
definite; even spectra deflate the constant by mass-orthogonal projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from calab.bodies import BodyEvaluator, evaluate_on_grid, linear_image
from calab.calculus import (
    CentroAffineState,
    adapted_linear,
    build_state,
    grad_norm_sq,
    hbm_apply,
    hess_norm_sq,
)
from calab.sphere import ScalarField, SphereGrid, analyze


@dataclass(frozen=True)
class GalerkinBasis:
    """Selection of grid basis functions used as trial/test space."""

    grid: SphereGrid
    degree_max: int
    parity: str = "all"          # 'all' or 'even-only'
    include_constant: bool = True
    selection: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.parity not in ("all", "even-only"):
            raise ValueError("parity must be 'all' or 'even-only'")
        if self.degree_max > self.grid.band_limit:
            raise ValueError("basis band limit exceeds grid band limit")
        degs = self.grid.basis.degrees
        keep = degs <= self.degree_max
        if self.parity == "even-only":
            keep &= self.grid.basis.parity > 0
        if not self.include_constant:
            keep &= degs > 0
        object.__setattr__(self, "selection", np.flatnonzero(keep))

    @property
    def size(self) -> int:
        return len(self.selection)

    @property
    def degrees(self) -> np.ndarray:
        return self.grid.basis.degrees[self.selection]

    @property
    def parities(self) -> np.ndarray:
        return self.grid.basis.parity[self.selection]


@dataclass(frozen=True)
class GalerkinSystem:
    basis: GalerkinBasis
    stiffness: np.ndarray   # Dirichlet form of the operator against nu
    mass: np.ndarray        # L^2(nu) Gram matrix
    hessform: np.ndarray    # conjugate-Hessian form against nu


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    multiplicities: list[tuple[float, int]]   # (cluster value, count)
    lambda1: float | None
    lambda1_even: float | None
    eigenvectors: np.ndarray                  # columns, basis coefficients
    residuals: np.ndarray
    subspace: str

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "multiplicities": [[float(v), int(m)] for v, m in self.multiplicities],
            "lambda1": None if self.lambda1 is None else float(self.lambda1),
            "lambda1_even": None if self.lambda1_even is None
            else float(self.lambda1_even),
            "max_residual": float(self.residuals.max()) if len(self.residuals)
            else 0.0,
            "subspace": self.subspace,
        }


# ----------------------------------------------------------------------
# assembly


def _metric_factor(state: CentroAffineState) -> np.ndarray:
    """Per-node factor F with g^{-1} = F F^t (PSD, rank n-1)."""
    lam, V = np.linalg.eigh(state.ginv)
    lam = np.clip(lam, 0.0, None)
    return V * np.sqrt(lam)[:, None, :]


def assemble(state: CentroAffineState, basis: GalerkinBasis) -> GalerkinSystem:
    """Stiffness, mass, and Hessian-form matrices of the operator."""
    if basis.grid is not state.grid:
        raise ValueError("basis and state must share a grid")
    grid = state.grid
    B, G, H = grid.basis_tables()
    sel = basis.selection
    B = B[:, sel]
    G = G[:, sel, :]
    H = H[:, sel, :, :]
    rho = grid.weights * state.nu_density
    sq = np.sqrt(rho)

    F = _metric_factor(state)
    # stiffness: sum_i rho_i <F^t grad_a, F^t grad_b>
    T = np.einsum("ikq,iak->iaq", F, G) * sq[:, None, None]
    nb = basis.size
    S = np.einsum("iaq,ibq->ab", T, T)

    M = (B * rho[:, None]).T @ B

    # conjugate Hessian of each basis function, then the g-inner product
    glh = state.log_h_gradient.vectors
    cross = glh[:, None, :, None] * G[:, :, None, :]
    Hs = H + cross + cross.transpose(0, 1, 3, 2)
    D = np.einsum("ikq,iakl,ilr->iaqr", F, Hs, F) * sq[:, None, None, None]
    D = D.reshape(len(rho), nb, -1)
    Hmat = np.einsum("iam,ibm->ab", D, D)

    S = 0.5 * (S + S.T)
    M = 0.5 * (M + M.T)
    Hmat = 0.5 * (Hmat + Hmat.T)
    return GalerkinSystem(basis=basis, stiffness=S, mass=M, hessform=Hmat)


# ----------------------------------------------------------------------
# eigen solves


def _cluster(eigs: np.ndarray) -> list[tuple[float, int]]:
    """Group eigenvalues within max(1e-6, 1e-3 * value) of the cluster head."""
    out: list[tuple[float, int]] = []
    i = 0
    while i < len(eigs):
        head = eigs[i]
        tol = max(1e-6, 1e-3 * abs(head))
        j = i
        while j < len(eigs) and abs(eigs[j] - head) <= tol:
            j += 1
        out.append((float(np.mean(eigs[i:j])), j - i))
        i = j
    return out


def _even_nonconstant_subspace(system: GalerkinSystem):
    """(column indices of even functions, projector Z onto the mass-orthogonal
    complement of the constant within them)."""
    basis = system.basis
    even_cols = np.flatnonzero(basis.parities > 0)
    if len(even_cols) == 0:
        raise ValueError("basis has no even functions")
    degs = basis.degrees[even_cols]
    Me = system.mass[np.ix_(even_cols, even_cols)]
    const_pos = np.flatnonzero(degs == 0)
    if len(const_pos) == 0:
        return even_cols, np.eye(len(even_cols))
    c0 = np.zeros(len(even_cols))
    c0[const_pos[0]] = 1.0
    w = Me @ c0
    Z = scipy.linalg.null_space(w[None, :])
    return even_cols, Z


def _zero_tol(eigs: np.ndarray) -> float:
    scale = max(abs(eigs[-1]), 1.0) if len(eigs) else 1.0
    return 1e-6 * scale


def solve_spectrum(system: GalerkinSystem, k: int | None = None,
                   subspace: str = "all") -> SpectrumReport:
    """k smallest generalized eigenpairs of (stiffness, mass).

    subspace 'all' solves on the full basis; 'even-nonconstant' restricts to
    even functions with the constant deflated mass-orthogonally.
    """
    S, M = system.stiffness, system.mass
    nb = system.basis.size
    if k is None:
        k = nb
    if k > nb:
        raise ValueError("k exceeds basis size")

    if subspace == "all":
        eigs, vecs = scipy.linalg.eigh(S, M)
    elif subspace == "even-nonconstant":
        cols, Z = _even_nonconstant_subspace(system)
        Sz = Z.T @ S[np.ix_(cols, cols)] @ Z
        Mz = Z.T @ M[np.ix_(cols, cols)] @ Z
        ez, vz = scipy.linalg.eigh(Sz, Mz)
        eigs = ez
        vecs = np.zeros((nb, len(ez)))
        vecs[cols] = Z @ vz
    else:
        raise ValueError(f"unknown subspace {subspace!r}")

    eigs = eigs[:k]
    vecs = vecs[:, :k]
    resid = np.linalg.norm(S @ vecs - M @ vecs * eigs[None, :], axis=0)
    resid /= np.maximum(np.linalg.norm(M @ vecs, axis=0), 1e-300)

    ztol = _zero_tol(eigs)
    nonzero = eigs[eigs > ztol]
    lambda1 = float(nonzero[0]) if len(nonzero) else None
    if subspace == "even-nonconstant":
        lambda1_even = float(eigs[0]) if len(eigs) else None
    else:
        lambda1_even = None
        has_even = (system.basis.parities > 0) & (system.basis.degrees > 0)
        if has_even.any():
            cols, Z = _even_nonconstant_subspace(system)
            Sz = Z.T @ S[np.ix_(cols, cols)] @ Z
            Mz = Z.T @ M[np.ix_(cols, cols)] @ Z
            ez = scipy.linalg.eigh(Sz, Mz, eigvals_only=True)
            lambda1_even = float(ez[0]) if len(ez) else None

    return SpectrumReport(
        eigenvalues=eigs,
        multiplicities=_cluster(eigs),
        lambda1=lambda1,
        lambda1_even=lambda1_even,
        eigenvectors=vecs,
        residuals=resid,
        subspace=subspace,
    )


def spectrum_of_body(body: BodyEvaluator, grid: SphereGrid,
                     degree_max: int | None = None, k: int | None = None,
                     subspace: str = "all") -> SpectrumReport:
    """One-call pipeline: grid evaluation, state, assembly, eigen solve."""
    Lb = grid.band_limit if degree_max is None else degree_max
    bg = evaluate_on_grid(body, grid)
    state = build_state(bg)
    basis = GalerkinBasis(grid, Lb)
    system = assemble(state, basis)
    return solve_spectrum(system, k=k, subspace=subspace)


# ----------------------------------------------------------------------
# identities and gaps


def bochner_residual(state: CentroAffineState, f: ScalarField) -> float:
    """Relative residual of the integrated identity
    int (Lf)^2 dnu = int ||Hess* f||^2 dnu + (n-2) int |grad f|^2 dnu."""
    w = state.grid.weights * state.nu_density
    lf = hbm_apply(state, f).values
    t1 = float(w @ lf**2)
    t2 = float(w @ hess_norm_sq(state, f))
    t3 = float((state.n - 2) * (w @ grad_norm_sq(state, f)))
    scale = max(abs(t1), abs(t2), abs(t3))
    if scale == 0.0:
        return 0.0
    return abs(t1 - t2 - t3) / scale


def discrete_bochner_residual(system: GalerkinSystem, k: int = 10,
                              subspace: str = "even-nonconstant") -> float:
    """Operator-level identity on the eigen-solve subspace: for eigenvectors v,
    v^t (S M^{-1} S) v - v^t H v matches (n-2) v^t S v up to quadrature error."""
    n = system.basis.grid.n
    rep = solve_spectrum(system, k=min(k, system.basis.size - 1),
                         subspace=subspace)
    V = rep.eigenvectors
    S, M, H = system.stiffness, system.mass, system.hessform
    SV = S @ V
    quad1 = np.einsum("ak,ak->k", SV, np.linalg.solve(M, SV))
    quad2 = np.einsum("ak,ak->k", V, H @ V)
    quad3 = np.einsum("ak,ak->k", V, SV)
    resid = np.abs(quad1 - quad2 - (n - 2) * quad3)
    scale = np.maximum(np.abs(quad1), 1e-300)
    return float((resid / scale).max())


def hessian_gap_even(system: GalerkinSystem) -> float:
    """Minimum of the Hessian-form Rayleigh quotient over even non-constant
    functions: min v^t H v / v^t S v."""
    cols, Z = _even_nonconstant_subspace(system)
    Hz = Z.T @ system.hessform[np.ix_(cols, cols)] @ Z
    Sz = Z.T @ system.stiffness[np.ix_(cols, cols)] @ Z
    if np.linalg.eigvalsh(Sz).min() <= 0:
        raise ValueError("stiffness is singular on the even non-constant subspace")
    eigs = scipy.linalg.eigh(Hz, Sz, eigvals_only=True)
    return float(eigs[0])


def first_eigenspace_deficiency(state: CentroAffineState,
                                system: GalerkinSystem) -> float:
    """How far the computed lambda_1 eigenvectors are from the span of the
    adapted linear functions <theta, xi>/h (subspace angle)."""
    rep = solve_spectrum(system, subspace="all")
    ztol = _zero_tol(rep.eigenvalues)
    lam1 = rep.lambda1
    tol = max(1e-6, 1e-3 * lam1)
    idx = np.flatnonzero(np.abs(rep.eigenvalues - lam1) <= tol)
    E = rep.eigenvectors[:, idx]

    n = state.n
    sel = system.basis.selection
    lin = []
    for kk in range(n):
        xi = np.zeros(n)
        xi[kk] = 1.0
        lin.append(analyze(adapted_linear(state, xi))[sel])
    Lmat = np.array(lin).T

    M = system.mass
    # M-orthonormalize both subspaces, then compare by principal angles
    def morth(A):
        G = A.T @ M @ A
        w, V = np.linalg.eigh(G)
        return A @ V / np.sqrt(np.maximum(w, 1e-300))[None, :]

    Eo, Lo = morth(E), morth(Lmat)
    sv = np.linalg.svd(Eo.T @ M @ Lo, compute_uv=False)
    return float(abs(1.0 - sv.min()))


def invariance_check(bodyK: BodyEvaluator, T: np.ndarray, grid: SphereGrid,
                     degree_max: int | None = None, count: int = 10) -> dict:
    """Spectra of K and T(K) computed independently and compared (sorted)."""
    repK = spectrum_of_body(bodyK, grid, degree_max, k=count)
    repT = spectrum_of_body(linear_image(bodyK, T), grid, degree_max, k=count)
    a, b = repK.eigenvalues[:count], repT.eigenvalues[:count]
    gaps = np.abs(a - b) / np.maximum(np.abs(a), 1.0)
    return {
        "eigenvalues_K": [float(v) for v in a],
        "eigenvalues_TK": [float(v) for v in b],
        "relative_gaps": [float(v) for v in gaps],
        "max_gap": float(gaps.max()),
    }
