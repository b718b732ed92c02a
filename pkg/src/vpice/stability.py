"""Linearization at constant equilibria, spectra and decay experiments.

At an equilibrium (0, h*, a*) with vanishing forcing, the linearized
evolution v' + A0 v = 0 uses

    A0 v = [ (1/(rho_ice h*)) A^H u + (dP*/dh / (2 rho_ice h*)) grad h
             + (dP*/da / (2 rho_ice h*)) grad a - c_cor (n x u),
             h* div(u) - d_h Lap_N h,
             a* div(u) - d_a Lap_N a ],

where A^H is the constant-coefficient velocity operator
-(P*/(2 sqrt(delta))) sum S_ij^kl d_k d_l u_j.  The constant-(h, a) vectors
with u = 0 span the discrete kernel exactly; for delta small enough every
other eigenvalue has positive real part, and unforced trajectories decay
toward the mean-value equilibrium at a rate set by the spectral gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dynamics import ForcingInputs, RunResult, StepperConfig, run
from .grid import FieldSet, Grid, diff_ops
from .operators import (
    SparseOperator,
    assemble_hibler,
    assemble_neumann_laplacian,
    divergence_matrix,
    gradient_coupling,
)
from .params import InvalidStateError, RheologyParams
from .rheology import pressure, pressure_derivatives

DENSE_EIG_BUDGET = 10_000


class BudgetExceededError(RuntimeError):
    """Dense eigensolve requested beyond the supported size."""


class DecayFitError(RuntimeError):
    """Too few samples in the asymptotic window to fit a decay rate."""


@dataclass(frozen=True)
class Equilibrium:
    """Constant equilibrium state (0, h*, a*)."""

    h_star: float
    a_star: float

    def validate(self, params: RheologyParams) -> "Equilibrium":
        if self.h_star < params.kappa:
            raise InvalidStateError(
                f"h* = {self.h_star!r} below kappa = {params.kappa!r}")
        if not 0.0 <= self.a_star <= 1.0:
            raise InvalidStateError(f"a* = {self.a_star!r} outside [0, 1]")
        return self

    def p_star(self, params: RheologyParams) -> float:
        return float(pressure(self.h_star, self.a_star, params))

    def state(self, grid: Grid) -> FieldSet:
        return FieldSet.constant(grid, self.h_star, self.a_star)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    spectral_gap: float
    tol_kernel: float
    spectral_radius: float
    eigenvectors: Optional[np.ndarray] = None


def weight_constants(eq: Equilibrium, params: RheologyParams) -> tuple:
    """Weights (C_h, C_a) of the equilibrium energy form.

    C_h = p* exp(-c (1 - a*)) / (2 h*); C_a = c P* / (2 a*) for a* > 0 and
    1 for a* = 0.
    """
    c_h = params.p_star * np.exp(-params.c * (1.0 - eq.a_star)) / (2.0 * eq.h_star)
    if eq.a_star > 0.0:
        c_a = params.c * eq.p_star(params) / (2.0 * eq.a_star)
    else:
        c_a = 1.0
    return float(c_h), float(c_a)


def assemble_A0(eq: Equilibrium, grid: Grid, params: RheologyParams) -> SparseOperator:
    """Linearized operator at the equilibrium (4N x 4N).

    Unlike the quasilinear block operator, A0 is not block triangular: the
    thickness and compactness rows carry h* div(u) and a* div(u) couplings
    from linearizing the advective fluxes.
    """
    eq.validate(params)
    n = grid.n_nodes
    v_star = eq.state(grid)

    hibler = assemble_hibler(v_star, grid, params, omega=0.0)
    interior = grid.interior_mask().ravel().astype(float)
    interior2 = np.concatenate([interior, interior])
    boundary2 = 1.0 - interior2
    inv_mass = interior2 / (params.rho_ice * eq.h_star)
    u_block = (sp.diags(inv_mass) @ hibler.matrix + sp.diags(boundary2)).tocsr()

    if params.c_cor != 0.0:
        # -c_cor (n x u) with n x u = (-u2, u1), interior rows only
        rot = sp.bmat([
            [None, sp.diags(params.c_cor * interior)],
            [sp.diags(-params.c_cor * interior), None],
        ], format="csr")
        u_block = (u_block + rot).tocsr()

    dp_dh, dp_da = pressure_derivatives(eq.h_star, eq.a_star, params)
    scale = 2.0 * params.rho_ice * eq.h_star
    ones = np.ones(n)
    c_h = gradient_coupling(grid, (dp_dh / scale) * ones)
    c_a = gradient_coupling(grid, (dp_da / scale) * ones)

    div = divergence_matrix(grid)
    lap_h = assemble_neumann_laplacian(grid, params.d_h).matrix
    lap_a = assemble_neumann_laplacian(grid, params.d_a).matrix

    zero_nn = sp.csr_matrix((n, n))
    matrix = sp.bmat([
        [u_block, c_h, c_a],
        [eq.h_star * div, lap_h, zero_nn],
        [eq.a_star * div, zero_nn, lap_a],
    ], format="csr")
    bnd = grid.boundary_mask().ravel()
    mask = np.concatenate([bnd, bnd, np.zeros(n, bool), np.zeros(n, bool)])
    return SparseOperator(matrix, (2 * n, n, n), mask, grid)


def kernel_basis(grid: Grid) -> np.ndarray:
    """The two constant-(h, a) vectors with u = 0, as unit columns."""
    n = grid.n_nodes
    basis = np.zeros((4 * n, 2))
    basis[2 * n:3 * n, 0] = 1.0 / np.sqrt(n)
    basis[3 * n:, 1] = 1.0 / np.sqrt(n)
    return basis


def spectrum(op: SparseOperator, interior_only: bool = True,
             want_vectors: bool = False) -> SpectrumReport:
    """Dense spectrum of the (interior-restricted) operator.

    interior_only drops Dirichlet rows and columns (the velocity boundary
    identity rows); thickness and compactness unknowns are always kept, so
    the constant kernel survives the restriction.  The kernel tolerance is
    1e-8 times the spectral radius; the spectral gap is the smallest real
    part outside the kernel ball.
    """
    keep = ~op.dirichlet_mask if interior_only else np.ones(op.dim, bool)
    size = int(np.sum(keep))
    if size > DENSE_EIG_BUDGET:
        raise BudgetExceededError(
            f"{size} unknowns exceed the dense eigensolve budget "
            f"{DENSE_EIG_BUDGET}")
    dense = op.matrix.toarray()[np.ix_(keep, keep)]
    if want_vectors:
        eigenvalues, vectors = sla.eig(dense)
    else:
        eigenvalues = sla.eigvals(dense)
        vectors = None
    radius = float(np.max(np.abs(eigenvalues))) if size else 0.0
    tol_kernel = 1e-8 * radius
    near_zero = np.abs(eigenvalues) <= tol_kernel
    kernel_dim = int(np.sum(near_zero))
    rest = eigenvalues[~near_zero]
    gap = float(np.min(rest.real)) if rest.size else np.inf
    return SpectrumReport(eigenvalues, kernel_dim, gap, tol_kernel, radius,
                          eigenvectors=vectors)


@dataclass
class SemisimplicityReport:
    kernel_dim: int
    basis_min_singular_value: float
    restriction_norm: float
    operator_norm: float


def semisimplicity_proxy(op: SparseOperator,
                         interior_only: bool = True) -> SemisimplicityReport:
    """Check the near-zero eigenvalues carry genuine eigenvectors.

    Collects the eigenvectors of eigenvalues inside the kernel ball, reports
    the smallest singular value of their normalized span (rank check) and
    the norm of the restriction of the operator to that span.
    """
    report = spectrum(op, interior_only=interior_only, want_vectors=True)
    near_zero = np.abs(report.eigenvalues) <= report.tol_kernel
    vecs = report.eigenvectors[:, near_zero]
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    svals = np.linalg.svd(vecs, compute_uv=False)
    keep = ~op.dirichlet_mask if interior_only else np.ones(op.dim, bool)
    dense = op.matrix.toarray()[np.ix_(keep, keep)]
    q, _ = np.linalg.qr(vecs)
    restriction = q.conj().T @ dense @ q
    op_norm = np.linalg.norm(dense, 2)
    return SemisimplicityReport(
        kernel_dim=int(np.sum(near_zero)),
        basis_min_singular_value=float(svals[-1]) if svals.size else 0.0,
        restriction_norm=float(np.linalg.norm(restriction, 2)),
        operator_norm=float(op_norm),
    )


def energy_identity_residual(op: SparseOperator, v: FieldSet, eq: Equilibrium,
                             params: RheologyParams) -> dict:
    """Termwise regrouping of the quadratic form of A0 against direct assembly.

    Evaluates every term of the discrete energy identity obtained by testing
    (lambda + A0) v = 0 with v at the Rayleigh quotient lambda, and returns
    the relative mismatch between sum-of-terms and the assembled form
    (contract: <= 1e-10) together with the term breakdown.
    """
    grid = v.grid
    v.validate(params)
    area = grid.cell_area
    vec = v.to_vector()
    n = grid.n_nodes
    u_vec = vec[:2 * n]
    h_vec = vec[2 * n:3 * n]
    a_vec = vec[3 * n:]

    assembled = area * float(vec @ (op.matrix @ vec))

    hibler = assemble_hibler(eq.state(grid), grid, params)
    dp_dh, dp_da = pressure_derivatives(eq.h_star, eq.a_star, params)
    scale = 2.0 * params.rho_ice * eq.h_star
    ops = diff_ops(grid)
    grad_h = np.stack([ops["dx"] @ h_vec, ops["dy"] @ h_vec])
    grad_a = np.stack([ops["dx"] @ a_vec, ops["dy"] @ a_vec])
    u1, u2 = u_vec[:n], u_vec[n:]
    div_u = divergence_matrix(grid) @ u_vec
    lap_h = assemble_neumann_laplacian(grid, params.d_h).matrix
    lap_a = assemble_neumann_laplacian(grid, params.d_a).matrix

    terms = {
        "viscous": area / (params.rho_ice * eq.h_star)
                   * float(u_vec @ (hibler.matrix @ u_vec)),
        "coriolis": area * params.c_cor
                    * float(np.sum(u1 * u2 - u2 * u1)),
        "pressure_h": area * dp_dh / scale
                      * float(np.sum(grad_h[0] * u1 + grad_h[1] * u2)),
        "pressure_a": area * dp_da / scale
                      * float(np.sum(grad_a[0] * u1 + grad_a[1] * u2)),
        "div_h": area * eq.h_star * float(h_vec @ div_u),
        "diffusion_h": area * float(h_vec @ (lap_h @ h_vec)),
        "div_a": area * eq.a_star * float(a_vec @ div_u),
        "diffusion_a": area * float(a_vec @ (lap_a @ a_vec)),
    }
    termwise = sum(terms.values())
    norm2 = area * float(vec @ vec)
    rayleigh = -assembled / norm2 if norm2 > 0.0 else 0.0
    mismatch = abs(assembled - termwise) / max(
        sum(abs(t) for t in terms.values()), 1e-300)
    return {
        "mismatch": mismatch,
        "assembled": assembled,
        "termwise": termwise,
        "rayleigh": rayleigh,
        "terms": terms,
    }


def weighted_equilibrium_energy(v: FieldSet, eq: Equilibrium,
                                params: RheologyParams) -> tuple:
    """Energy form of the equilibrium equation tested with (u, C_h h, C_a a).

    Returns (value, breakdown).  At the equilibrium itself, and for any
    motionless constant state, every term vanishes.  Near the equilibrium
    the viscous and diffusive terms dominate remainder terms whose size is
    controlled by the distance to the equilibrium; callers report those
    margins rather than asserting them (they are state dependent).
    """
    grid = v.grid
    v.validate(params)
    area = grid.cell_area
    c_h, c_a = weight_constants(eq, params)
    n = grid.n_nodes
    ops = diff_ops(grid)
    div = divergence_matrix(grid)

    u_vec = np.concatenate([v.u1.ravel(), v.u2.ravel()])
    hibler = assemble_hibler(v, grid, params)
    p_field = pressure(v.h, v.a, params).ravel()
    grad_p = np.stack([ops["dx"] @ p_field, ops["dy"] @ p_field])
    u1, u2 = v.u1.ravel(), v.u2.ravel()

    adv1 = u1 * (ops["dx"] @ u1) + u2 * (ops["dy"] @ u1)
    adv2 = u1 * (ops["dx"] @ u2) + u2 * (ops["dy"] @ u2)

    flux_h = np.concatenate([(v.u1 * v.h).ravel(), (v.u2 * v.h).ravel()])
    flux_a = np.concatenate([(v.u1 * v.a).ravel(), (v.u2 * v.a).ravel()])
    lap_h = assemble_neumann_laplacian(grid, params.d_h).matrix
    lap_a = assemble_neumann_laplacian(grid, params.d_a).matrix

    breakdown = {
        "viscous": area * float(u_vec @ (hibler.matrix @ u_vec)),
        "pressure_gradient": 0.5 * area
                             * float(np.sum(grad_p[0] * u1 + grad_p[1] * u2)),
        "momentum_advection": area * params.rho_ice
                              * float(np.sum(v.h.ravel() * (adv1 * u1 + adv2 * u2))),
        "thickness_transport": c_h * area * float(v.h.ravel() @ (div @ flux_h)),
        "thickness_diffusion": c_h * area * float(v.h.ravel() @ (lap_h @ v.h.ravel())),
        "compactness_transport": c_a * area * float(v.a.ravel() @ (div @ flux_a)),
        "compactness_diffusion": c_a * area * float(v.a.ravel() @ (lap_a @ v.a.ravel())),
    }
    return sum(breakdown.values()), breakdown


@dataclass
class DecayResult:
    fitted_rate: float
    predicted_gap: float
    limit_mismatch: float
    mean_h_drift: float
    mean_a_drift: float
    trajectory: RunResult


def neumann_mode(n: int, k: int = 1) -> np.ndarray:
    """k-th discrete eigenvector of the reflected 1D Neumann stencil.

    Exactly mean-free on the node set, so perturbing with it keeps the
    mean-value equilibrium unchanged.
    """
    return np.cos(k * np.pi * (np.arange(n) + 0.5) / n)


def perturbed_equilibrium(eq: Equilibrium, grid: Grid, scale: float) -> FieldSet:
    """Equilibrium plus mean-free thickness/compactness perturbations."""
    v = eq.state(grid)
    v.h += scale * eq.h_star * np.broadcast_to(neumann_mode(grid.nx),
                                               (grid.ny, grid.nx))
    v.a += scale * eq.a_star * np.broadcast_to(neumann_mode(grid.ny)[:, None],
                                               (grid.ny, grid.nx))
    return v


def decay_experiment(eq: Equilibrium, perturbation_scale: float, grid: Grid,
                     params: RheologyParams, cfg: StepperConfig,
                     min_fit_samples: int = 10) -> DecayResult:
    """Fit the exponential decay rate toward the mean-value equilibrium.

    Runs the unforced dynamics from the perturbed equilibrium, fits a
    log-linear decay of the composite perturbation norm over the asymptotic
    window (the first 40% of the trajectory is discarded as transient), and
    compares with the spectral gap of the independently assembled
    linearization.
    """
    eq.validate(params)
    v0 = perturbed_equilibrium(eq, grid, perturbation_scale).validate(params)
    v_inf = FieldSet.constant(grid, float(np.mean(v0.h)), float(np.mean(v0.a)))
    result = run(v0, ForcingInputs.none(), params, cfg, reference=v_inf)

    gap = spectrum(assemble_A0(eq, grid, params)).spectral_gap

    norms = result.perturbation_norm
    mismatch = float(norms[-1])
    mean_h_drift = abs(result.mean_h[-1] - result.mean_h[0])
    mean_a_drift = abs(result.mean_a[-1] - result.mean_a[0])

    if perturbation_scale == 0.0 or norms[0] == 0.0:
        return DecayResult(np.nan, gap, mismatch, mean_h_drift, mean_a_drift,
                           result)
    start = int(np.floor(0.4 * len(norms)))
    window_t = result.times[start:]
    window_n = norms[start:]
    positive = window_n > 0.0
    if int(np.sum(positive)) < min_fit_samples:
        raise DecayFitError(
            f"only {int(np.sum(positive))} usable samples in the fit window, "
            f"need {min_fit_samples}")
    slope, _ = np.polyfit(window_t[positive], np.log(window_n[positive]), 1)
    return DecayResult(float(-slope), gap, mismatch, mean_h_drift,
                       mean_a_drift, result)


def delta_gap_sweep(eq: Equilibrium, grid: Grid, params: RheologyParams,
                    deltas) -> np.ndarray:
    """Spectral gap of the linearization across regularization values."""
    gaps = []
    for delta in deltas:
        p = params.with_(delta=float(delta))
        gaps.append(spectrum(assemble_A0(eq, grid, p)).spectral_gap)
    return np.array(gaps)
