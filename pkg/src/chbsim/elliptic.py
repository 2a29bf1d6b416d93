"""Finite-difference operators and iterative solvers on the cell grid.

Operators are conservative flux-difference stencils with mirror ghosts
(zero-flux walls) or Robin wall fluxes; coefficients live on faces via
harmonic means of the adjacent cells. Solvers are matrix-free Krylov
iterations (CG / BiCGStab / MINRES) with fixed-order reductions, so repeated
runs are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import EdgeTraces, FaceField, Grid, extrapolate_to_walls


# ---------------------------------------------------------------------------
# Face coefficients and gradients
# ---------------------------------------------------------------------------

def harmonic_face_coefficients(cell_coeff: np.ndarray, grid: Grid) -> FaceField:
    """Harmonic mean of adjacent cell coefficients on each interior face.

    Wall faces copy the adjacent cell value; Neumann/Robin wall fluxes never
    use it, so the choice only matters for bookkeeping. Requires coeff > 0.
    """
    c = np.asarray(cell_coeff, dtype=float)
    if np.any(c <= 0.0):
        raise ValueError("face coefficients need strictly positive cell values")
    u = np.empty((grid.nx + 1, grid.ny))
    w = np.empty((grid.nx, grid.ny + 1))
    a, b = c[:-1, :], c[1:, :]
    u[1:-1, :] = 2.0 * a * b / (a + b)
    u[0, :] = c[0, :]
    u[-1, :] = c[-1, :]
    a, b = c[:, :-1], c[:, 1:]
    w[:, 1:-1] = 2.0 * a * b / (a + b)
    w[:, 0] = c[:, 0]
    w[:, -1] = c[:, -1]
    return FaceField(u, w)


def face_gradient(f: np.ndarray, grid: Grid) -> FaceField:
    """Discrete gradient on faces with mirror ghosts (zero at the walls)."""
    gx = np.zeros((grid.nx + 1, grid.ny))
    gy = np.zeros((grid.nx, grid.ny + 1))
    gx[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    gy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return FaceField(gx, gy)


def apply_neumann_laplacian(f: np.ndarray, coeff_faces: FaceField,
                            grid: Grid) -> np.ndarray:
    """div(c grad f) with zero-flux walls. Conservative: integrates to zero."""
    g = face_gradient(f, grid)
    fu = coeff_faces.u * g.u
    fw = coeff_faces.w * g.w
    return (fu[1:, :] - fu[:-1, :]) / grid.hx + (fw[:, 1:] - fw[:, :-1]) / grid.hy


# ---------------------------------------------------------------------------
# Robin-wall diffusion (nutrient)
# ---------------------------------------------------------------------------

def robin_linear(f: np.ndarray, coeff_faces: FaceField, b: float,
                 grid: Grid) -> np.ndarray:
    """div(c grad f) whose wall flux is the Robin term with sigma_inf = 0,
    i.e. outward flux -b * f_wall, f_wall the extrapolated trace."""
    g = face_gradient(f, grid)
    fu = coeff_faces.u * g.u
    fw = coeff_faces.w * g.w
    tr = extrapolate_to_walls(f, grid)
    # flux component along the axis at each wall: F.n_out = b(0 - trace)
    fu[0, :] = b * tr.left          # F_x = -b(0 - trace) at x=0
    fu[-1, :] = -b * tr.right       # F_x = +b(0 - trace) at x=Lx
    fw[:, 0] = b * tr.bottom
    fw[:, -1] = -b * tr.top
    return (fu[1:, :] - fu[:-1, :]) / grid.hx + (fw[:, 1:] - fw[:, :-1]) / grid.hy


def robin_source(b: float, sigma_inf: EdgeTraces, grid: Grid) -> np.ndarray:
    """Constant inflow part of the Robin flux, b*sigma_inf per unit wall."""
    src = np.zeros(grid.shape)
    src[0, :] += b * sigma_inf.left / grid.hx
    src[-1, :] += b * sigma_inf.right / grid.hx
    src[:, 0] += b * sigma_inf.bottom / grid.hy
    src[:, -1] += b * sigma_inf.top / grid.hy
    return src


def robin_influx(f: np.ndarray, b: float, sigma_inf: EdgeTraces,
                 grid: Grid) -> float:
    """Total Robin boundary income: integral of b (sigma_inf - f_wall)."""
    tr = extrapolate_to_walls(f, grid)
    lr = float(np.sum(sigma_inf.left - tr.left) + np.sum(sigma_inf.right - tr.right))
    bt = float(np.sum(sigma_inf.bottom - tr.bottom) + np.sum(sigma_inf.top - tr.top))
    return b * (lr * grid.hy + bt * grid.hx)


def apply_robin_diffusion(f: np.ndarray, coeff_faces: FaceField, b: float,
                          sigma_inf: EdgeTraces, grid: Grid) -> tuple[np.ndarray, float]:
    """Diffusion with Robin walls; returns the field and the total wall income
    (which the field integrates to, exactly, by telescoping)."""
    out = robin_linear(f, coeff_faces, b, grid) + robin_source(b, sigma_inf, grid)
    return out, robin_influx(f, b, sigma_inf, grid)


# ---------------------------------------------------------------------------
# Upwind advection
# ---------------------------------------------------------------------------

def _upwind_fluxes(q: np.ndarray, v: FaceField) -> tuple[np.ndarray, np.ndarray]:
    # ghost cells copy the interior value, so wall fluxes use the adjacent cell
    qx = np.concatenate([q[:1, :], q, q[-1:, :]], axis=0)
    qy = np.concatenate([q[:, :1], q, q[:, -1:]], axis=1)
    fu = v.u * np.where(v.u >= 0.0, qx[:-1, :], qx[1:, :])
    fw = v.w * np.where(v.w >= 0.0, qy[:, :-1], qy[:, 1:])
    return fu, fw


def upwind_div(q: np.ndarray, v: FaceField, grid: Grid) -> np.ndarray:
    """First-order upwind div(q v) in conservative form."""
    fu, fw = _upwind_fluxes(q, v)
    return (fu[1:, :] - fu[:-1, :]) / grid.hx + (fw[:, 1:] - fw[:, :-1]) / grid.hy


def advective_boundary_flux(q: np.ndarray, v: FaceField, grid: Grid) -> float:
    """Net outward advective flux of q through the walls, with the same upwind
    convention as upwind_div, so integrate_cell(upwind_div) == this exactly."""
    fu, fw = _upwind_fluxes(q, v)
    lr = float(np.sum(fu[-1, :]) - np.sum(fu[0, :])) * grid.hy
    bt = float(np.sum(fw[:, -1]) - np.sum(fw[:, 0])) * grid.hx
    return lr + bt


# ---------------------------------------------------------------------------
# Matrix-free operators and Krylov solvers
# ---------------------------------------------------------------------------

@dataclass
class StencilOperator:
    """Linear operator acting on ndarrays of a fixed shape."""

    apply: Callable[[np.ndarray], np.ndarray]
    shape: tuple[int, ...]
    symmetric: bool = False
    nullspace: str = "none"  # "none" | "constants"
    description: str = ""


@dataclass
class SolverOptions:
    tol: float = 1e-10          # relative to ||rhs||
    max_iters: int = 5000
    x0: np.ndarray | None = None


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float       # true absolute residual ||rhs - A x||
    rel_residual: float   # residual / ||rhs|| (1.0 if rhs == 0 and x != 0)


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b))


def _norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.vdot(a, a).real))


def _true_report(op: StencilOperator, rhs: np.ndarray, x: np.ndarray,
                 iterations: int, tol: float) -> SolveReport:
    res = _norm(rhs - op.apply(x))
    nb = _norm(rhs)
    rel = res / nb if nb > 0.0 else (0.0 if res == 0.0 else 1.0)
    return SolveReport(rel <= 10.0 * tol or res <= 1e-300, iterations, res, rel)


def _project_mean(a: np.ndarray) -> np.ndarray:
    return a - a.mean()


def solve_spd(op: StencilOperator, rhs: np.ndarray,
              opts: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients for symmetric positive (semi-)definite stencils.

    Parameters
    ----------
    op : StencilOperator
        Symmetric operator; if op.nullspace == "constants" the system is the
        singular pure-Neumann case and rhs/iterates are projected to zero mean.
    rhs : ndarray
        Right-hand side, same shape as the operator domain.
    opts : SolverOptions
        Relative tolerance, iteration cap and optional warm start.

    Returns
    -------
    (x, SolveReport) with the true residual recomputed after the solve.
    """
    opts = opts or SolverOptions()
    if not op.symmetric:
        raise ValueError("solve_spd requires a symmetric operator")
    singular = op.nullspace == "constants"
    b = _project_mean(rhs) if singular else rhs
    x = np.zeros_like(rhs) if opts.x0 is None else opts.x0.copy()
    if singular:
        x = _project_mean(x)
    r = b - op.apply(x)
    if singular:
        r = _project_mean(r)
    p = r.copy()
    rs = _dot(r, r)
    nb = _norm(b)
    target = (opts.tol * nb) ** 2 if nb > 0.0 else 0.0
    it = 0
    while rs > target and it < opts.max_iters:
        ap = op.apply(p)
        denom = _dot(p, ap)
        if denom <= 0.0:
            break  # lost positivity (rounding on the singular system)
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        if singular:
            r = _project_mean(r)
        rs_new = _dot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    if singular:
        x = _project_mean(x)
    return x, _true_report(op, b, x, it, opts.tol)


def solve_general(op: StencilOperator, rhs: np.ndarray,
                  opts: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    """BiCGStab for nonsymmetric stencil systems.

    Restarts with the current iterate on the usual breakdowns (rho or omega
    collapsing); reports the true residual recomputed at the end.
    """
    opts = opts or SolverOptions()
    x = np.zeros_like(rhs) if opts.x0 is None else opts.x0.copy()
    r = rhs - op.apply(x)
    nb = _norm(rhs)
    target = opts.tol * nb if nb > 0.0 else 0.0
    it = 0
    restarts = 0
    while _norm(r) > target and it < opts.max_iters and restarts < 10:
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(r)
        p = np.zeros_like(r)
        broke = False
        while it < opts.max_iters:
            rho_new = _dot(r_hat, r)
            if abs(rho_new) < 1e-300:
                broke = True
                break
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            v = op.apply(p)
            rv = _dot(r_hat, v)
            if abs(rv) < 1e-300:
                broke = True
                break
            alpha = rho / rv
            s = r - alpha * v
            it += 1
            if _norm(s) <= target:
                x = x + alpha * p
                r = s
                break
            t = op.apply(s)
            tt = _dot(t, t)
            if tt <= 0.0:
                x = x + alpha * p
                r = s
                broke = True
                break
            omega = _dot(t, s) / tt
            x = x + alpha * p + omega * s
            r = s - omega * t
            if abs(omega) < 1e-300:
                broke = True
                break
            if _norm(r) <= target:
                break
        if broke:
            restarts += 1
            r = rhs - op.apply(x)
        else:
            break
    return x, _true_report(op, rhs, x, it, opts.tol)


def _minres_cycle(op: StencilOperator, rhs: np.ndarray, x: np.ndarray, minv,
                  target: float, budget: int) -> tuple[np.ndarray, int]:
    """One Lanczos/Givens recurrence from iterate x until the estimated
    preconditioned residual drops below `target` (or the budget runs out)."""
    r1 = rhs - op.apply(x)
    y = minv(r1)
    beta1_sq = _dot(r1, y)
    if beta1_sq <= 0.0:
        return x, 0

    oldb = 0.0
    beta = np.sqrt(beta1_sq)
    dbar = epsln = 0.0
    phibar = beta
    cs, sn = -1.0, 0.0
    w = np.zeros_like(rhs)
    w2 = np.zeros_like(rhs)
    r2 = r1
    it = 0
    while it < budget and phibar > target:
        it += 1
        v = y / beta
        y = op.apply(v)
        if it >= 2:
            y = y - (beta / oldb) * r1
        alfa = _dot(v, y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = minv(r2)
        oldb = beta
        bsq = _dot(r2, y)
        if bsq < 0.0:
            break  # preconditioner lost positivity numerically
        beta = np.sqrt(bsq)
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.sqrt(gbar * gbar + beta * beta), 1e-300)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
    return x, it


def solve_minres(op: StencilOperator, rhs: np.ndarray,
                 opts: SolverOptions | None = None,
                 precond_diag: np.ndarray | None = None
                 ) -> tuple[np.ndarray, SolveReport]:
    """MINRES for symmetric indefinite stencils, with an optional SPD diagonal
    preconditioner (entries > 0).

    The recurrence tracks the residual in the preconditioner norm, whose gap
    to the plain norm can reach sqrt(max diag / min diag); the recurrence
    estimate also drifts from the true residual on long warm-started solves.
    Both are handled the same way: measure the true residual at cycle exit
    and restart the recurrence (with a tightened internal target if the
    estimate was already below it) until ||rhs - A x|| <= tol * ||rhs||."""
    opts = opts or SolverOptions()
    if not op.symmetric:
        raise ValueError("solve_minres requires a symmetric operator")
    if precond_diag is not None and np.any(precond_diag <= 0.0):
        raise ValueError("preconditioner diagonal must be positive")

    def minv(a: np.ndarray) -> np.ndarray:
        return a if precond_diag is None else a / precond_diag

    x = np.zeros_like(rhs) if opts.x0 is None else opts.x0.copy()
    nb_plain = _norm(rhs)
    # tolerance scales with the rhs, not the (possibly warm-started) residual
    nb_pre = np.sqrt(max(_dot(rhs, minv(rhs)), 0.0))
    target = opts.tol * nb_pre
    it_total = 0
    for _ in range(8):
        res = _norm(rhs - op.apply(x))
        if res <= opts.tol * nb_plain or res <= 1e-300:
            break
        if it_total >= opts.max_iters or target < 1e-280:
            break
        x, it = _minres_cycle(op, rhs, x, minv, target,
                              opts.max_iters - it_total)
        it_total += it
        if it == 0:
            target *= 0.1
    return x, _true_report(op, rhs, x, it_total, opts.tol)


def materialize_dense(op: StencilOperator) -> np.ndarray:
    """Dense matrix of a stencil operator (test oracle; small grids only)."""
    n = int(np.prod(op.shape))
    if n > 4096:
        raise ValueError(f"refusing to densify an operator with {n} unknowns")
    mat = np.empty((n, n))
    e = np.zeros(op.shape)
    flat = e.reshape(-1)
    for k in range(n):
        flat[k] = 1.0
        mat[:, k] = op.apply(e).reshape(-1)
        flat[k] = 0.0
    return mat
