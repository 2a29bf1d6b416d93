"""Stationary Brinkman flow subsystem on the staggered (MAC) grid.

    -div(2 eta(phi) Dv + lambda(phi) div(v) I - p I) + nu v = f,   div(v) = g,

with zero-traction walls. The discretization is variational: we minimize the
discrete energy

    1/2 int 2 eta |Dv|^2 + lambda (div v)^2 + nu |v|^2  -  int f . v

subject to the divergence constraint with multiplier p. Strain rates dxx, dyy
and div live at cell centers, the shear dxy at interior nodes; omitting the
shear energy at wall nodes imposes the tangential traction condition weakly,
and the normal traction (including the pressure) is the natural boundary
condition of the Lagrangian. The first-order system is symmetric indefinite
by construction and solved with Jacobi-preconditioned MINRES; a dense
loop-assembled oracle covers small grids.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import ModelParams, nutrient_energy
from .core import FaceField, Grid
from .elliptic import SolveReport, SolverOptions, StencilOperator, solve_minres


@dataclass
class BrinkmanProblem:
    grid: Grid
    eta: np.ndarray      # shear viscosity at cells, > 0
    lam: np.ndarray      # bulk viscosity at cells, >= 0
    nu: float            # friction coefficient, > 0 for solvability
    force: FaceField     # right-hand side at faces
    gamma_v: np.ndarray  # prescribed divergence at cells

    def __post_init__(self) -> None:
        if np.any(self.eta <= 0.0):
            raise ValueError("shear viscosity must be strictly positive")
        if np.any(self.lam < 0.0):
            raise ValueError("bulk viscosity must be non-negative")
        if self.eta.shape != self.grid.shape or self.lam.shape != self.grid.shape:
            raise ValueError("viscosity fields must be cell fields")


@dataclass
class BrinkmanSolution:
    v: FaceField
    p: np.ndarray
    report: SolveReport
    momentum_residual: float   # max-norm, PDE units
    divergence_residual: float  # max-norm of div(v) - gamma_v


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------

def _face_volumes(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Control volumes of u- and w-faces (halved on the walls)."""
    vu = np.full((grid.nx + 1, grid.ny), grid.cell_area)
    vu[0, :] *= 0.5
    vu[-1, :] *= 0.5
    vw = np.full((grid.nx, grid.ny + 1), grid.cell_area)
    vw[:, 0] *= 0.5
    vw[:, -1] *= 0.5
    return vu, vw


def strain_rates(v: FaceField, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dxx, dyy, dxy): normal strains at cells, shear at interior nodes."""
    dxx = (v.u[1:, :] - v.u[:-1, :]) / grid.hx
    dyy = (v.w[:, 1:] - v.w[:, :-1]) / grid.hy
    dudy = (v.u[1:-1, 1:] - v.u[1:-1, :-1]) / grid.hy
    dwdx = (v.w[1:, 1:-1] - v.w[:-1, 1:-1]) / grid.hx
    return dxx, dyy, 0.5 * (dudy + dwdx)


def divergence(v: FaceField, grid: Grid) -> np.ndarray:
    dxx, dyy, _ = strain_rates(v, grid)
    return dxx + dyy


def _node_eta(eta: np.ndarray) -> np.ndarray:
    """Viscosity at interior nodes: arithmetic mean of the four cells."""
    return 0.25 * (eta[:-1, :-1] + eta[1:, :-1] + eta[:-1, 1:] + eta[1:, 1:])


# ---------------------------------------------------------------------------
# Matrix-free operator (volume-weighted symmetric form)
# ---------------------------------------------------------------------------

def _pack(u: np.ndarray, w: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.concatenate([u.ravel(), w.ravel(), p.ravel()])


def _unpack(x: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nu_ = (grid.nx + 1) * grid.ny
    nw_ = grid.nx * (grid.ny + 1)
    u = x[:nu_].reshape(grid.nx + 1, grid.ny)
    w = x[nu_:nu_ + nw_].reshape(grid.nx, grid.ny + 1)
    p = x[nu_ + nw_:].reshape(grid.nx, grid.ny)
    return u, w, p


def _apply_saddle(problem: BrinkmanProblem, u: np.ndarray, w: np.ndarray,
                  p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Volume-weighted residual blocks (Av + Gp, G^T v); symmetric."""
    g = problem.grid
    hx, hy, vol = g.hx, g.hy, g.cell_area
    v = FaceField(u, w)
    dxx, dyy, dxy = strain_rates(v, g)
    div = dxx + dyy
    pxx = (2.0 * problem.eta * dxx + problem.lam * div - p) * hy
    pyy = (2.0 * problem.eta * dyy + problem.lam * div - p) * hx
    qn = 2.0 * _node_eta(problem.eta) * dxy

    vu, vw = _face_volumes(g)
    au = problem.nu * u * vu
    au[1:, :] += pxx
    au[:-1, :] -= pxx
    au[1:-1, 1:] += qn * hx
    au[1:-1, :-1] -= qn * hx

    aw = problem.nu * w * vw
    aw[:, 1:] += pyy
    aw[:, :-1] -= pyy
    aw[1:, 1:-1] += qn * hy
    aw[:-1, 1:-1] -= qn * hy

    ap = -div * vol
    return au, aw, ap


def brinkman_operator(problem: BrinkmanProblem) -> StencilOperator:
    g = problem.grid
    n = (g.nx + 1) * g.ny + g.nx * (g.ny + 1) + g.nx * g.ny

    def apply(x: np.ndarray) -> np.ndarray:
        u, w, p = _unpack(x, g)
        au, aw, ap = _apply_saddle(problem, u, w, p)
        return _pack(au, aw, ap)

    return StencilOperator(apply=apply, shape=(n,), symmetric=True,
                           description="MAC Brinkman saddle system")


def brinkman_rhs(problem: BrinkmanProblem) -> np.ndarray:
    vu, vw = _face_volumes(problem.grid)
    return _pack(problem.force.u * vu, problem.force.w * vw,
                 -problem.gamma_v * problem.grid.cell_area)


def apply_brinkman(problem: BrinkmanProblem, v: FaceField,
                   p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Momentum residual operator in PDE units plus the cell divergence.

    Returns (mom_u, mom_w, div_v); for the exact solution mom == force and
    div_v == gamma_v. At wall faces the discrete momentum includes the weak
    traction terms, so a constant pressure shows up there (and nowhere else).
    """
    au, aw, ap = _apply_saddle(problem, v.u, v.w, p)
    vu, vw = _face_volumes(problem.grid)
    return au / vu, aw / vw, -ap / problem.grid.cell_area


def _jacobi_diagonal(problem: BrinkmanProblem) -> np.ndarray:
    """Positive diagonal for MINRES preconditioning: diag(A) on velocities and
    a SIMPLE-style Schur surrogate diag(G^T diag(A)^-1 G) on the pressure."""
    g = problem.grid
    hx, hy = g.hx, g.hy
    vu, vw = _face_volumes(g)
    ce = 2.0 * problem.eta + problem.lam
    en = _node_eta(problem.eta)

    du = problem.nu * vu.copy()
    du[1:, :] += ce * hy / hx
    du[:-1, :] += ce * hy / hx
    du[1:-1, 1:] += en * hx / hy
    du[1:-1, :-1] += en * hx / hy

    dw = problem.nu * vw.copy()
    dw[:, 1:] += ce * hx / hy
    dw[:, :-1] += ce * hx / hy
    dw[1:, 1:-1] += en * hy / hx
    dw[:-1, 1:-1] += en * hy / hx

    dp = (hy * hy) * (1.0 / du[:-1, :] + 1.0 / du[1:, :]) \
        + (hx * hx) * (1.0 / dw[:, :-1] + 1.0 / dw[:, 1:])
    return _pack(du, dw, dp)


def solve_brinkman(problem: BrinkmanProblem,
                   opts: SolverOptions | None = None) -> BrinkmanSolution:
    """Solve the saddle system with Jacobi-preconditioned MINRES."""
    opts = opts or SolverOptions(tol=1e-11, max_iters=20000)
    op = brinkman_operator(problem)
    rhs = brinkman_rhs(problem)
    x, report = solve_minres(op, rhs, opts, precond_diag=_jacobi_diagonal(problem))
    u, w, p = _unpack(x, problem.grid)
    v = FaceField(u, w)
    mom_u, mom_w, div_v = apply_brinkman(problem, v, p)
    mom_res = max(float(np.max(np.abs(mom_u - problem.force.u))),
                  float(np.max(np.abs(mom_w - problem.force.w))))
    div_res = float(np.max(np.abs(div_v - problem.gamma_v)))
    return BrinkmanSolution(v, p, report, mom_res, div_res)


# ---------------------------------------------------------------------------
# Energy identity and capillary force
# ---------------------------------------------------------------------------

def energy_parts(problem: BrinkmanProblem, v: FaceField,
                 p: np.ndarray) -> dict[str, float]:
    """Quadratures of the flow energy identity:
    a(v,v) = 2 eta |Dv|^2 + lam (div v)^2 + nu |v|^2 integrated, the force
    work <f, v> and the pressure work <p, gamma_v>. For the discrete solution
    a(v,v) = force_work + pressure_work up to the solver residual."""
    g = problem.grid
    vol = g.cell_area
    dxx, dyy, dxy = strain_rates(v, g)
    div = dxx + dyy
    vu, vw = _face_volumes(g)
    visc_shear = float(np.sum(2.0 * problem.eta * (dxx ** 2 + dyy ** 2))) * vol \
        + float(np.sum(4.0 * _node_eta(problem.eta) * dxy ** 2)) * vol
    visc_bulk = float(np.sum(problem.lam * div ** 2)) * vol
    friction = problem.nu * (float(np.sum(v.u ** 2 * vu)) + float(np.sum(v.w ** 2 * vw)))
    force_work = float(np.sum(problem.force.u * v.u * vu)) \
        + float(np.sum(problem.force.w * v.w * vw))
    pressure_work = float(np.sum(p * problem.gamma_v)) * vol
    return {
        "visc_shear": visc_shear,
        "visc_bulk": visc_bulk,
        "friction": friction,
        "dissipation": visc_shear + visc_bulk + friction,
        "force_work": force_work,
        "pressure_work": pressure_work,
    }


def capillary_force(phi: np.ndarray, sigma: np.ndarray, mu: np.ndarray,
                    params: ModelParams, grid: Grid) -> FaceField:
    """Momentum forcing mu grad(phi) + N_sigma grad(sigma) at faces.

    Interior faces use centered differences and arithmetic face averages of
    the scalar prefactors; wall faces carry zero force (exact for phi by the
    Neumann condition, first-order for sigma).
    """
    _, n_sigma, _ = nutrient_energy(phi, sigma, params)
    fu = np.zeros((grid.nx + 1, grid.ny))
    fw = np.zeros((grid.nx, grid.ny + 1))
    mu_f = 0.5 * (mu[1:, :] + mu[:-1, :])
    ns_f = 0.5 * (n_sigma[1:, :] + n_sigma[:-1, :])
    fu[1:-1, :] = mu_f * (phi[1:, :] - phi[:-1, :]) / grid.hx \
        + ns_f * (sigma[1:, :] - sigma[:-1, :]) / grid.hx
    mu_f = 0.5 * (mu[:, 1:] + mu[:, :-1])
    ns_f = 0.5 * (n_sigma[:, 1:] + n_sigma[:, :-1])
    fw[:, 1:-1] = mu_f * (phi[:, 1:] - phi[:, :-1]) / grid.hy \
        + ns_f * (sigma[:, 1:] - sigma[:, :-1]) / grid.hy
    return FaceField(fu, fw)


# ---------------------------------------------------------------------------
# Dense oracle (loop assembly, independent of the vectorized operator)
# ---------------------------------------------------------------------------

def loop_assemble_dense(problem: BrinkmanProblem) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the saddle matrix entry-by-entry from the energy quadrature.

    Scalar index loops, no numpy slicing: this is the independent oracle path
    used to cross-check the matrix-free operator and for dense direct solves.
    """
    g = problem.grid
    nx, ny, hx, hy = g.nx, g.ny, g.hx, g.hy
    vol = g.cell_area
    n_u = (nx + 1) * ny
    n_w = nx * (ny + 1)
    n = n_u + n_w + nx * ny

    def iu(i: int, j: int) -> int:
        return i * ny + j

    def iw(i: int, j: int) -> int:
        return n_u + i * (ny + 1) + j

    def ip(i: int, j: int) -> int:
        return n_u + n_w + i * ny + j

    mat = np.zeros((n, n))
    rhs = np.zeros(n)

    # cell terms: (2 eta + lam) dxx^2-type entries and the lam cross coupling
    for i in range(nx):
        for j in range(ny):
            e = problem.eta[i, j]
            la = problem.lam[i, j]
            h11 = 2.0 * e + la
            h12 = la
            stencil = [(iu(i + 1, j), 1.0 / hx, 0.0), (iu(i, j), -1.0 / hx, 0.0),
                       (iw(i, j + 1), 0.0, 1.0 / hy), (iw(i, j), 0.0, -1.0 / hy)]
            for a, ax, ay in stencil:
                for b, bx, by in stencil:
                    mat[a, b] += vol * (h11 * (ax * bx + ay * by)
                                        + h12 * (ax * by + ay * bx))
            # pressure coupling from -p (div v - gamma) vol
            for a, ax, ay in stencil:
                mat[a, ip(i, j)] += -vol * (ax + ay)
                mat[ip(i, j), a] += -vol * (ax + ay)
            rhs[ip(i, j)] = -vol * problem.gamma_v[i, j]

    # interior-node shear terms: 4 eta_n dxy^2
    for i in range(1, nx):
        for j in range(1, ny):
            en = 0.25 * (problem.eta[i - 1, j - 1] + problem.eta[i, j - 1]
                         + problem.eta[i - 1, j] + problem.eta[i, j])
            stencil = [(iu(i, j), 0.5 / hy), (iu(i, j - 1), -0.5 / hy),
                       (iw(i, j), 0.5 / hx), (iw(i - 1, j), -0.5 / hx)]
            for a, ca in stencil:
                for b, cb in stencil:
                    mat[a, b] += 4.0 * en * ca * cb * vol

    # friction and force with half control volumes on the walls
    for i in range(nx + 1):
        for j in range(ny):
            vuf = vol * (0.5 if i in (0, nx) else 1.0)
            mat[iu(i, j), iu(i, j)] += problem.nu * vuf
            rhs[iu(i, j)] += problem.force.u[i, j] * vuf
    for i in range(nx):
        for j in range(ny + 1):
            vwf = vol * (0.5 if j in (0, ny) else 1.0)
            mat[iw(i, j), iw(i, j)] += problem.nu * vwf
            rhs[iw(i, j)] += problem.force.w[i, j] * vwf

    return mat, rhs


def dense_oracle_solve(problem: BrinkmanProblem) -> BrinkmanSolution:
    """Direct dense solve on small grids; raises on singular systems."""
    g = problem.grid
    if g.nx > 12 or g.ny > 12:
        raise ValueError("dense oracle is restricted to grids up to 12x12")
    mat, rhs = loop_assemble_dense(problem)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > 1e13:
        raise np.linalg.LinAlgError(
            f"Brinkman saddle matrix is numerically singular (cond={cond:.3g})")
    x = np.linalg.solve(mat, rhs)
    u, w, p = _unpack(x, g)
    v = FaceField(u, w)
    mom_u, mom_w, div_v = apply_brinkman(problem, v, p)
    mom_res = max(float(np.max(np.abs(mom_u - problem.force.u))),
                  float(np.max(np.abs(mom_w - problem.force.w))))
    div_res = float(np.max(np.abs(div_v - problem.gamma_v)))
    report = SolveReport(True, 0, float(np.linalg.norm(rhs - mat @ x)), 0.0)
    return BrinkmanSolution(v, p, report, mom_res, div_res)
