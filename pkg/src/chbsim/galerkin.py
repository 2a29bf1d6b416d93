"""Spectral Galerkin route: cosine eigenbasis of the Neumann Laplacian.

The phase and nutrient fields are expanded in the first k eigenfunctions
w_m(x, y) = kappa_m cos(i pi x / Lx) cos(j pi y / Ly) and the PDE system is
projected onto the span, yielding an ODE system in the coefficient vectors
which is marched with classical RK4.  Velocity and pressure are NOT spectral:
every stage synthesizes the fields to the grid and re-solves the staggered
Brinkman system there.

Midpoint quadrature at the cell centers is exact for products of admissible
modes (combined index below twice the cell count per direction), so the Gram
matrix is the identity and the stiffness matrix is exactly diag(lambda_m) up
to rounding.  We enforce at least 8 cells per shortest wavelength, which
keeps all assembled quadratures in that exact regime with margin.

Nonlinear terms (psi', mobilities, sources, convection products) are
evaluated by collocation on the same grid and projected back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FaceField, Grid, State, integrate_cell
from .constitutive import (
    ModelSpec,
    mobilities,
    potential_eval,
    sources,
    viscosities,
)
from .elliptic import SolverOptions
from .brinkman import (
    BrinkmanProblem,
    BrinkmanSolution,
    _pack,
    capillary_force,
    solve_brinkman,
)


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBasis:
    """First k cosine modes with everything pre-evaluated on the grid.

    values/grad_x/grad_y hold the modes and their analytic gradients at the
    cell centers, shape (k, nx, ny); the edge_* arrays hold traces on the
    four walls at the boundary-face midpoints (exact, not extrapolated).
    """

    grid: Grid
    k: int
    modes: tuple                      # ((i, j), ...) in eigenvalue order
    eigenvalues: np.ndarray           # (k,) lambda_m = pi^2 (i^2/Lx^2 + j^2/Ly^2)
    values: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    edge_left: np.ndarray             # (k, ny)
    edge_right: np.ndarray            # (k, ny)
    edge_bottom: np.ndarray           # (k, nx)
    edge_top: np.ndarray              # (k, nx)


def build_basis(k: int, grid: Grid) -> SpectralBasis:
    """Enumerate modes by eigenvalue and evaluate them on the grid.

    Modes with index i need 8 grid cells per wavelength 2 Lx / i, i.e.
    i <= nx / 4 (same in y); asking for more modes than that admits raises.
    The constant mode comes first, normalized to 1/sqrt(|Omega|) so the
    quadrature Gram matrix is the identity.
    """
    if k < 1:
        raise ValueError(f"need at least one mode, got k={k}")
    g = grid
    imax, jmax = g.nx // 4, g.ny // 4
    admissible = (imax + 1) * (jmax + 1)
    if k > admissible:
        raise ValueError(
            f"k={k} exceeds the quadrature resolution of a {g.nx}x{g.ny} grid: "
            f"only {admissible} modes keep >= 8 cells per wavelength")
    pairs = [(np.pi ** 2 * ((i / g.Lx) ** 2 + (j / g.Ly) ** 2), i, j)
             for i in range(imax + 1) for j in range(jmax + 1)]
    pairs.sort()
    chosen = pairs[:k]

    xs = (np.arange(g.nx) + 0.5) * g.hx
    ys = (np.arange(g.ny) + 0.5) * g.hy
    x2, y2 = np.meshgrid(xs, ys, indexing="ij")
    vals = np.empty((k, g.nx, g.ny))
    gx = np.empty((k, g.nx, g.ny))
    gy = np.empty((k, g.nx, g.ny))
    e_l = np.empty((k, g.ny))
    e_r = np.empty((k, g.ny))
    e_b = np.empty((k, g.nx))
    e_t = np.empty((k, g.nx))
    lams = np.empty(k)
    modes = []
    for m, (lam, i, j) in enumerate(chosen):
        kx, ky = i * np.pi / g.Lx, j * np.pi / g.Ly
        kap = np.sqrt((2.0 if i else 1.0) * (2.0 if j else 1.0) / (g.Lx * g.Ly))
        cx, cy = np.cos(kx * x2), np.cos(ky * y2)
        vals[m] = kap * cx * cy
        gx[m] = -kap * kx * np.sin(kx * x2) * cy
        gy[m] = -kap * ky * cx * np.sin(ky * y2)
        e_l[m] = kap * np.cos(ky * ys)                      # x = 0
        e_r[m] = kap * np.cos(kx * g.Lx) * np.cos(ky * ys)  # x = Lx
        e_b[m] = kap * np.cos(kx * xs)                      # y = 0
        e_t[m] = kap * np.cos(kx * xs) * np.cos(ky * g.Ly)  # y = Ly
        lams[m] = lam
        modes.append((i, j))
    return SpectralBasis(grid=g, k=k, modes=tuple(modes), eigenvalues=lams,
                         values=vals, grad_x=gx, grad_y=gy,
                         edge_left=e_l, edge_right=e_r,
                         edge_bottom=e_b, edge_top=e_t)


def synthesize(coeffs: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Sum_m coeffs[m] w_m evaluated at the cell centers."""
    return np.tensordot(coeffs, basis.values, axes=1)


def project(field: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Quadrature projection <field, w_m> for all modes."""
    vol = basis.grid.cell_area
    return np.tensordot(basis.values, field, axes=2) * vol


def project_initial(phi0: np.ndarray, sigma0: np.ndarray,
                    basis: SpectralBasis) -> tuple[np.ndarray, np.ndarray]:
    return project(phi0, basis), project(sigma0, basis)


# ---------------------------------------------------------------------------
# State, matrices, right-hand side
# ---------------------------------------------------------------------------

@dataclass
class SpectralState:
    t: float
    a: np.ndarray   # phase coefficients
    b: np.ndarray   # chemical-potential coefficients (derived from a, c)
    c: np.ndarray   # nutrient coefficients


def chemical_coeffs(a: np.ndarray, c: np.ndarray, basis: SpectralBasis,
                    model: ModelSpec) -> np.ndarray:
    """b = eps lambda a + psi_vec / eps - chi_phi c (projection of mu)."""
    eps = model.params.epsilon
    _, dpsi = potential_eval(synthesize(a, basis), model.potential)
    psi_vec = project(dpsi, basis)
    return eps * basis.eigenvalues * a + psi_vec / eps - model.params.chi_phi * c


@dataclass
class GalerkinMatrices:
    s: np.ndarray        # stiffness, diag(lambda) exactly
    s_m: np.ndarray      # phase-mobility-weighted stiffness
    s_n: np.ndarray      # nutrient-mobility-weighted stiffness
    m_bnd: np.ndarray    # boundary mass matrix
    c_mat: np.ndarray    # convection, (C)_{ji} = <(grad w_i . v), w_j>
    d_mat: np.ndarray    # volume-source mass, (D)_{ji} = <Gamma_v w_i, w_j>
    g_vec: np.ndarray    # <Gamma_phi, w_j>
    f_vec: np.ndarray    # <Gamma_sigma, w_j>
    sig_vec: np.ndarray  # boundary data, <sigma_inf, w_j>_{boundary}
    psi_vec: np.ndarray  # <psi'(phi), w_j>


def _weighted_stiffness(weight: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    g = basis.grid
    p = g.nx * g.ny
    gx = basis.grad_x.reshape(basis.k, p)
    gy = basis.grad_y.reshape(basis.k, p)
    w = weight.reshape(p) * g.cell_area
    mat = (gx * w) @ gx.T + (gy * w) @ gy.T
    return 0.5 * (mat + mat.T)


def boundary_mass(basis: SpectralBasis) -> np.ndarray:
    g = basis.grid
    mat = (basis.edge_left @ basis.edge_left.T
           + basis.edge_right @ basis.edge_right.T) * g.hy
    mat += (basis.edge_bottom @ basis.edge_bottom.T
            + basis.edge_top @ basis.edge_top.T) * g.hx
    return 0.5 * (mat + mat.T)


def assemble_matrices(state: SpectralState, v: FaceField, model: ModelSpec,
                      basis: SpectralBasis) -> GalerkinMatrices:
    """All projections by the shared midpoint quadrature.

    Nonlinearities are evaluated on the synthesized grid fields; the
    convection matrix uses the face velocity averaged to the cell centers.
    """
    g, prm = basis.grid, model.params
    k, p = basis.k, g.nx * g.ny
    vol = g.cell_area
    phi_g = synthesize(state.a, basis)
    sig_g = synthesize(state.c, basis)
    mu_g = synthesize(state.b, basis)

    m_cell, n_cell = mobilities(phi_g, model.mobvis)
    src = sources(phi_g, sig_g, mu_g, model.source, prm)
    _, dpsi = potential_eval(phi_g, model.potential)

    vals = basis.values.reshape(k, p)
    gx = basis.grad_x.reshape(k, p)
    gy = basis.grad_y.reshape(k, p)
    vx = 0.5 * (v.u[:-1, :] + v.u[1:, :]).reshape(p)
    vy = 0.5 * (v.w[:, :-1] + v.w[:, 1:]).reshape(p)
    gam_v = src.gamma_v.reshape(p)

    c_mat = vol * (vals @ (gx * vx + gy * vy).T)
    d_mat = vol * (vals @ (vals * gam_v).T)

    sinf = prm.sigma_inf
    sig_vec = g.hy * (sinf.left * basis.edge_left.sum(axis=1)
                      + sinf.right * basis.edge_right.sum(axis=1))
    sig_vec += g.hx * (sinf.bottom * basis.edge_bottom.sum(axis=1)
                       + sinf.top * basis.edge_top.sum(axis=1))

    return GalerkinMatrices(
        s=np.diag(basis.eigenvalues),
        s_m=_weighted_stiffness(m_cell, basis),
        s_n=_weighted_stiffness(n_cell, basis),
        m_bnd=boundary_mass(basis),
        c_mat=c_mat,
        d_mat=d_mat,
        g_vec=project(src.lambda_phi - src.theta_phi * mu_g, basis),
        f_vec=project(src.lambda_sigma - src.theta_sigma * mu_g, basis),
        sig_vec=sig_vec,
        psi_vec=project(dpsi, basis),
    )


def rhs(a: np.ndarray, b: np.ndarray, c: np.ndarray, mats: GalerkinMatrices,
        model: ModelSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient derivatives (da/dt, b, dc/dt) from assembled matrices."""
    prm = model.params
    conv = mats.c_mat + mats.d_mat
    da = -(mats.s_m @ b) + mats.g_vec - conv @ a
    dc = (mats.s_n @ (prm.chi_phi * a - prm.chi_sigma * c) - mats.f_vec
          - conv @ c + prm.b * (mats.sig_vec - mats.m_bnd @ c))
    return da, b, dc


def spectral_to_grid(state: SpectralState,
                     basis: SpectralBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synthesized (phi, mu, sigma) grid fields."""
    return (synthesize(state.a, basis), synthesize(state.b, basis),
            synthesize(state.c, basis))


def spectral_energy(a: np.ndarray, c: np.ndarray, basis: SpectralBasis,
                    model: ModelSpec) -> float:
    """Free energy of the synthesized pair, gradient term summed spectrally."""
    prm = model.params
    phi_g, sig_g = synthesize(a, basis), synthesize(c, basis)
    psi, _ = potential_eval(phi_g, model.potential)
    n_val = (0.5 * prm.chi_sigma * sig_g ** 2
             + prm.chi_phi * sig_g * (1.0 - phi_g))
    bulk = integrate_cell(psi / prm.epsilon + n_val, basis.grid)
    return bulk + 0.5 * prm.epsilon * float(np.sum(basis.eigenvalues * a * a))


# ---------------------------------------------------------------------------
# Time integration
# ---------------------------------------------------------------------------

class SpectralBlowup(RuntimeError):
    pass


@dataclass
class GalerkinResult:
    times: np.ndarray
    a: np.ndarray                 # (steps+1, k)
    c: np.ndarray                 # (steps+1, k)
    states: list[State]           # synthesized samples with the stage-1 flow
    flow_iterations: int

    @property
    def final(self) -> SpectralState:
        return SpectralState(t=float(self.times[-1]), a=self.a[-1].copy(),
                             b=np.zeros_like(self.a[-1]), c=self.c[-1].copy())


def stability_timestep(basis: SpectralBasis, model: ModelSpec) -> float:
    """Conservative explicit-stability estimate for the RK4 march.

    Bounds the stiffest linearized rate by the fourth-order surface term
    plus the destabilizing well curvature and the cross/chemo couplings,
    all at the largest eigenvalue; RK4's real-axis stability reach ~2.8
    is taken with a safety factor 0.9.
    """
    prm = model.params
    lam = float(np.max(basis.eigenvalues))
    if lam == 0.0:
        return np.inf
    curv = 2.0 * model.potential.stabilization_bound  # sup |psi''| scale
    m_hi, n_hi = model.mobvis.m.hi, model.mobvis.n.hi
    rate = (m_hi * lam * (prm.epsilon * lam + curv / prm.epsilon + prm.chi_phi)
            + n_hi * lam * (prm.chi_sigma + prm.chi_phi)
            + prm.b * basis.grid.perimeter / basis.grid.area)
    return 0.9 * 2.8 / rate


def _flow_solution(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                   model: ModelSpec, basis: SpectralBasis, flow_tol: float,
                   max_iters: int, x0: np.ndarray | None) -> BrinkmanSolution:
    g, prm = basis.grid, model.params
    phi_g, sig_g, mu_g = synthesize(a, basis), synthesize(c, basis), synthesize(b, basis)
    eta, lam = viscosities(phi_g, model.mobvis)
    force = capillary_force(phi_g, sig_g, mu_g, prm, g)
    src = sources(phi_g, sig_g, mu_g, model.source, prm)
    problem = BrinkmanProblem(g, eta, lam, prm.nu, force, src.gamma_v)
    opts = SolverOptions(tol=flow_tol, max_iters=max_iters, x0=x0)
    sol = solve_brinkman(problem, opts)
    if not sol.report.converged:
        raise SpectralBlowup(
            f"spectral-route flow solve stalled: rel residual "
            f"{sol.report.rel_residual:.3e}")
    return sol


def integrate(state0: SpectralState, dt: float, steps: int, model: ModelSpec,
              basis: SpectralBasis, *, flow: bool = True, flow_tol: float = 1e-10,
              max_iters: int = 40000, sample_every: int = 1) -> GalerkinResult:
    """Classical RK4 march of the coefficient ODEs.

    Every stage re-solves the grid Brinkman system from the synthesized
    fields (warm-started from the previous stage).  Aborts when
    ||a|| + ||c|| exceeds 1e6.  Samples synthesized States (with the
    stage-1 velocity and pressure of that step) every `sample_every` steps;
    the final state is always sampled.
    """
    if dt <= 0.0 or steps < 0:
        raise ValueError("need dt > 0 and steps >= 0")
    g = basis.grid
    k = basis.k
    a, c = state0.a.copy(), state0.c.copy()
    t = state0.t
    a_hist = np.empty((steps + 1, k))
    c_hist = np.empty((steps + 1, k))
    times = np.empty(steps + 1)
    a_hist[0], c_hist[0], times[0] = a, c, t
    states: list[State] = []
    warm: np.ndarray | None = None
    flow_iters = 0

    def derivative(aa: np.ndarray, cc: np.ndarray,
                   record: float | None) -> tuple[np.ndarray, np.ndarray]:
        nonlocal warm, flow_iters
        if float(np.linalg.norm(aa)) + float(np.linalg.norm(cc)) > 1e6:
            raise SpectralBlowup(f"coefficient blow-up at t={t:g}")
        bb = chemical_coeffs(aa, cc, basis, model)
        if flow:
            sol = _flow_solution(aa, bb, cc, model, basis, flow_tol,
                                 max_iters, warm)
            v, p = sol.v, sol.p
            warm = _pack(v.u, v.w, p)
            flow_iters += sol.report.iterations
        else:
            v, p = FaceField.zeros(g), np.zeros(g.shape)
        if record is not None:
            states.append(State(t=record, phi=synthesize(aa, basis),
                                mu=synthesize(bb, basis),
                                sigma=synthesize(cc, basis), p=p.copy(),
                                v=v.copy()))
        st = SpectralState(t=t, a=aa, b=bb, c=cc)
        mats = assemble_matrices(st, v, model, basis)
        da, _, dc = rhs(aa, bb, cc, mats, model)
        return da, dc

    for n in range(steps):
        record = t if (sample_every > 0 and n % sample_every == 0) else None
        k1a, k1c = derivative(a, c, record)
        k2a, k2c = derivative(a + 0.5 * dt * k1a, c + 0.5 * dt * k1c, None)
        k3a, k3c = derivative(a + 0.5 * dt * k2a, c + 0.5 * dt * k2c, None)
        k4a, k4c = derivative(a + dt * k3a, c + dt * k3c, None)
        a = a + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        c = c + (dt / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        t = state0.t + (n + 1) * dt
        a_hist[n + 1], c_hist[n + 1], times[n + 1] = a, c, t
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise SpectralBlowup(f"non-finite coefficients at t={t:g}")

    derivative(a, c, t)  # sample the final state (and validate it)
    return GalerkinResult(times=times, a=a_hist, c=c_hist, states=states,
                          flow_iterations=flow_iters)
