"""Run diagnostics: energy, per-step budget, mass ledgers, norms, Gronwall.

The budget routine mirrors the scheme's own quadratures term by term (same
face coefficients, same upwind fluxes, same wall traces), so its residual
contains only the time-discretization remainder and the Krylov floors, and
shrinks linearly with the step size.  The weak-form residuals at the bottom
of the module deliberately do NOT mirror the scheme: they test snapshots
against smooth cosine test functions with centered differences, which makes
them an independent consistency probe.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    EdgeTraces,
    FaceField,
    Grid,
    State,
    extrapolate_to_walls,
    face_to_center,
    integrate_cell,
)
from .constitutive import (
    ModelSpec,
    mobilities,
    nutrient_energy,
    potential_eval,
    sources,
    viscosities,
)
from .elliptic import (
    SolverOptions,
    StencilOperator,
    advective_boundary_flux,
    apply_neumann_laplacian,
    face_gradient,
    harmonic_face_coefficients,
    robin_influx,
    solve_spd,
    upwind_div,
)
from .brinkman import BrinkmanProblem, capillary_force, energy_parts, strain_rates


def _unit_faces(grid: Grid) -> FaceField:
    return FaceField(np.ones((grid.nx + 1, grid.ny)), np.ones((grid.nx, grid.ny + 1)))


def _grad_sq(f: np.ndarray, grid: Grid) -> float:
    g = face_gradient(f, grid)
    return (float(np.sum(g.u ** 2)) + float(np.sum(g.w ** 2))) * grid.cell_area


# ---------------------------------------------------------------------------
# Free energy and its per-step budget
# ---------------------------------------------------------------------------

def energy(state: State, model: ModelSpec) -> float:
    """Total free energy: bulk potential, interfacial gradient, nutrient part.

    E = int 1/eps psi(phi) + eps/2 |grad phi|^2 + N(phi, sigma),
    with the gradient measured on faces (zero at the walls), matching the
    stencil the time stepper dissipates.
    """
    g = model.grid
    eps = model.params.epsilon
    psi, _ = potential_eval(state.phi, model.potential)
    nut, _, _ = nutrient_energy(state.phi, state.sigma, model.params)
    bulk = integrate_cell(psi / eps + nut, g)
    return float(bulk + 0.5 * eps * _grad_sq(state.phi, g))


@dataclass
class EnergyBudget:
    """One step of the discrete energy identity.

    residual = (e_after - e_before)/dt + dissipation - sources - boundary
    income - convective work; all terms are quadratures of the fields the
    step actually produced.
    """

    e_before: float
    e_after: float
    diss_mu: float        # int m(phi_n) |grad mu'|^2
    diss_nsigma: float    # int n(phi') |grad N_sigma'|^2
    diss_visc: float      # 2 eta |Dv|^2 + lam (div v)^2 + nu |v|^2
    bnd_sigma_sq: float   # b chi_sigma * wall quadrature of sigma' trace * sigma'
    src_phi_mu: float     # int Gamma_phi' mu'
    src_sigma_n: float    # -int Gamma_sigma' N_sigma'
    bnd_income: float     # b * wall quadrature of (sigma_inf N_sigma' - trace chi_phi (1-phi'))
    conv_work: float      # force/pressure work minus upwind transport pairings
    residual: float

    def scale(self) -> float:
        return max(1.0, abs(self.e_after))


def energy_budget(prev: State, new: State, dt: float, model: ModelSpec) -> EnergyBudget:
    """Recompute every term of the step energy identity from the two states.

    Uses the same time levels as the scheme: mobilities m(phi_n) and n(phi'),
    convection of the old fields by the new velocity, source splits
    Lambda(old) - theta(old) mu', and the extrapolated sigma' wall traces.
    """
    g, p = model.grid, model.params
    e0 = energy(prev, model)
    e1 = energy(new, model)

    m_cell, _ = mobilities(prev.phi, model.mobvis)
    _, n_cell = mobilities(new.phi, model.mobvis)
    m_faces = harmonic_face_coefficients(m_cell, g)
    n_faces = harmonic_face_coefficients(n_cell, g)

    gmu = face_gradient(new.mu, g)
    diss_mu = (float(np.sum(m_faces.u * gmu.u ** 2))
               + float(np.sum(m_faces.w * gmu.w ** 2))) * g.cell_area

    nhat = p.chi_sigma * new.sigma - p.chi_phi * new.phi
    gnh = face_gradient(nhat, g)
    diss_nsigma = (float(np.sum(n_faces.u * gnh.u ** 2))
                   + float(np.sum(n_faces.w * gnh.w ** 2))) * g.cell_area

    _, nsig, _ = nutrient_energy(new.phi, new.sigma, p)
    tr = extrapolate_to_walls(new.sigma, g)
    sinf = p.sigma_inf.as_traces(g)
    one_minus_phi = 1.0 - new.phi
    income = p.b * (
        float(np.sum(sinf.left * nsig[0, :] - tr.left * p.chi_phi * one_minus_phi[0, :])) * g.hy
        + float(np.sum(sinf.right * nsig[-1, :] - tr.right * p.chi_phi * one_minus_phi[-1, :])) * g.hy
        + float(np.sum(sinf.bottom * nsig[:, 0] - tr.bottom * p.chi_phi * one_minus_phi[:, 0])) * g.hx
        + float(np.sum(sinf.top * nsig[:, -1] - tr.top * p.chi_phi * one_minus_phi[:, -1])) * g.hx
    )
    bnd_sigma_sq = p.b * p.chi_sigma * (
        float(np.sum(tr.left * new.sigma[0, :]) + np.sum(tr.right * new.sigma[-1, :])) * g.hy
        + float(np.sum(tr.bottom * new.sigma[:, 0]) + np.sum(tr.top * new.sigma[:, -1])) * g.hx
    )

    src_prev = sources(prev.phi, prev.sigma, prev.mu, model.source, p)
    gamma_phi = src_prev.lambda_phi - src_prev.theta_phi * new.mu
    gamma_sig = src_prev.lambda_sigma - src_prev.theta_sigma * new.mu
    src_phi_mu = integrate_cell(gamma_phi * new.mu, g)
    src_sigma_n = -integrate_cell(gamma_sig * nsig, g)

    eta, lam = viscosities(prev.phi, model.mobvis)
    force = capillary_force(prev.phi, prev.sigma, prev.mu, p, g)
    problem = BrinkmanProblem(g, eta, lam, p.nu, force, src_prev.gamma_v)
    parts = energy_parts(problem, new.v, new.p)
    diss_visc = parts["dissipation"]
    conv_work = (parts["force_work"] + parts["pressure_work"]
                 - integrate_cell(upwind_div(prev.phi, new.v, g) * new.mu, g)
                 - integrate_cell(upwind_div(prev.sigma, new.v, g) * nsig, g))

    residual = ((e1 - e0) / dt + diss_mu + diss_nsigma + diss_visc + bnd_sigma_sq
                - src_phi_mu - src_sigma_n - income - conv_work)
    return EnergyBudget(e0, e1, diss_mu, diss_nsigma, diss_visc, bnd_sigma_sq,
                        src_phi_mu, src_sigma_n, income, conv_work, residual)


# ---------------------------------------------------------------------------
# Integral mass ledgers
# ---------------------------------------------------------------------------

@dataclass
class BalanceLedger:
    phi_change: float
    phi_expected: float
    sigma_change: float
    sigma_expected: float

    @property
    def phi_residual(self) -> float:
        return self.phi_change - self.phi_expected

    @property
    def sigma_residual(self) -> float:
        return self.sigma_change - self.sigma_expected


def mass_balances(prev: State, new: State, dt: float, model: ModelSpec) -> BalanceLedger:
    """Integral ledgers of one step, with the scheme's own flux conventions.

    phi:   d(int phi)   = dt [ int (Lambda - theta mu') - outward upwind flux ]
    sigma: d(int sigma) = dt [ -int Gamma_sigma' + Robin income(sigma')
                               - outward upwind flux ]
    """
    g, p = model.grid, model.params
    src = sources(prev.phi, prev.sigma, prev.mu, model.source, p)
    gamma_phi = src.lambda_phi - src.theta_phi * new.mu
    gamma_sig = src.lambda_sigma - src.theta_sigma * new.mu
    sinf = p.sigma_inf.as_traces(g)

    phi_change = integrate_cell(new.phi, g) - integrate_cell(prev.phi, g)
    phi_expected = dt * (integrate_cell(gamma_phi, g)
                         - advective_boundary_flux(prev.phi, new.v, g))
    sigma_change = integrate_cell(new.sigma, g) - integrate_cell(prev.sigma, g)
    sigma_expected = dt * (-integrate_cell(gamma_sig, g)
                           + robin_influx(new.sigma, p.b, sinf, g)
                           - advective_boundary_flux(prev.sigma, new.v, g))
    return BalanceLedger(phi_change, phi_expected, sigma_change, sigma_expected)


# ---------------------------------------------------------------------------
# A-priori norm quantities
# ---------------------------------------------------------------------------

@dataclass
class NormEstimates:
    """The quantities controlled by the continuous a-priori estimate, computed
    on a sampled trajectory (sup norms over samples, trapezoidal in time)."""

    sup_h1_phi: float
    l2h2_phi: float        # via the discrete Laplacian
    dual_dt_phi: float     # H^1-dual proxy of the discrete rate
    sup_l2_sigma: float
    l2h1_sigma: float
    l2h1_mu: float
    bnd_l2_sigma: float    # sqrt(b) * L^2 of the wall trace, integrated in time
    l43_p: float           # L^{4/3} in time of the pressure L^2 norm
    l2h1_v: float
    l2l32_div_phiv: float  # L^2 in time of the L^{3/2} norm of div(phi v)

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def _trapez(values: np.ndarray, times: np.ndarray) -> float:
    if len(times) < 2:
        return 0.0
    dt = np.diff(times)
    mid = 0.5 * (values[1:] + values[:-1])
    return float(np.sum(mid * dt))


def _dual_proxy(rate: np.ndarray, grid: Grid) -> float:
    """|| grad (-lap + I)^{-1} rate ||_{L^2}, one CG solve."""
    ones = _unit_faces(grid)

    def apply(f: np.ndarray) -> np.ndarray:
        return f - apply_neumann_laplacian(f, ones, grid)

    op = StencilOperator(apply, grid.shape, symmetric=True,
                         description="dual-norm shift -lap + I")
    x, rep = solve_spd(op, rate, SolverOptions(tol=1e-11, max_iters=10000))
    if not rep.converged:
        raise RuntimeError(f"dual-norm solve stalled: {rep}")
    return float(np.sqrt(_grad_sq(x, grid)))


def norm_estimates(states: Sequence[State], model: ModelSpec) -> NormEstimates:
    if len(states) < 2:
        raise ValueError("need at least two samples to integrate in time")
    g, p = model.grid, model.params
    times = np.array([s.t for s in states], dtype=float)
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("sample times must be strictly increasing")
    vol = g.cell_area
    vu = np.full((g.nx + 1, g.ny), vol)
    vu[0, :] *= 0.5
    vu[-1, :] *= 0.5
    vw = np.full((g.nx, g.ny + 1), vol)
    vw[:, 0] *= 0.5
    vw[:, -1] *= 0.5

    h1_phi, lap_phi_sq = [], []
    l2_sig, h1_sig_sq, h1_mu_sq = [], [], []
    trace_sq, p_l2, v_h1_sq, div_l32_sq = [], [], [], []
    ones = _unit_faces(g)
    for s in states:
        h1_phi.append(np.sqrt(integrate_cell(s.phi ** 2, g) + _grad_sq(s.phi, g)))
        lap = apply_neumann_laplacian(s.phi, ones, g)
        lap_phi_sq.append(integrate_cell(lap ** 2, g))
        l2_sig.append(np.sqrt(integrate_cell(s.sigma ** 2, g)))
        h1_sig_sq.append(integrate_cell(s.sigma ** 2, g) + _grad_sq(s.sigma, g))
        h1_mu_sq.append(integrate_cell(s.mu ** 2, g) + _grad_sq(s.mu, g))
        tr = extrapolate_to_walls(s.sigma, g)
        trace_sq.append(float(np.sum(tr.left ** 2) + np.sum(tr.right ** 2)) * g.hy
                        + float(np.sum(tr.bottom ** 2) + np.sum(tr.top ** 2)) * g.hx)
        p_l2.append(np.sqrt(integrate_cell(s.p ** 2, g)))
        dxx = (s.v.u[1:, :] - s.v.u[:-1, :]) / g.hx
        dyy = (s.v.w[:, 1:] - s.v.w[:, :-1]) / g.hy
        dudy = (s.v.u[1:-1, 1:] - s.v.u[1:-1, :-1]) / g.hy
        dwdx = (s.v.w[1:, 1:-1] - s.v.w[:-1, 1:-1]) / g.hx
        vsq = float(np.sum(s.v.u ** 2 * vu)) + float(np.sum(s.v.w ** 2 * vw))
        gradsq = (float(np.sum(dxx ** 2)) + float(np.sum(dyy ** 2))
                  + float(np.sum(dudy ** 2)) + float(np.sum(dwdx ** 2))) * vol
        v_h1_sq.append(vsq + gradsq)
        dphiv = upwind_div(s.phi, s.v, g)
        div_l32_sq.append(integrate_cell(np.abs(dphiv) ** 1.5, g) ** (4.0 / 3.0))

    dual_sq = 0.0
    for k in range(len(states) - 1):
        h = times[k + 1] - times[k]
        rate = (states[k + 1].phi - states[k].phi) / h
        dual_sq += _dual_proxy(rate, g) ** 2 * h

    return NormEstimates(
        sup_h1_phi=float(np.max(h1_phi)),
        l2h2_phi=float(np.sqrt(_trapez(np.array(lap_phi_sq), times))),
        dual_dt_phi=float(np.sqrt(dual_sq)),
        sup_l2_sigma=float(np.max(l2_sig)),
        l2h1_sigma=float(np.sqrt(_trapez(np.array(h1_sig_sq), times))),
        l2h1_mu=float(np.sqrt(_trapez(np.array(h1_mu_sq), times))),
        bnd_l2_sigma=float(np.sqrt(p.b * _trapez(np.array(trace_sq), times))),
        l43_p=float(_trapez(np.array(p_l2) ** (4.0 / 3.0), times) ** 0.75),
        l2h1_v=float(np.sqrt(_trapez(np.array(v_h1_sq), times))),
        l2l32_div_phiv=float(np.sqrt(_trapez(np.array(div_l32_sq), times))),
    )


# ---------------------------------------------------------------------------
# Gronwall comparison
# ---------------------------------------------------------------------------

@dataclass
class GronwallResult:
    bound: np.ndarray     # alpha(s) + int_0^s alpha beta exp(int_t^s beta) dt
    lhs: np.ndarray       # u(s) + int_0^s v dt (left-endpoint quadrature)
    hypothesis_ok: bool   # u(s) + int v <= alpha(s) + int beta u at all samples
    verified: bool        # lhs <= bound at all samples

    def margin(self) -> np.ndarray:
        return self.bound - self.lhs


def gronwall_bound(times: np.ndarray, alpha: np.ndarray | float,
                   beta: np.ndarray | float, u: np.ndarray,
                   v: np.ndarray | float = 0.0) -> GronwallResult:
    """Integral comparison bound with piecewise-constant data.

    alpha and beta are taken constant on each subinterval [t_i, t_{i+1})
    (left endpoint); the exponential kernel is then integrated in closed
    form, so beta = 0 returns alpha exactly and constant alpha, beta return
    alpha * exp(beta s) exactly, for any sample spacing.
    """
    t = np.asarray(times, dtype=float)
    n = t.size
    if n < 1 or np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be non-empty and strictly increasing")
    a = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
    b = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    uu = np.asarray(u, dtype=float)
    vv = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    if uu.shape != (n,):
        raise ValueError("u must have one value per sample")

    dt = np.diff(t)
    # left-endpoint quadratures of int v and int beta u
    int_v = np.concatenate([[0.0], np.cumsum(vv[:-1] * dt)])
    int_bu = np.concatenate([[0.0], np.cumsum(b[:-1] * uu[:-1] * dt)])
    lhs = uu + int_v
    hyp = lhs <= a + int_bu + 1e-12 * np.maximum(1.0, np.abs(a + int_bu))

    # cumulative exponent B_j = int_0^{t_j} beta
    big_b = np.concatenate([[0.0], np.cumsum(b[:-1] * dt)])
    # subinterval i contributes alpha_i (e^{beta_i dt_i} - 1) e^{B_j - B_{i+1}}
    core = a[:-1] * np.expm1(b[:-1] * dt) * np.exp(-big_b[1:])
    csum = np.concatenate([[0.0], np.cumsum(core)])
    bound = a + np.exp(big_b) * csum

    tol = 1e-12 * np.maximum(1.0, np.abs(bound))
    return GronwallResult(bound, lhs, bool(np.all(hyp)),
                          bool(np.all(lhs <= bound + tol)))


# ---------------------------------------------------------------------------
# Weak-form residual probe
# ---------------------------------------------------------------------------

def _test_modes(count: int) -> list[tuple[int, int]]:
    pairs = [(i, j) for i in range(count + 2) for j in range(count + 2)
             if (i, j) != (0, 0)]
    pairs.sort(key=lambda ij: (ij[0] ** 2 + ij[1] ** 2, ij[0], ij[1]))
    return pairs[:count]


@dataclass
class WeakResiduals:
    """Residuals of the weak-form equations against cosine test functions.

    Rows follow the sample list (intervals for the time-dependent equations,
    samples for the algebraic ones); columns follow the test list, constant
    test first.  `div` is the plain L^2 norm of div(v) - Gamma_v per sample.
    """

    phi: np.ndarray       # (n_samples-1, n_tests)
    mu: np.ndarray        # (n_samples,   n_tests)
    sigma: np.ndarray     # (n_samples-1, n_tests)
    momentum: np.ndarray  # (n_samples,   2*n_tests)
    div: np.ndarray       # (n_samples,)

    def max_abs(self) -> dict[str, float]:
        return {name: float(np.max(np.abs(arr))) if arr.size else 0.0
                for name, arr in [("phi", self.phi), ("mu", self.mu),
                                  ("sigma", self.sigma),
                                  ("momentum", self.momentum), ("div", self.div)]}


def _centered_gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    g = face_gradient(f, grid)
    return 0.5 * (g.u[1:, :] + g.u[:-1, :]), 0.5 * (g.w[:, 1:] + g.w[:, :-1])


def weak_residuals(states: Sequence[State], model: ModelSpec,
                   n_modes: int = 5) -> WeakResiduals:
    """Test the snapshots against 1 + n_modes cosine test functions.

    Deliberately not the scheme's discretization: analytic test gradients,
    centered convection v . grad q, cell-centered coefficient products.  The
    constant test of the phase equation reproduces the mass-ledger rate.
    """
    g, p = model.grid, model.params
    x2, y2 = g.cell_centers()
    xs = (np.arange(g.nx) + 0.5) * g.hx
    ys = (np.arange(g.ny) + 0.5) * g.hy
    vol = g.cell_area

    tests = [(np.ones(g.shape), np.zeros(g.shape), np.zeros(g.shape), (0, 0))]
    for (i, j) in _test_modes(n_modes):
        kx, ky = i * np.pi / g.Lx, j * np.pi / g.Ly
        w = np.cos(kx * x2) * np.cos(ky * y2)
        wx = -kx * np.sin(kx * x2) * np.cos(ky * y2)
        wy = -ky * np.cos(kx * x2) * np.sin(ky * y2)
        tests.append((w, wx, wy, (i, j)))

    # wall values of each test for the Robin pairing
    def edge_values(i: int, j: int) -> tuple[np.ndarray, ...]:
        kx, ky = i * np.pi / g.Lx, j * np.pi / g.Ly
        left = np.cos(ky * ys)                      # x = 0
        right = np.cos(kx * g.Lx) * np.cos(ky * ys)
        bottom = np.cos(kx * xs)                    # y = 0
        top = np.cos(ky * g.Ly) * np.cos(kx * xs)
        return left, right, bottom, top

    edge_vals = [edge_values(i, j) for (_, _, _, (i, j)) in tests]
    sinf = p.sigma_inf.as_traces(g)

    nt = len(tests)
    ns = len(states)
    r_phi = np.zeros((max(ns - 1, 0), nt))
    r_sigma = np.zeros((max(ns - 1, 0), nt))
    r_mu = np.zeros((ns, nt))
    r_mom = np.zeros((ns, 2 * nt))
    r_div = np.zeros(ns)

    for k, s in enumerate(states):
        src = sources(s.phi, s.sigma, s.mu, model.source, p)
        _, dpsi = potential_eval(s.phi, model.potential)
        gpx, gpy = _centered_gradient(s.phi, g)
        gsx, gsy = _centered_gradient(s.sigma, g)
        gmx, gmy = _centered_gradient(s.mu, g)
        vx, vy = face_to_center(s.v)
        _, nsig, _ = nutrient_energy(s.phi, s.sigma, p)
        eta, lam = viscosities(s.phi, model.mobvis)
        dxx, dyy, shear = strain_rates(s.v, g)
        # node shear averaged back to cells (wall nodes carry no shear)
        mean4 = np.zeros(g.shape)
        cnt = np.zeros(g.shape)
        for sl in [(slice(None, -1), slice(None, -1)), (slice(1, None), slice(None, -1)),
                   (slice(None, -1), slice(1, None)), (slice(1, None), slice(1, None))]:
            mean4[sl] += shear
            cnt[sl] += 1.0
        dxy_cells = mean4 / cnt
        div_v = dxx + dyy
        fx = s.mu * gpx + nsig * gsx
        fy = s.mu * gpy + nsig * gsy

        r_div[k] = float(np.sqrt(integrate_cell((div_v - src.gamma_v) ** 2, g)))
        for m, (w, wx, wy, _) in enumerate(tests):
            r_mu[k, m] = (integrate_cell((s.mu - dpsi / p.epsilon
                                          + p.chi_phi * s.sigma) * w, g)
                          - p.epsilon * float(np.sum(gpx * wx + gpy * wy)) * vol)
            mom_x = (float(np.sum(2.0 * eta * (dxx * wx + dxy_cells * wy))) * vol
                     + float(np.sum(lam * div_v * wx)) * vol
                     + p.nu * float(np.sum(vx * w)) * vol
                     - float(np.sum(s.p * wx)) * vol
                     - float(np.sum(fx * w)) * vol)
            mom_y = (float(np.sum(2.0 * eta * (dyy * wy + dxy_cells * wx))) * vol
                     + float(np.sum(lam * div_v * wy)) * vol
                     + p.nu * float(np.sum(vy * w)) * vol
                     - float(np.sum(s.p * wy)) * vol
                     - float(np.sum(fy * w)) * vol)
            r_mom[k, 2 * m] = mom_x
            r_mom[k, 2 * m + 1] = mom_y

        if k == 0:
            continue
        older = states[k - 1]
        h = s.t - older.t
        if h <= 0.0:
            raise ValueError("sample times must be strictly increasing")
        dphi = (s.phi - older.phi) / h
        dsig = (s.sigma - older.sigma) / h
        m_cell, n_cell = mobilities(s.phi, model.mobvis)
        tr = extrapolate_to_walls(s.sigma, g)
        for m, (w, wx, wy, _) in enumerate(tests):
            el, er, eb, et = edge_vals[m]
            r_phi[k - 1, m] = (
                integrate_cell(dphi * w, g)
                + integrate_cell((vx * gpx + vy * gpy) * w, g)
                + integrate_cell(s.phi * src.gamma_v * w, g)
                + float(np.sum(m_cell * (gmx * wx + gmy * wy))) * vol
                - integrate_cell(src.gamma_phi * w, g))
            robin = p.b * (float(np.sum((sinf.left - tr.left) * el)
                                 + np.sum((sinf.right - tr.right) * er)) * g.hy
                           + float(np.sum((sinf.bottom - tr.bottom) * eb)
                                   + np.sum((sinf.top - tr.top) * et)) * g.hx)
            flux_x = n_cell * (p.chi_sigma * gsx - p.chi_phi * gpx)
            flux_y = n_cell * (p.chi_sigma * gsy - p.chi_phi * gpy)
            r_sigma[k - 1, m] = (
                integrate_cell(dsig * w, g)
                + integrate_cell((vx * gsx + vy * gsy) * w, g)
                + integrate_cell(s.sigma * src.gamma_v * w, g)
                + float(np.sum(flux_x * wx + flux_y * wy)) * vol
                - robin
                + integrate_cell(src.gamma_sigma * w, g))

    return WeakResiduals(r_phi, r_mu, r_sigma, r_mom, r_div)
