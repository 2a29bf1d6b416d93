"""Semi-implicit time stepping for the coupled phase/nutrient/flow system.

One step from t_n advances in three stages:

  (i)   Brinkman solve with capillary forcing assembled from the old fields,
        giving the velocity and pressure used by both transport equations;
  (ii)  phase update with the stabilized linear splitting: psi'(phi_n) kept
        explicit plus s/eps (phi' - phi_n), surface term and mu-feedback of
        the sources implicit.  The chemical potential is eliminated from the
        two-field block, the single-field system is solved with BiCGStab and
        mu' is then evaluated exactly from phi', so the constitutive relation
        holds to machine precision;
  (iii) nutrient update with implicit Robin-wall diffusion, the fresh phi'
        in the cross-diffusion flux and explicit upwind convection.

After (ii) and (iii) the field is shifted by a spatial constant (of the order
of the Krylov tolerance) chosen so the integral mass ledgers close exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FaceField, Grid, State, integrate_cell
from .constitutive import ModelSpec, mobilities, potential_eval, sources, viscosities
from .elliptic import (
    SolveReport,
    SolverOptions,
    StencilOperator,
    advective_boundary_flux,
    apply_neumann_laplacian,
    harmonic_face_coefficients,
    robin_influx,
    robin_linear,
    robin_source,
    solve_general,
    solve_spd,
    upwind_div,
)
from .brinkman import (
    BrinkmanProblem,
    BrinkmanSolution,
    _pack,
    capillary_force,
    solve_brinkman,
)
from . import diagnostics


@dataclass
class SchemeOptions:
    """Scheme knobs: step size, stabilization, solver settings, cadence."""

    dt: float
    s: float = 2.0               # stabilization, >= sup psi''/2 on the visited range
    flow: bool = True            # solve the Brinkman system (else v = 0, p = 0)
    phase_tol: float = 1e-12
    nutrient_tol: float = 1e-12
    flow_tol: float = 1e-11
    max_iters: int = 40000
    snapshot_every: int = 0      # keep every k-th state in the run record (0: ends only)
    phi_abort: float = 10.0      # range-explosion guard

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.s < 0.0:
            raise ValueError(f"stabilization must be non-negative, got {self.s}")


@dataclass
class SimSpec:
    model: ModelSpec
    scheme: SchemeOptions


@dataclass
class StepReport:
    t: float
    dt: float
    flow: SolveReport | None
    phase: SolveReport
    nutrient: SolveReport
    div_residual: float
    phi_min: float
    phi_max: float
    energy_before: float
    energy_after: float
    ledger_phi: float
    ledger_sigma: float

    @property
    def iterations_total(self) -> int:
        total = self.phase.iterations + self.nutrient.iterations
        if self.flow is not None:
            total += self.flow.iterations
        return total


class StepFailure(RuntimeError):
    """A step could not be completed; carries whatever was computed so far."""

    def __init__(self, message: str, partial: "RunResult | None" = None) -> None:
        super().__init__(message)
        self.partial = partial


def _unit_faces(grid: Grid) -> FaceField:
    return FaceField(np.ones((grid.nx + 1, grid.ny)), np.ones((grid.nx, grid.ny + 1)))


def chemical_potential(phi: np.ndarray, sigma: np.ndarray,
                       model: ModelSpec) -> np.ndarray:
    """Diagnostic mu(phi, sigma) = psi'(phi)/eps - eps lap(phi) - chi_phi sigma."""
    eps = model.params.epsilon
    _, dpsi = potential_eval(phi, model.potential)
    lap = apply_neumann_laplacian(phi, _unit_faces(model.grid), model.grid)
    return dpsi / eps - eps * lap - model.params.chi_phi * sigma


def initial_state(phi0: np.ndarray, sigma0: np.ndarray, model: ModelSpec) -> State:
    """Assemble a consistent rest state at t = 0 (mu from the fields, v = p = 0)."""
    g = model.grid
    mu0 = chemical_potential(phi0, sigma0, model)
    return State(t=0.0,
                 phi=np.array(phi0, dtype=float),
                 mu=mu0,
                 sigma=np.array(sigma0, dtype=float),
                 p=np.zeros(g.shape),
                 v=FaceField.zeros(g))


# ---------------------------------------------------------------------------
# Stage solvers
# ---------------------------------------------------------------------------

def solve_flow(state: State, specs: SimSpec) -> BrinkmanSolution:
    """Brinkman solve with coefficients and forces from the given state."""
    model = specs.model
    g, p = model.grid, model.params
    eta, lam = viscosities(state.phi, model.mobvis)
    force = capillary_force(state.phi, state.sigma, state.mu, p, g)
    src = sources(state.phi, state.sigma, state.mu, model.source, p)
    problem = BrinkmanProblem(g, eta, lam, p.nu, force, src.gamma_v)
    opts = SolverOptions(tol=specs.scheme.flow_tol, max_iters=specs.scheme.max_iters,
                         x0=_pack(state.v.u, state.v.w, state.p))
    sol = solve_brinkman(problem, opts)
    if not sol.report.converged:
        raise StepFailure(
            f"flow solve stalled at t={state.t:g}: rel residual "
            f"{sol.report.rel_residual:.3e} after {sol.report.iterations} iterations")
    return sol


def step_phase(state: State, v_new: FaceField, dt: float,
               specs: SimSpec) -> tuple[np.ndarray, np.ndarray, SolveReport]:
    """Advance the phase field; returns (phi', mu', solver report).

    Solves  phi' + dt L_m[(s/eps) phi' - eps lap phi' + c] = rhs  where
    L_m = -div(m(phi_n) grad .) + theta_phi and c collects the explicit
    parts of mu'; afterwards mu' is evaluated from phi' exactly.
    """
    model, sc = specs.model, specs.scheme
    g, p = model.grid, model.params
    eps, s = p.epsilon, sc.s
    phi_n, sigma_n = state.phi, state.sigma

    m_cell, _ = mobilities(phi_n, model.mobvis)
    m_faces = harmonic_face_coefficients(m_cell, g)
    ones = _unit_faces(g)
    src = sources(phi_n, sigma_n, state.mu, model.source, p)
    theta = src.theta_phi

    _, dpsi = potential_eval(phi_n, model.potential)
    c_lin = dpsi / eps - (s / eps) * phi_n - p.chi_phi * sigma_n

    def a_eps(f: np.ndarray) -> np.ndarray:
        return (s / eps) * f - eps * apply_neumann_laplacian(f, ones, g)

    def l_m(f: np.ndarray) -> np.ndarray:
        return -apply_neumann_laplacian(f, m_faces, g) + theta * f

    def apply(f: np.ndarray) -> np.ndarray:
        return f + dt * l_m(a_eps(f))

    conv = upwind_div(phi_n, v_new, g)
    rhs = phi_n + dt * (src.lambda_phi - conv) - dt * l_m(c_lin)
    # With constant mobility and constant theta the two factors are commuting
    # polynomials in the Neumann Laplacian, so the product is SPD and CG
    # applies; otherwise fall back to BiCGStab.
    spd = (model.mobvis.m.lo == model.mobvis.m.hi
           and float(np.ptp(theta)) == 0.0)
    op = StencilOperator(apply, g.shape, symmetric=spd,
                         description="phase update, chemical potential eliminated")
    opts = SolverOptions(tol=sc.phase_tol, max_iters=sc.max_iters, x0=phi_n.copy())
    phi_new, rep = solve_spd(op, rhs, opts) if spd else solve_general(op, rhs, opts)
    if not rep.converged:
        raise StepFailure(
            f"phase solve stalled at t={state.t:g}: rel residual "
            f"{rep.rel_residual:.3e} after {rep.iterations} iterations")
    mu_new = a_eps(phi_new) + c_lin

    # constant shift closing the integral ledger exactly
    gamma_new = src.lambda_phi - theta * mu_new
    mismatch = (integrate_cell(phi_new, g) - integrate_cell(phi_n, g)
                - dt * (integrate_cell(gamma_new, g)
                        - advective_boundary_flux(phi_n, v_new, g)))
    phi_new = phi_new - mismatch / g.area

    peak = float(np.max(np.abs(phi_new)))
    if not np.isfinite(peak) or peak > sc.phi_abort:
        raise StepFailure(
            f"phase range explosion at t={state.t:g}: max|phi| = {peak:g}")
    return phi_new, mu_new, rep


def step_nutrient(state: State, v_new: FaceField, phi_new: np.ndarray,
                  mu_new: np.ndarray, dt: float,
                  specs: SimSpec) -> tuple[np.ndarray, SolveReport]:
    """Advance the nutrient; returns (sigma', solver report).

    Implicit diffusion chi_sigma div(n(phi') grad sigma') with Robin walls,
    the cross flux -chi_phi div(n(phi') grad phi') and the sources evaluated
    with the fresh mu', convection explicit upwind.
    """
    model, sc = specs.model, specs.scheme
    g, p = model.grid, model.params
    sigma_n = state.sigma

    _, n_cell = mobilities(phi_new, model.mobvis)
    n_faces = harmonic_face_coefficients(n_cell, g)
    chi_faces = FaceField(p.chi_sigma * n_faces.u, p.chi_sigma * n_faces.w)
    src = sources(state.phi, sigma_n, state.mu, model.source, p)
    gamma_sig = src.lambda_sigma - src.theta_sigma * mu_new
    sinf = p.sigma_inf.as_traces(g)

    def apply(f: np.ndarray) -> np.ndarray:
        return f - dt * robin_linear(f, chi_faces, p.b, g)

    conv = upwind_div(sigma_n, v_new, g)
    rhs = sigma_n + dt * (robin_source(p.b, sinf, g)
                          - p.chi_phi * apply_neumann_laplacian(phi_new, n_faces, g)
                          - gamma_sig - conv)
    op = StencilOperator(apply, g.shape, symmetric=False,
                         description="nutrient update, Robin walls")
    opts = SolverOptions(tol=sc.nutrient_tol, max_iters=sc.max_iters, x0=sigma_n.copy())
    sigma_new, rep = solve_general(op, rhs, opts)
    if not rep.converged:
        raise StepFailure(
            f"nutrient solve stalled at t={state.t:g}: rel residual "
            f"{rep.rel_residual:.3e} after {rep.iterations} iterations")

    # constant shift closing the sigma ledger exactly; the shift moves the
    # extrapolated wall trace by the same constant, hence the denominator
    mismatch = (integrate_cell(sigma_new, g) - integrate_cell(sigma_n, g)
                - dt * (-integrate_cell(gamma_sig, g)
                        + robin_influx(sigma_new, p.b, sinf, g)
                        - advective_boundary_flux(sigma_n, v_new, g)))
    sigma_new = sigma_new - mismatch / (g.area + dt * p.b * g.perimeter)
    if not np.all(np.isfinite(sigma_new)):
        raise StepFailure(f"nutrient field lost finiteness at t={state.t:g}")
    return sigma_new, rep


def step(state: State, dt: float, specs: SimSpec) -> tuple[State, StepReport]:
    """One full step: flow, then phase, then nutrient, then the ledgers."""
    model = specs.model
    g = model.grid
    e_before = diagnostics.energy(state, model)

    flow_report = None
    div_residual = 0.0
    if specs.scheme.flow:
        sol = solve_flow(state, specs)
        v_new, p_new = sol.v, sol.p
        flow_report = sol.report
        div_residual = sol.divergence_residual
    else:
        v_new, p_new = FaceField.zeros(g), np.zeros(g.shape)

    phi_new, mu_new, phase_rep = step_phase(state, v_new, dt, specs)
    sigma_new, nut_rep = step_nutrient(state, v_new, phi_new, mu_new, dt, specs)

    new = State(t=state.t + dt, phi=phi_new, mu=mu_new, sigma=sigma_new,
                p=p_new, v=v_new)
    ledger = diagnostics.mass_balances(state, new, dt, model)
    report = StepReport(
        t=new.t, dt=dt, flow=flow_report, phase=phase_rep, nutrient=nut_rep,
        div_residual=div_residual,
        phi_min=float(np.min(phi_new)), phi_max=float(np.max(phi_new)),
        energy_before=e_before, energy_after=diagnostics.energy(new, model),
        ledger_phi=ledger.phi_residual, ledger_sigma=ledger.sigma_residual)
    return new, report


# ---------------------------------------------------------------------------
# Fixed-step march
# ---------------------------------------------------------------------------

ROW_FIELDS = (
    "t", "energy", "mass_phi", "mass_sigma", "diss_mu", "diss_nsigma",
    "diss_visc", "bnd_sigma_sq", "src_phi_mu", "src_sigma_N", "bnd_income",
    "budget_residual", "div_residual", "phi_min", "phi_max", "cg_iters_total",
)


@dataclass
class RunResult:
    rows: list[dict]                 # one diagnostics row per time level
    reports: list[StepReport]
    states: list[State]              # sampled per snapshot_every, ends included
    budgets: list["diagnostics.EnergyBudget"]

    @property
    def final_state(self) -> State:
        return self.states[-1]


def _initial_row(state: State, model: ModelSpec) -> dict:
    g = model.grid
    return {
        "t": state.t,
        "energy": diagnostics.energy(state, model),
        "mass_phi": integrate_cell(state.phi, g),
        "mass_sigma": integrate_cell(state.sigma, g),
        "diss_mu": 0.0, "diss_nsigma": 0.0, "diss_visc": 0.0,
        "bnd_sigma_sq": 0.0, "src_phi_mu": 0.0, "src_sigma_N": 0.0,
        "bnd_income": 0.0, "budget_residual": 0.0, "div_residual": 0.0,
        "phi_min": float(np.min(state.phi)), "phi_max": float(np.max(state.phi)),
        "cg_iters_total": 0,
    }


def run(state0: State, n_steps: int, specs: SimSpec) -> RunResult:
    """March n_steps fixed steps, collecting one diagnostics row per level.

    The row at t = 0 carries the initial energy and masses with zero rates.
    On a failed step the partial record is attached to the raised
    StepFailure so callers can keep what was completed.
    """
    model, sc = specs.model, specs.scheme
    g = model.grid
    state = state0
    rows = [_initial_row(state0, model)]
    reports: list[StepReport] = []
    budgets: list[diagnostics.EnergyBudget] = []
    states = [state0.copy()]
    try:
        for k in range(n_steps):
            new, rep = step(state, sc.dt, specs)
            budget = diagnostics.energy_budget(state, new, sc.dt, model)
            rows.append({
                "t": new.t,
                "energy": budget.e_after,
                "mass_phi": integrate_cell(new.phi, g),
                "mass_sigma": integrate_cell(new.sigma, g),
                "diss_mu": budget.diss_mu,
                "diss_nsigma": budget.diss_nsigma,
                "diss_visc": budget.diss_visc,
                "bnd_sigma_sq": budget.bnd_sigma_sq,
                "src_phi_mu": budget.src_phi_mu,
                "src_sigma_N": budget.src_sigma_n,
                "bnd_income": budget.bnd_income,
                "budget_residual": budget.residual,
                "div_residual": rep.div_residual,
                "phi_min": rep.phi_min,
                "phi_max": rep.phi_max,
                "cg_iters_total": rep.iterations_total,
            })
            reports.append(rep)
            budgets.append(budget)
            state = new
            last = k == n_steps - 1
            if (sc.snapshot_every > 0 and (k + 1) % sc.snapshot_every == 0) or last:
                states.append(state.copy())
    except StepFailure as exc:
        if state is not states[-1] and (not states or states[-1].t != state.t):
            states.append(state.copy())
        exc.partial = RunResult(rows, reports, states, budgets)
        raise
    return RunResult(rows, reports, states, budgets)
