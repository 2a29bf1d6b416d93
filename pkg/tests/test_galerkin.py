"""Spectral route: basis quality, assembled matrices, RK4 integration."""
import numpy as np
import pytest

from chbsim.constitutive import (
    CoefficientSpec,
    EdgeValues,
    MobilityViscositySpec,
    ModelParams,
    ModelSpec,
    PotentialSpec,
    SourceSpec,
)
from chbsim.core import FaceField, integrate_cell, make_grid
from chbsim.galerkin import (
    GalerkinResult,
    SpectralBlowup,
    SpectralState,
    assemble_matrices,
    boundary_mass,
    build_basis,
    chemical_coeffs,
    integrate,
    project,
    project_initial,
    rhs,
    spectral_energy,
    spectral_to_grid,
    stability_timestep,
    synthesize,
)


def build_model(nx=32, ny=32, Lx=1.0, Ly=1.0, b=1.0, chi_phi=0.5,
                m=1e-2, source=None):
    grid = make_grid(Lx, Ly, nx, ny)
    params = ModelParams(epsilon=0.1, chi_sigma=1.0, chi_phi=chi_phi, nu=1.0,
                         b=b, sigma_inf=EdgeValues.constant(1.0))
    mobvis = MobilityViscositySpec(m=CoefficientSpec.constant(m),
                                   n=CoefficientSpec.constant(0.05),
                                   eta=CoefficientSpec.constant(1.0),
                                   lam=CoefficientSpec.constant(0.0))
    return ModelSpec(grid, params, PotentialSpec.quartic(), mobvis,
                     source or SourceSpec.none())


# ---------------------------------------------------------------------------
# basis
# ---------------------------------------------------------------------------

def test_mode_ordering_and_eigenvalues():
    basis = build_basis(4, make_grid(1.0, 1.0, 32, 32))
    assert basis.modes[0] == (0, 0)
    assert basis.eigenvalues[0] == 0.0
    np.testing.assert_allclose(basis.values[0], 1.0)  # 1/sqrt(area) = 1
    # the two first excited modes are degenerate at pi^2
    np.testing.assert_allclose(basis.eigenvalues[1:3], np.pi ** 2)
    assert set(basis.modes[1:3]) == {(0, 1), (1, 0)}


def test_quadrature_gram_matrix_is_the_identity():
    grid = make_grid(1.0, 1.0, 64, 64)
    basis = build_basis(25, grid)
    vals = basis.values.reshape(basis.k, -1)
    gram = vals @ vals.T * grid.cell_area
    np.testing.assert_allclose(gram, np.eye(basis.k), atol=1e-10)


def test_basis_guard_rejects_underresolved_modes():
    grid = make_grid(1.0, 1.0, 8, 8)  # admits (8//4+1)^2 = 9 modes
    build_basis(9, grid)
    with pytest.raises(ValueError):
        build_basis(10, grid)
    with pytest.raises(ValueError):
        build_basis(0, grid)


def test_project_constant_field():
    grid = make_grid(2.0, 1.0, 32, 16)
    basis = build_basis(3, grid)
    coeffs = project(np.full(grid.shape, 0.7), basis)
    assert coeffs[0] == pytest.approx(0.7 * np.sqrt(grid.area))
    np.testing.assert_allclose(coeffs[1:], 0.0, atol=1e-14)


def test_project_synthesize_round_trip():
    grid = make_grid(1.0, 1.0, 32, 32)
    basis = build_basis(9, grid)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(basis.k)
    back = project(synthesize(coeffs, basis), basis)
    np.testing.assert_allclose(back, coeffs, atol=1e-10)
    a, c = project_initial(basis.values[2], basis.values[4], basis)
    np.testing.assert_allclose(a, np.eye(basis.k)[2], atol=1e-10)
    np.testing.assert_allclose(c, np.eye(basis.k)[4], atol=1e-10)


def test_projection_satisfies_the_bessel_inequality():
    grid = make_grid(1.0, 1.0, 32, 32)
    basis = build_basis(9, grid)
    x, y = grid.cell_centers()
    f = np.tanh(3.0 * (x - 0.4)) * np.cos(2.0 * np.pi * y)
    coeffs = project(f, basis)
    assert float(np.sum(coeffs ** 2)) <= integrate_cell(f * f, grid) + 1e-8


def test_spectral_to_grid_returns_the_synthesized_fields():
    grid = make_grid(1.0, 1.0, 16, 16)
    basis = build_basis(2, grid)
    state = SpectralState(t=0.0, a=np.array([0.5, 0.0]),
                          b=np.array([0.0, 1.0]), c=np.array([0.0, 0.0]))
    phi, mu, sig = spectral_to_grid(state, basis)
    np.testing.assert_allclose(phi, 0.5)
    np.testing.assert_allclose(mu, basis.values[1])
    np.testing.assert_allclose(sig, 0.0)


# ---------------------------------------------------------------------------
# assembled matrices
# ---------------------------------------------------------------------------

def test_stiffness_with_constant_mobility_is_diagonal():
    model = build_model()
    basis = build_basis(8, model.grid)
    state = SpectralState(0.0, np.zeros(8), np.zeros(8), np.zeros(8))
    mats = assemble_matrices(state, FaceField.zeros(model.grid), model, basis)
    np.testing.assert_allclose(mats.s, np.diag(basis.eigenvalues))
    np.testing.assert_allclose(mats.s_m, 1e-2 * np.diag(basis.eigenvalues),
                               atol=1e-9)
    np.testing.assert_allclose(mats.s_n, 0.05 * np.diag(basis.eigenvalues),
                               atol=1e-9)
    np.testing.assert_allclose(mats.d_mat, 0.0, atol=1e-14)  # no volume source


def test_boundary_mass_of_the_constant_mode():
    grid = make_grid(1.0, 1.0, 16, 16)
    basis = build_basis(1, grid)
    m = boundary_mass(basis)
    assert m[0, 0] == pytest.approx(grid.perimeter / grid.area)


def test_convection_matrix_against_trig_quadrature():
    # constant rightward wind; the oracle re-evaluates every mode with its
    # analytic gradient from scratch and sums the quadrature by explicit loops
    model = build_model(nx=16, ny=16)
    g = model.grid
    basis = build_basis(5, g)
    cvel = 0.37
    v = FaceField(np.full((g.nx + 1, g.ny), cvel), np.zeros((g.nx, g.ny + 1)))
    state = SpectralState(0.0, np.zeros(5), np.zeros(5), np.zeros(5))
    mats = assemble_matrices(state, v, model, basis)

    xs = (np.arange(g.nx) + 0.5) * g.hx
    ys = (np.arange(g.ny) + 0.5) * g.hy
    expect = np.zeros((5, 5))
    for r, (i1, j1) in enumerate(basis.modes):
        k1 = np.sqrt((2.0 if i1 else 1.0) * (2.0 if j1 else 1.0) / g.area)
        for s_, (i2, j2) in enumerate(basis.modes):
            k2 = np.sqrt((2.0 if i2 else 1.0) * (2.0 if j2 else 1.0) / g.area)
            acc = 0.0
            for ix in range(g.nx):
                for iy in range(g.ny):
                    w_r = k1 * np.cos(i1 * np.pi * xs[ix]) * np.cos(j1 * np.pi * ys[iy])
                    dwx = -k2 * i2 * np.pi * np.sin(i2 * np.pi * xs[ix]) \
                        * np.cos(j2 * np.pi * ys[iy])
                    acc += w_r * cvel * dwx
            expect[r, s_] = acc * g.cell_area
    np.testing.assert_allclose(mats.c_mat, expect, atol=1e-10)


def test_rhs_assembles_the_coefficient_odes():
    model = build_model(source=SourceSpec.lima(P=0.3, A=0.1, C=0.2, c_gamma_v=0.1))
    basis = build_basis(6, model.grid)
    rng = np.random.default_rng(9)
    a, c = 0.3 * rng.standard_normal(6), 0.3 * rng.standard_normal(6)
    b = chemical_coeffs(a, c, basis, model)
    state = SpectralState(0.0, a, b, c)
    xs = np.linspace(0.0, 1.0, model.grid.nx + 1)
    psi = 0.1 * np.sin(np.pi * xs)[:, None] * np.sin(np.pi * xs)[None, :]
    v = FaceField((psi[:, 1:] - psi[:, :-1]) / model.grid.hy,
                  -(psi[1:, :] - psi[:-1, :]) / model.grid.hx)
    mats = assemble_matrices(state, v, model, basis)
    da, b_out, dc = rhs(a, b, c, mats, model)
    assert b_out is b
    prm = model.params
    conv = mats.c_mat + mats.d_mat
    np.testing.assert_allclose(da, -mats.s_m @ b + mats.g_vec - conv @ a,
                               atol=1e-13)
    np.testing.assert_allclose(
        dc, mats.s_n @ (prm.chi_phi * a - prm.chi_sigma * c) - mats.f_vec
        - conv @ c + prm.b * (mats.sig_vec - mats.m_bnd @ c), atol=1e-13)


def test_zero_state_without_boundary_data_is_stationary():
    model = build_model(b=0.0)
    basis = build_basis(4, model.grid)
    z = np.zeros(4)
    mats = assemble_matrices(SpectralState(0.0, z, z, z),
                             FaceField.zeros(model.grid), model, basis)
    da, _, dc = rhs(z, chemical_coeffs(z, z, basis, model), z, mats, model)
    np.testing.assert_allclose(da, 0.0, atol=1e-14)
    np.testing.assert_allclose(dc, 0.0, atol=1e-14)


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------

def test_single_mode_relaxes_on_the_exact_exponential():
    # with one mode, no sources and no flow only the Robin exchange is left:
    # c' = b (Sig_1 - M_11 c) with M_11 = 4, Sig_1 = 4 sigma_inf on the unit
    # square, so c(t) = 1 + (c0 - 1) exp(-4 b t); the phase coefficient is
    # frozen because every stiffness entry carries the zero eigenvalue
    model = build_model(nx=16, ny=16, b=1.0)
    basis = build_basis(1, model.grid)
    c0 = 0.25
    state0 = SpectralState(0.0, np.array([0.4]), np.zeros(1), np.array([c0]))
    res = integrate(state0, 1e-3, 500, model, basis, flow=False)
    t_end = float(res.times[-1])
    assert t_end == pytest.approx(0.5)
    exact = 1.0 + (c0 - 1.0) * np.exp(-4.0 * t_end)
    assert res.c[-1][0] == pytest.approx(exact, abs=1e-9)
    assert np.array_equal(res.a[-1], res.a[0])
    assert res.final.t == pytest.approx(0.5)


def test_uniform_spectral_state_is_stationary():
    model = build_model(b=0.0)
    basis = build_basis(6, model.grid)
    a0 = np.array([0.3, 0, 0, 0, 0, 0.0])
    c0 = np.array([0.8, 0, 0, 0, 0, 0.0])
    res = integrate(SpectralState(0.0, a0, np.zeros(6), c0), 1e-3, 20,
                    model, basis, flow=False)
    np.testing.assert_allclose(res.a[-1], a0, atol=1e-12)
    np.testing.assert_allclose(res.c[-1], c0, atol=1e-12)


def test_rk4_is_fourth_order_by_richardson():
    model = build_model(nx=32, ny=32)
    basis = build_basis(6, model.grid)
    x, y = model.grid.cell_centers()
    phi0 = np.tanh(2.0 * np.cos(np.pi * x) * np.cos(np.pi * y))
    a0, c0 = project_initial(phi0, np.full(model.grid.shape, 0.8), basis)
    state0 = SpectralState(0.0, a0, np.zeros(basis.k), c0)
    horizon = 0.016
    finals = []
    for dt in (4e-3, 2e-3, 1e-3):
        res = integrate(state0, dt, round(horizon / dt), model, basis, flow=False)
        finals.append(np.concatenate([res.a[-1], res.c[-1]]))
    e1 = float(np.max(np.abs(finals[0] - finals[1])))
    e2 = float(np.max(np.abs(finals[1] - finals[2])))
    order = np.log2(e1 / e2)
    assert 3.5 < order < 4.5, f"order {order:.2f} from gaps {e1:.3e}, {e2:.3e}"


def test_free_energy_decays_for_the_closed_relaxation():
    model = build_model(b=0.0, chi_phi=0.0)
    basis = build_basis(6, model.grid)
    rng = np.random.default_rng(21)
    a0 = 0.2 * rng.standard_normal(6)
    state0 = SpectralState(0.0, a0, np.zeros(6), np.zeros(6))
    res = integrate(state0, 2e-3, 50, model, basis, flow=False)
    e_start = spectral_energy(res.a[0], res.c[0], basis, model)
    e_end = spectral_energy(res.a[-1], res.c[-1], basis, model)
    assert e_end < e_start


def test_stability_timestep_estimate():
    model = build_model()
    assert stability_timestep(build_basis(1, model.grid), model) == np.inf
    dt6 = stability_timestep(build_basis(6, model.grid), model)
    dt15 = stability_timestep(build_basis(15, model.grid), model)
    assert 0.0 < dt15 < dt6 < np.inf


def test_oversized_timestep_raises_blowup():
    model = build_model()
    basis = build_basis(6, model.grid)
    x, y = model.grid.cell_centers()
    a0, c0 = project_initial(np.tanh(3.0 * np.cos(2 * np.pi * x)),
                             np.ones(model.grid.shape), basis)
    with pytest.raises(SpectralBlowup):
        integrate(SpectralState(0.0, a0, np.zeros(6), c0), 5.0, 50,
                  model, basis, flow=False)


def test_integrate_records_flow_samples():
    model = build_model(nx=16, ny=16)
    basis = build_basis(4, model.grid)
    x, y = model.grid.cell_centers()
    a0, c0 = project_initial(0.5 * np.cos(np.pi * x) * np.cos(np.pi * y),
                             np.ones(model.grid.shape), basis)
    res = integrate(SpectralState(0.0, a0, np.zeros(4), c0), 1e-4, 4,
                    model, basis, flow=True, sample_every=2)
    assert isinstance(res, GalerkinResult)
    assert res.flow_iterations > 0
    assert all(s.all_finite() for s in res.states)
    assert res.states[-1].t == pytest.approx(4e-4)
