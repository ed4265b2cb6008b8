import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cauchy_mann.bvp import (
    CoefficientField,
    Dirichlet,
    MixedBvpSpec,
    MixedSolver,
    Neumann,
    assemble_stiffness,
    conormal_flux,
    dirichlet_trace,
    energy_inner_product,
    solve_mixed,
)
from cauchy_mann.errors import GridMismatch, SingularSystem, UnknownSegment
from cauchy_mann.geometry import Annulus, BoundaryFunction, Rectangle, build_grid, sample_boundary

H = 0.75


def rect_spec(n1, n2, flux=True):
    g = build_grid(Rectangle(1, H), n1, n2)
    top = (Neumann(sample_boundary(g, 2, lambda x: np.pi * np.sinh(np.pi * H) * np.sin(np.pi * x))) if flux
           else Dirichlet(sample_boundary(g, 2, lambda x: np.cosh(np.pi * H) * np.sin(np.pi * x))))
    bc = {
        1: Dirichlet(sample_boundary(g, 1, lambda x: np.sin(np.pi * x))),
        2: top,
        3: Dirichlet(BoundaryFunction.on(g, 3, 0.0)),
        4: Dirichlet(BoundaryFunction.on(g, 4, 0.0)),
    }
    return MixedBvpSpec(g, bc)


def rect_exact(g):
    return (np.cosh(np.pi * g.y) * np.sin(np.pi * g.x)).ravel()


def annulus_exact(g):
    r, t = np.hypot(g.x, g.y).ravel(), np.arctan2(g.y, g.x).ravel()
    return 0.5 * (r + 1 / r) * np.sin(t) - 0.25 * (r**2 + r**-2) * np.sin(2 * t)


def annulus_spec(n1, n2):
    g = build_grid(Annulus(1, 3), n1, n2)
    bc = {
        1: Dirichlet(sample_boundary(g, 1, lambda t: np.sin(t) - np.sin(2 * t) / 2)),
        2: Neumann(sample_boundary(g, 2, lambda t: 4 / 9 * np.sin(t) - 40 / 27 * np.sin(2 * t))),
    }
    return MixedBvpSpec(g, bc)


def rel_max_err(sol, exact):
    return np.max(np.abs(sol.values - exact)) / np.max(np.abs(exact))


def test_rectangle_manufactured_order():
    errs = []
    for n in (17, 33, 65):
        spec = rect_spec(n, (n - 1) * 3 // 4 + 1)
        errs.append(rel_max_err(solve_mixed(spec), rect_exact(spec.grid)))
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.8


def test_annulus_manufactured_order():
    errs = []
    for n in (9, 17, 33):
        spec = annulus_spec(n, 4 * (n - 1))
        errs.append(rel_max_err(solve_mixed(spec), annulus_exact(spec.grid)))
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.8


def test_zero_data_zero_solution():
    g = build_grid(Rectangle(1, H), 9, 7)
    spec = MixedBvpSpec(g, {1: Dirichlet(BoundaryFunction.on(g, 1, 0.0)), 2: Neumann(BoundaryFunction.on(g, 2, 0.0)),
                            3: Neumann(BoundaryFunction.on(g, 3, 0.0)), 4: Neumann(BoundaryFunction.on(g, 4, 0.0))})
    assert not np.any(solve_mixed(spec).values)


def test_no_dirichlet_is_singular():
    g = build_grid(Annulus(1, 3), 5, 8)
    with pytest.raises(SingularSystem):
        MixedSolver(g, {1: "neumann", 2: "neumann"})


def test_traces_and_fluxes():
    spec = rect_spec(65, 49, flux=False)
    sol = solve_mixed(spec)
    x = spec.grid.segment(2).params
    tr = dirichlet_trace(sol, 2)
    np.testing.assert_allclose(tr.values, np.cosh(3 * np.pi / 4) * np.sin(np.pi * x), atol=1e-12)
    assert np.cosh(3 * np.pi / 4) == pytest.approx(5.3228, abs=1e-4)
    errs = []
    for n in (17, 33, 65):
        s = solve_mixed(rect_spec(n, (n - 1) * 3 // 4 + 1, flux=False))
        xs = s.grid.segment(2).params
        fl = conormal_flux(s, 2).values[1:-1]
        ex = np.pi * np.sinh(3 * np.pi / 4) * np.sin(np.pi * xs[1:-1])
        errs.append(np.max(np.abs(fl - ex)) / np.max(np.abs(ex)))
    assert np.pi * np.sinh(3 * np.pi / 4) == pytest.approx(16.424, abs=1e-3)
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.8
    with pytest.raises(UnknownSegment):
        conormal_flux(sol, 5)


def test_annulus_trace_at_outer_circle():
    spec = annulus_spec(33, 128)
    tr = dirichlet_trace(solve_mixed(spec), 2)
    t = spec.grid.segment(2).params
    exact = 5 / 3 * np.sin(t) - 41 / 18 * np.sin(2 * t)
    assert np.max(np.abs(tr.values - exact)) < 5e-3 * np.max(np.abs(exact))


def test_annulus_flux_at_outer_circle():
    g = build_grid(Annulus(1, 3), 33, 128)
    t = g.segment(2).params
    spec = MixedBvpSpec(g, {1: Dirichlet(sample_boundary(g, 1, lambda t: np.sin(t) - np.sin(2 * t) / 2)),
                            2: Dirichlet(sample_boundary(g, 2, lambda t: 5 / 3 * np.sin(t) - 41 / 18 * np.sin(2 * t)))})
    fl = conormal_flux(solve_mixed(spec), 2).values
    exact = 4 / 9 * np.sin(t) - 40 / 27 * np.sin(2 * t)
    assert 0.25 * (6 - 2 / 27) == pytest.approx(1.48148, abs=1e-5)
    assert np.max(np.abs(fl - exact)) < 1e-2 * np.max(np.abs(exact))


def test_constant_solution_zero_flux():
    g = build_grid(Annulus(1, 3), 9, 16)
    sol = MixedSolver(g, {1: "dirichlet", 2: "dirichlet"}).solve({1: 2.5, 2: 2.5})
    np.testing.assert_allclose(sol.values, 2.5)
    np.testing.assert_allclose(conormal_flux(sol, 2).values, 0.0, atol=1e-12)


@pytest.mark.parametrize("domain", ["rect", "annulus"])
def test_flux_roundtrip(domain, rng):
    if domain == "rect":
        g = build_grid(Rectangle(1, H), 17, 13)
        kinds = {1: "dirichlet", 2: "neumann", 3: "dirichlet", 4: "neumann"}
    else:
        g = build_grid(Annulus(1, 3), 9, 24)
        kinds = {1: "dirichlet", 2: "neumann"}
    solver = MixedSolver(g, kinds)
    phi = rng.standard_normal(len(g.segment(2)))
    sol = solver.solve({1: rng.standard_normal(len(g.segment(1))), 2: phi})
    mask = solver.neumann_mask(2)
    flux = (solver.K @ sol.values)[g.segment(2).nodes] / g.segment(2).weights
    # a node shared with a Neumann side also carries that side's (zero) load
    np.testing.assert_allclose(flux[mask], phi[mask], rtol=1e-10, atol=1e-10)
    assert sol.interior_residual() <= 1e-10


def test_stiffness_symmetric():
    for g in (build_grid(Rectangle(1, H), 9, 7), build_grid(Annulus(1, 3), 7, 12)):
        K = assemble_stiffness(g)
        assert abs(K - K.T).max() <= 1e-12 * abs(K).max()


def test_energy_matches_quadrature_oracle():
    spec = rect_spec(129, 97)
    sol = solve_mixed(spec)
    # |grad u|^2 integrated over x is pi^2/2 cosh(2 pi y)
    oracle = quad(lambda y: 0.5 * np.pi**2 * np.cosh(2 * np.pi * y), 0, H)[0]
    assert energy_inner_product(sol, sol) == pytest.approx(oracle, rel=1e-2)


def test_energy_bilinear_and_positive(rng):
    g = build_grid(Rectangle(1, H), 9, 7)
    solver = MixedSolver(g, {1: "dirichlet", 2: "neumann", 3: "dirichlet", 4: "dirichlet"})
    u, v, w = (solver.solve({2: rng.standard_normal(9), 1: rng.standard_normal(9)}) for _ in range(3))
    vw = type(v)(g, v.values + w.values, solver, v.load + w.load)
    lhs = energy_inner_product(u, vw)
    rhs = energy_inner_product(u, v) + energy_inner_product(u, w)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
    assert energy_inner_product(u, u) > 0
    c = MixedSolver(g, {1: "dirichlet", 2: "dirichlet", 3: "dirichlet", 4: "dirichlet"}).solve({1: 1, 2: 1, 3: 1, 4: 1})
    assert abs(energy_inner_product(c, c)) < 1e-12


def test_energy_grid_mismatch():
    a = MixedSolver(build_grid(Annulus(1, 3), 5, 8), {1: "dirichlet", 2: "neumann"}).solve({})
    b = MixedSolver(build_grid(Annulus(1, 3), 5, 8), {1: "dirichlet", 2: "neumann"}).solve({})
    with pytest.raises(GridMismatch):
        energy_inner_product(a, b)


@given(st.integers(0, 10_000))
def test_maximum_principle(seed):
    r = np.random.default_rng(seed)
    g = build_grid(Rectangle(1, H), 9, 7)
    data = {s: r.uniform(-1, 1, len(g.segment(s))) for s in (1, 2, 3, 4)}
    sol = MixedSolver(g, {s: "dirichlet" for s in (1, 2, 3, 4)}).solve(data)
    b = g.boundary_mask()
    assert sol.values[~b].max() <= sol.values[b].max() + 1e-12
    assert sol.values[~b].min() >= sol.values[b].min() - 1e-12


def test_cg_matches_direct():
    spec = annulus_spec(17, 64)
    a = solve_mixed(spec, "direct").values
    b = solve_mixed(spec, "cg").values
    assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))


def test_variable_coefficients_order():
    # 2 u_xx + u_yy = 0 for u = sin(pi x) cosh(sqrt(2) pi y)
    coeffs = CoefficientField(a11=lambda x, y: 2.0 + 0 * x, a22=1.0, alpha=1.0)
    errs = []
    for n in (9, 17, 33):
        g = build_grid(Rectangle(1, H), n, (n - 1) * 3 // 4 + 1)
        exact = (np.sin(np.pi * g.x) * np.cosh(np.sqrt(2) * np.pi * g.y)).ravel()
        solver = MixedSolver(g, {s: "dirichlet" for s in (1, 2, 3, 4)}, coeffs)
        sol = solver.solve({s: exact[g.segment(s).nodes] for s in (1, 2, 3, 4)})
        errs.append(rel_max_err(sol, exact))
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.8


def test_non_elliptic_coefficients_rejected():
    g = build_grid(Rectangle(1, H), 5, 4)
    with pytest.raises(ValueError):
        assemble_stiffness(g, CoefficientField(a11=1.0, a12=1.0, a22=1.0))
