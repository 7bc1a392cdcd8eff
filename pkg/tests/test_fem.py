import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from glimit.errors import EllipticityError, NumericError, UsageError
from glimit.fem import (
    FemSolution,
    Mesh,
    SparseSystem,
    conjugate_gradient,
    element_coefficient,
    solve_cell_problem,
    solve_dirichlet,
    stiffness,
)

PI = math.pi


def test_mesh_counts_and_measures():
    m = Mesh.box((1, 1), (2, 2), (4, 3))
    assert m.n_nodes == 5 * 4
    assert np.all(m.measures() > 0)
    assert m.measures().sum() == pytest.approx(1.0, rel=1e-14)
    b = m.boundary_mask()
    x, y = m.nodes.T
    np.testing.assert_array_equal(b, np.isclose(x, 1) | np.isclose(x, 2) | np.isclose(y, 1) | np.isclose(y, 2))
    i = Mesh.interval(0, 1, 10)
    assert i.n_nodes == 11 and np.all(i.measures() > 0)


def test_stiffness_symmetric_positive():
    m = Mesh.box((0, 0), (1, 1), 6)
    K = stiffness(m, element_coefficient(m, lambda p: 1 + p[:, 0] ** 2))
    assert SparseSystem(K, np.zeros(m.n_nodes)).is_symmetric()
    inner = ~m.boundary_mask()
    assert np.all(np.linalg.eigvalsh(K[inner][:, inner].toarray()) > 0)


def test_quadratic_manufactured_1d():
    n = 64
    sol = solve_dirichlet(Mesh.interval(0, 1, n), lambda p: np.ones(len(p)), lambda p: 2 * np.ones(len(p)))
    x = sol.mesh.nodes[:, 0]
    assert np.max(np.abs(sol.values - x * (1 - x))) < (1 / n) ** 2


def _order(errors):
    return np.log2(np.array(errors[:-1]) / np.array(errors[1:]))


def test_l2_order_1d():
    A = lambda p: 1 + p[:, 0] ** 2
    u = lambda p: np.sin(PI * p[:, 0])
    f = lambda p: -(2 * p[:, 0] * PI * np.cos(PI * p[:, 0]) - (1 + p[:, 0] ** 2) * PI**2 * np.sin(PI * p[:, 0]))
    errs = [solve_dirichlet(Mesh.interval(0, 1, n), A, f).l2_norm(u) for n in (16, 32, 64, 128)]
    assert np.all((_order(errs) >= 1.9) & (_order(errs) <= 2.1))


def test_l2_order_2d():
    u = lambda p: np.sin(PI * p[:, 0]) * np.sin(PI * p[:, 1])
    f = lambda p: 2 * PI**2 * u(p)
    errs = [solve_dirichlet(Mesh.box((0, 0), (1, 1), n), lambda p: np.ones(len(p)), f).l2_norm(u) for n in (8, 16, 32, 64)]
    assert np.all((_order(errs) >= 1.9) & (_order(errs) <= 2.1))


def test_nonzero_dirichlet_data_exact_on_boundary():
    m = Mesh.box((0, 0), (1, 1), 8)
    g = lambda p: p[:, 0] + 2 * p[:, 1]
    sol = solve_dirichlet(m, lambda p: np.ones(len(p)), None, g)
    b = m.boundary_mask()
    np.testing.assert_array_equal(sol.values[b], g(m.nodes[b]))
    # harmonic linear data is reproduced everywhere
    np.testing.assert_allclose(sol.values, g(m.nodes), atol=1e-12)


def test_locper_self_convergence():
    eps = 2.0**-3
    A = lambda p: (1 + p[:, 0] ** 2) / (2 + np.sin(2 * PI * p[:, 0] / eps))
    f = lambda p: np.cos(PI * p[:, 0])
    coarse = solve_dirichlet(Mesh.interval(0, 1, 4096), A, f)
    fine = solve_dirichlet(Mesh.interval(0, 1, 8192), A, f)
    x = coarse.mesh.nodes[:, 0]
    assert np.max(np.abs(coarse.values - fine.evaluate(x))) < 2e-3


def test_non_positive_coefficient():
    with pytest.raises(EllipticityError):
        solve_dirichlet(Mesh.interval(0, 1, 8), lambda p: p[:, 0] - 0.5, None)


def test_under_resolution_warns():
    with pytest.warns(RuntimeWarning):
        solve_dirichlet(Mesh.interval(0, 1, 16), lambda p: np.ones(len(p)), None, eps=0.25)


def test_maximum_principle():
    m = Mesh.box((0, 0), (1, 1), 16)
    A = lambda p: 1.5 + np.sin(9 * p[:, 0]) * np.cos(7 * p[:, 1])
    sol = solve_dirichlet(m, A, lambda p: np.exp(p[:, 0]))
    assert sol.values.min() >= -1e-12


def test_evaluate_reproduces_nodes():
    m = Mesh.box((1, 1), (2, 2), 5)
    sol = FemSolution(m, np.random.default_rng(0).random(m.n_nodes))
    np.testing.assert_allclose(sol.evaluate(m.nodes), sol.values, atol=1e-14)


def test_solution_save_load(tmp_path):
    m = Mesh.box((0, 0), (1, 1), 3)
    sol = FemSolution(m, np.arange(m.n_nodes, dtype=float))
    sol.save(tmp_path / "s.npz")
    back = FemSolution.load(tmp_path / "s.npz")
    np.testing.assert_array_equal(back.values, sol.values)
    np.testing.assert_array_equal(back.mesh.nodes, m.nodes)
    sol.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "x1,x2,value"


# cell problems

def test_constant_cell_corrector_vanishes():
    chi = solve_cell_problem(Mesh.box((0, 0), (1, 1), 8), lambda y: 3 * np.ones(len(y)), 0)
    assert np.max(np.abs(chi.values)) < 1e-14


def test_1d_corrector_flux_constant():
    A = lambda y: 1 / (2 + np.sin(2 * PI * y[:, 0]))
    m = Mesh.interval(0, 1, 256)
    chi = solve_cell_problem(m, A, 0)
    a = element_coefficient(m, A)[:, 0]
    flux = a * (1 + chi.element_gradients()[:, 0])
    assert np.ptp(flux) < 1e-9 * np.abs(flux).max()
    assert abs(chi.values[:-1].mean()) < 1e-12


def test_layered_cell_has_no_transverse_corrector():
    m = Mesh.box((0, 0), (1, 1), 16)
    chi2 = solve_cell_problem(m, lambda y: 2 + np.sin(2 * PI * y[:, 0]), 1)
    assert np.max(np.abs(chi2.values)) < 1e-12


def test_cell_direction_checked():
    with pytest.raises(UsageError):
        solve_cell_problem(Mesh.interval(0, 1, 8), lambda y: np.ones(len(y)), 1)


# conjugate gradients

def test_cg_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    x, it = conjugate_gradient(SparseSystem(sp.identity(5, format="csr"), b), return_info=True)
    np.testing.assert_allclose(x, b)
    assert it == 1


def test_cg_laplacian_matches_tridiagonal():
    n = 100
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    b = np.ones(n)
    ab = np.vstack([np.r_[0, -np.ones(n - 1)], 2 * np.ones(n), np.r_[-np.ones(n - 1), 0]])
    ref = sla.solve_banded((1, 1), ab, b)
    x = conjugate_gradient(SparseSystem(K, b), tol=1e-14)
    assert np.max(np.abs(x - ref)) / np.max(np.abs(ref)) < 1e-10


def test_cg_random_spd():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((50, 50))
    A = M.T @ M + np.eye(50)
    b = rng.standard_normal(50)
    x = conjugate_gradient(SparseSystem(sp.csr_matrix(A), b), tol=1e-14)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-9)


def test_cg_iteration_cap():
    n = 200
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    with pytest.raises(NumericError) as info:
        conjugate_gradient(SparseSystem(K, np.ones(n)), max_iters=3, precond="none")
    assert info.value.residual > 0
