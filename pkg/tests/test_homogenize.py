import math

import numpy as np
import pytest

from glimit.errors import ConfigurationError, EllipticityError
from glimit.fem import Mesh, solve_dirichlet
from glimit.homogenize import (
    CoefficientField,
    GLimitField,
    cell_glimit,
    glimit_cell,
    glimit_cell_2d,
    glimit_ergodic_mc,
    glimit_harmonic_mean_1d,
    glimit_patch_upscale_2d,
    patch_glimit,
    weak_limit_formula,
    weak_limit_glimit_1d,
)

TWO_PI = 2 * math.pi


def locper(x, y):
    return (1 + x**2) / (2 + np.sin(TWO_PI * y))


def test_harmonic_mean_examples():
    assert glimit_harmonic_mean_1d(locper, [1.0]).values[0] == pytest.approx(1.0, abs=1e-12)
    const = glimit_harmonic_mean_1d(lambda x, y: 2.5 + 0 * y, [0.1, 0.7])
    np.testing.assert_allclose(const.values, 2.5, rtol=1e-14)
    half = glimit_harmonic_mean_1d(lambda x, y: 1 / (2 + np.sin(TWO_PI * y)) + 0 * x, [0.0])
    assert half.values[0] == pytest.approx(0.5, abs=1e-12)


def test_harmonic_mean_guards():
    with pytest.raises(EllipticityError):
        glimit_harmonic_mean_1d(lambda x, y: np.sin(TWO_PI * y) + 0 * x, [0.5])
    with pytest.raises(ConfigurationError):
        glimit_harmonic_mean_1d(locper, [0.5], n_quad=100)


def test_cell_1d_equals_harmonic_mean():
    xs = np.linspace(0, 1, 5)
    cell = glimit_cell(lambda x, y: locper(x, y[:, 0]), xs, 2048, dim=1)
    hm = glimit_harmonic_mean_1d(locper, xs)
    assert np.max(np.abs(cell.values - hm.values)) < 1e-6


def test_cell_2d_y_independent():
    f = glimit_cell_2d(lambda x, y: (1 + x) * np.ones(len(y)), [0.0, 0.5], 8)
    np.testing.assert_allclose(f.values, [[1, 1], [1.5, 1.5]], rtol=1e-12)
    np.testing.assert_allclose(f.tensor[1], 1.5 * np.eye(2), atol=1e-12)


def test_layered_cell_closed_forms():
    a = lambda y: 2 + np.sin(TWO_PI * y[:, 0])
    t = cell_glimit(a, 256)
    assert abs(t[0, 0] - math.sqrt(3)) < 1e-4
    assert abs(t[1, 1] - 2.0) < 1e-4
    assert abs(t[0, 1]) < 1e-10


def test_checkerboard_symmetry():
    t = cell_glimit(lambda y: 2 + np.sin(TWO_PI * y[:, 0]) * np.sin(TWO_PI * y[:, 1]), 64)
    assert abs(t[0, 0] - t[1, 1]) < 1e-6


def test_translation_invariance_1d():
    a = lambda y: 1 / (2 + np.sin(TWO_PI * y[:, 0])) + 0.3 * np.cos(4 * math.pi * y[:, 0]) ** 2
    base = cell_glimit(a, 4096, dim=1)[0, 0]
    for s in (0.123, 0.5, 0.777):
        shifted = cell_glimit(lambda y, s=s: a(y + s), 4096, dim=1)[0, 0]
        assert abs(shifted - base) < 1e-8


def test_translation_invariance_2d_grid_shift():
    a = lambda y: 2 + np.sin(TWO_PI * y[:, 0]) * np.cos(TWO_PI * y[:, 1]) + 0.5 * np.sin(TWO_PI * y[:, 1])
    n = 32
    base = cell_glimit(a, n)
    for k in (3, 11):
        s = np.array([k / n, 5 / n])
        np.testing.assert_allclose(cell_glimit(lambda y, s=s: a(y + s), n), base, atol=1e-8)


def test_ergodic_omega_independent():
    f = glimit_ergodic_mc(lambda x, w1, w2: 1 + x + 0 * w1, [0.0, 0.5], n_samples=10_000)
    np.testing.assert_allclose(f.values, [1.0, 1.5], rtol=1e-14)


def test_ergodic_closed_form():
    f = glimit_ergodic_mc(lambda x, w1, w2: 2 + np.sin(TWO_PI * w1) + 0 * x, [0.3], n_samples=200_000, seed=1)
    assert abs(f.values[0] - math.sqrt(3)) < max(4 * f.stderr[0], 1e-10)
    iid = glimit_ergodic_mc(lambda x, w1, w2: 2 + np.sin(TWO_PI * w1) + 0 * x, [0.3], seed=1, method="iid")
    assert abs(iid.values[0] - math.sqrt(3)) < 4 * iid.stderr[0]


def test_ergodic_self_consistency():
    from glimit.bench.registry import ergodic_A

    a = glimit_ergodic_mc(ergodic_A, [0.6], n_samples=200_000, seed=0)
    b = glimit_ergodic_mc(ergodic_A, [0.6], n_samples=1_000_000, seed=1)
    assert a.stderr[0] < 1e-3 and a.meta["n_samples"] >= 200_000
    assert abs(a.values[0] - b.values[0]) < 3 * math.hypot(a.stderr[0], b.stderr[0])


def test_ergodic_reproducible():
    from glimit.bench.registry import ergodic_A

    a = glimit_ergodic_mc(ergodic_A, [0.1, 0.9], n_samples=20_000, seed=5)
    b = glimit_ergodic_mc(ergodic_A, [0.1, 0.9], n_samples=20_000, seed=5)
    np.testing.assert_array_equal(a.values, b.values)


def test_patch_constant():
    np.testing.assert_allclose(patch_glimit(lambda p: 1.7 * np.ones(len(p)), (0.5, 0.5), 0.2, 16), 1.7, rtol=1e-12)


def test_patch_layered_approaches_closed_forms():
    eps = 1 / 64
    a = lambda p: 2 + np.sin(TWO_PI * p[:, 0] / eps)
    errs = []
    for ratio in (4, 16):
        d = ratio * eps
        v = patch_glimit(a, (0.5, 0.5), d, ratio * 32)
        errs.append(abs(v[0] - math.sqrt(3)))
        assert abs(v[1] - 2.0) < 1e-3
    assert errs[1] < errs[0] and errs[1] / math.sqrt(3) < 0.05


def test_patch_guards():
    A = lambda p: np.ones(len(p))
    with pytest.raises(ConfigurationError):
        glimit_patch_upscale_2d(A, [1.5], 0.05, 32, eps=1 / 16)
    with pytest.raises(ConfigurationError):
        glimit_patch_upscale_2d(A, [1.5], 0.3, 32, eps=1 / 512)


def test_nonper_patch_self_consistency():
    from glimit.bench.registry import nonper_coefficient

    eps = 2.0**-9
    A = lambda p: nonper_coefficient(p[:, 0], p[:, 1], eps)
    small = glimit_patch_upscale_2d(A, [1.3, 1.7], 1 / 64, 128, eps)
    big = glimit_patch_upscale_2d(A, [1.3, 1.7], 1 / 32, 256, eps)
    assert np.max(np.abs(small.values - big.values) / big.values) < 0.05


def test_weak_limit_values():
    assert weak_limit_formula(0.0) == pytest.approx(math.e - 1, abs=1e-12)
    assert weak_limit_formula(math.pi / 2) == pytest.approx((math.e**2 - 1) / 2, abs=1e-12)
    f = weak_limit_glimit_1d()
    assert f.values.min() > 1 and f.provenance == "analytic"


def test_glimit_within_coefficient_window():
    field = CoefficientField(lambda p: locper(p[:, 0], p[:, 0] / 2**-5), 2**-5, 1 / 3, 2, "locally_periodic_1d")
    lo, hi = field.check_bounds()
    g = glimit_harmonic_mean_1d(locper, np.linspace(0, 1, 1000))
    assert g.within(field.alpha, field.beta)


def test_coefficient_field_bounds_violation():
    field = CoefficientField(lambda p: 3 + 0 * p[:, 0], 0.1, 1, 2, "ergodic_1d")
    with pytest.raises(EllipticityError):
        field.check_bounds()
    with pytest.raises(ConfigurationError):
        CoefficientField(lambda p: p, 0.1, 1, 2, "unknown")


def test_glimit_csv_roundtrip(tmp_path):
    f = GLimitField(np.linspace(1, 2, 5), np.column_stack([np.arange(5.0), np.arange(5.0) + 1]), "patch_upscaling", axis=1)
    f.to_csv(tmp_path / "g.csv")
    back = GLimitField.from_csv(tmp_path / "g.csv", axis=1)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.provenance == "patch_upscaling"
    np.testing.assert_allclose(back(np.array([[1.0, 1.25]])), [[1.0, 2.0]], atol=1e-12)


def test_convergence_rate_in_eps():
    f = lambda p: np.cos(math.pi * p[:, 0])
    mesh = Mesh.interval(0, 1, 2**14)
    u0 = solve_dirichlet(mesh, lambda p: 0.5 * (1 + p[:, 0] ** 2), f)
    d = []
    for k in (3, 4, 5, 6):
        eps = 2.0**-k
        ue = solve_dirichlet(mesh, lambda p: locper(p[:, 0], p[:, 0] / eps), f)
        d.append(np.max(np.abs(ue.values - u0.values)))
    ratios = np.array(d[:-1]) / np.array(d[1:])
    assert np.all(np.abs(ratios - 2) <= 0.6)
