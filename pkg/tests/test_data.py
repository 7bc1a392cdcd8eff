import numpy as np
import pytest

from glimit.data import SampleSet, add_noise, make_collocation, sample_equispaced, write_manifest
from glimit.errors import UsageError
from glimit.fem import FemSolution, Mesh


def linear_solution(dim=1, n=8):
    m = Mesh.interval(0, 1, n) if dim == 1 else Mesh.box((1, 1), (2, 2), n)
    return FemSolution(m, m.nodes.sum(axis=1))


def test_interior_grid_1d():
    s = sample_equispaced(linear_solution(), 3)
    np.testing.assert_allclose(s.points[:, 0], [0.25, 0.5, 0.75], atol=1e-15)
    np.testing.assert_allclose(s.values, [0.25, 0.5, 0.75], atol=1e-15)


def test_interior_grid_2d():
    s = sample_equispaced(linear_solution(2, 64), 1600)
    assert s.points.shape == (1600, 2)
    xs = np.unique(s.points[:, 0])
    assert len(xs) == 40 and xs.min() > 1 and xs.max() < 2
    with pytest.raises(UsageError):
        make_collocation(((1, 1), (2, 2)), 1601)


def test_nodal_interpolation_identity():
    sol = FemSolution(Mesh.interval(0, 1, 4), np.array([0.0, 3.0, -1.0, 2.0, 0.0]))
    s = sample_equispaced(sol, 3)
    np.testing.assert_array_equal(s.values, [3.0, -1.0, 2.0])


def test_oversampling_warns():
    with pytest.warns(RuntimeWarning):
        sample_equispaced(linear_solution(n=4), 10)


def test_noise_zero_is_identity():
    s = sample_equispaced(linear_solution(), 5)
    np.testing.assert_array_equal(add_noise(s, 0.0, 1).values, s.values)


def test_noise_scale_and_center():
    n = 10_000
    pts = np.linspace(0, 1, n)[:, None]
    clean = np.sin(3 * pts[:, 0]) + 0.2
    s = SampleSet(pts, clean.copy(), clean=clean.copy())
    noisy = add_noise(s, 0.05, 42)
    rms = np.sqrt(np.mean(clean**2))
    d = noisy.values - clean
    assert abs(d.std() / (0.05 * rms) - 1) < 0.05
    big = add_noise(SampleSet(np.zeros((100_000, 1)), np.ones(100_000)), 0.05, 7)
    assert abs((big.values - 1).mean()) < 3 * 0.05 / np.sqrt(100_000)


def test_noise_deterministic_and_bounded():
    s = sample_equispaced(linear_solution(n=32), 20)
    np.testing.assert_array_equal(add_noise(s, 0.03, 5).values, add_noise(s, 0.03, 5).values)
    with pytest.raises(UsageError):
        add_noise(s, 0.5, 0)


def test_collocation_modes():
    g = make_collocation(((0,), (1,)), 190)
    assert len(g) == 190
    np.testing.assert_allclose(np.diff(g.points[:, 0]), 1 / 191)
    r = make_collocation(((1, 1), (2, 2)), 500, "uniform_random", 3)
    assert np.all((r.points > 1) & (r.points < 2))
    np.testing.assert_array_equal(r.points, make_collocation(((1, 1), (2, 2)), 500, "uniform_random", 3).points)
    assert make_collocation(((1, 1), (2, 2)), 1600).points.shape == (1600, 2)
    with pytest.raises(UsageError):
        make_collocation(((0,), (1,)), 0)


def test_dataset_roundtrip(tmp_path):
    s = add_noise(sample_equispaced(linear_solution(2, 16), 49, {"eps": 0.0625}), 0.01, 3)
    s.to_csv(tmp_path / "d.csv")
    head = (tmp_path / "d.csv").read_text().splitlines()[0]
    assert head.startswith("# glimit-dataset v1; eps=0.0625; h=0.0625; noise=0.01; seed=3")
    back = SampleSet.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.points, s.points)
    np.testing.assert_array_equal(back.values, s.values)
    assert back.noise_level == s.noise_level and back.seed == 3


def test_manifest(tmp_path):
    doc = write_manifest(tmp_path / "m.json", "d.csv", "abc", "123", {"omega": [0.5, 0.5]})
    assert doc["config_hash"] == "123" and (tmp_path / "m.json").exists()
