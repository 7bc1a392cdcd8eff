import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glimit.errors import UsageError
from glimit.metrics import REPORT_COLUMNS, ErrorReport, grid_weights, relative_l2

GRID = np.linspace(0, 1, 1001)[:, None]


def test_identity_and_homogeneity():
    f = lambda p: np.sin(3 * p[:, 0]) + 2
    assert relative_l2(f, f, GRID) == 0.0
    assert relative_l2(lambda p: 2 * f(p), f, GRID) == pytest.approx(1.0, rel=1e-14)


def test_constant_offset():
    assert relative_l2(np.full(1001, 1.1), np.ones(1001), GRID) == pytest.approx(0.1, rel=1e-13)


def test_zero_reference_rejected():
    with pytest.raises(UsageError):
        relative_l2(np.ones(1001), np.zeros(1001), GRID)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_invariance(s):
    a = np.cos(GRID[:, 0]) + 0.1
    b = np.cos(GRID[:, 0] * 1.1) + 0.1
    assert abs(relative_l2(s * a, s * b, GRID) - relative_l2(a, b, GRID)) < 1e-14


def test_refinement_stability():
    f = lambda p: np.exp(p[:, 0])
    g = lambda p: np.exp(p[:, 0]) * (1 + 0.05 * np.sin(5 * p[:, 0]))
    coarse = relative_l2(g, f, np.linspace(0, 1, 201)[:, None])
    fine = relative_l2(g, f, np.linspace(0, 1, 401)[:, None])
    assert abs(fine / coarse - 1) < 0.01


def test_2d_weights_and_frobenius():
    ax = np.linspace(1, 2, 9)
    X, Y = np.meshgrid(ax, ax)
    grid = np.column_stack([X.ravel(), Y.ravel()])
    assert grid_weights(grid).sum() == pytest.approx(1.0, rel=1e-14)
    ref = np.column_stack([np.ones(81), 2 * np.ones(81)])
    hat = ref + np.column_stack([0.1 * np.ones(81), np.zeros(81)])
    assert relative_l2(hat, ref, grid) == pytest.approx(0.1 / np.sqrt(5), rel=1e-13)
    with pytest.raises(UsageError):
        grid_weights(grid[:-1])


def test_report_serialization(tmp_path):
    r = ErrorReport(0.01, 0.002, {"h": 1e-5, "points": 100001, "override": False}, {"A": "analytic", "u0": "fem"},
                    {"benchmark": "locper1d", "eps": 0.0078125, "seed": 0})
    r.save_json(tmp_path / "r.json")
    back = ErrorReport.load_json(tmp_path / "r.json")
    assert back == r
    text = r.to_csv()
    head, row = text.strip().split("\n")
    assert tuple(head.split(",")) == REPORT_COLUMNS
    assert "locper1d" in row and "0.01" in row
    assert json.loads(r.to_json())["e_A"] == 0.01
    with pytest.raises(UsageError):
        ErrorReport(-1.0, 0.0, {}, {})
