import numpy as np
import pytest

from gp_mass.continuation import (
    BranchCurve, e_curve, e_identity_defect, invert_mass, m_continuity,
    stability_verdict, sweep,
)
from gp_mass.eigen import feasibility_threshold
from gp_mass.errors import ConfigError, OutOfRange
from gp_mass.maximizer import l2_distance


@pytest.fixture(scope="module")
def branch(defoc_coarse):
    T = feasibility_threshold(defoc_coarse, 1.0, 1.0)
    return sweep(defoc_coarse, 1.0, 1.0, np.linspace(T + 0.05, T + 2.0, 8), fd_step=1e-3)


def test_gamma_increasing_and_stable(branch):
    assert np.all(np.diff(branch.gammas) > 0)
    v = stability_verdict(branch)
    assert all(f == "stable" for f in v.flags)
    assert v.monotone_window == (branch.alphas[0], branch.alphas[-1])
    assert not branch.discontinuities


def test_omega_trend_negative(branch):
    assert np.all(branch.omega_trend() < 0)


def test_e_identity(branch):
    mid = len(branch.points) // 2
    defect = e_identity_defect(branch, branch.alphas[mid])
    assert defect[1:-1].max() < 5e-3
    _, de, _ = e_curve(branch, branch.alphas[mid])
    assert abs(de[mid]) < 1e-5


def test_e_curve_range(branch):
    with pytest.raises(OutOfRange):
        e_curve(branch, branch.alphas[-1] + 1)


def test_grid_derivative_without_stencils(branch):
    assert branch.has_stencils
    pts = list(branch.points)
    saved = [p.diagnostics.pop("fd") for p in pts]
    try:
        coarse = BranchCurve(1.0, 1.0, pts).gamma_derivative
    finally:
        for p, fd in zip(pts, saved):
            p.diagnostics["fd"] = fd
    # away from the threshold both estimates describe the same derivative
    np.testing.assert_allclose(coarse[2:], branch.gamma_derivative[2:], rtol=0.05)


def test_cold_mode_agrees(defoc_coarse, branch):
    cold = sweep(defoc_coarse, 1.0, 1.0, branch.alphas[:3], mode="cold")
    for a, b in zip(cold.points, branch.points[:3]):
        assert l2_distance(defoc_coarse, a.pair, b.pair) < 1e-8


def test_sweep_validation(defoc_coarse):
    T = feasibility_threshold(defoc_coarse, 1.0, 1.0)
    with pytest.raises(ConfigError):
        sweep(defoc_coarse, 1, 1, [T + 1, T + 0.5])
    with pytest.raises(ConfigError):
        sweep(defoc_coarse, 1, 1, [T - 0.5, T + 0.5])
    with pytest.raises(ConfigError):
        sweep(defoc_coarse, 1, 1, [T + 0.5], mode="sideways")
    with pytest.raises(ConfigError):
        stability_verdict(BranchCurve(1, 1, []))


def test_invert_mass(defoc_coarse, branch):
    target = branch.points[3]
    # aim between two branch points
    g = 0.5 * (branch.gammas[3] + branch.gammas[4])
    s = invert_mass(defoc_coarse, branch, g * 1.0, g * 1.0, tol=1e-12)
    assert s.gamma == pytest.approx(g, rel=1e-6)
    assert target.alpha < s.alpha < branch.points[4].alpha
    with pytest.raises(OutOfRange):
        invert_mass(defoc_coarse, branch, 1e6, 1e6)
    with pytest.raises(ConfigError):
        invert_mass(defoc_coarse, branch, 10.0, 20.0)


def test_m_continuity_refines(defoc_coarse):
    T = feasibility_threshold(defoc_coarse, 1.0, 1.0)
    d = m_continuity(defoc_coarse, 1.0, 1.0, T + 0.05, T + 1.0, levels=(3, 5, 9))
    assert d[0] > d[1] > d[2]
