import math

import numpy as np
import pytest

from gp_mass.eigen import feasibility_threshold
from gp_mass.errors import DegenerateRegime, InfeasibleConstraint, NoConvergence
from gp_mass.maximizer import (
    MaximizeOptions, constraint_violation, extract_multipliers, initial_pair, l2_distance,
    maximize, multi_start, retract, solitary_residual, to_physical,
)
from gp_mass.model import ConstraintSpec, ModelParams, masses


def test_threshold_anchor():
    m = ModelParams.harmonic(n=1024, mu1=-1, mu2=-1, beta=0)
    T = feasibility_threshold(m, 1.0, 1.0)
    s = maximize(m, ConstraintSpec(T, 1.0, 1.0))
    assert s.m_value == pytest.approx(-0.5 / math.sqrt(2 * math.pi), abs=1e-3)
    assert (s.omega1, s.omega2, s.gamma) == pytest.approx((-1, -1, 0), abs=1e-4)


@pytest.mark.parametrize("params", [(1, -1, 0.3), (-1, -1, 0.5), (1, 1, 0.2)])
@pytest.mark.parametrize("extra", [1e-3, 0.7])
def test_regime_sample_certified(params, extra):
    m = ModelParams.harmonic(n=512, mu1=params[0], mu2=params[1], beta=params[2])
    c = ConstraintSpec(feasibility_threshold(m, 1.0, 0.5) + extra, 1.0, 0.5)
    s = maximize(m, c)
    assert s.residual < 1e-6
    assert constraint_violation(m, s.pair, c) < 1e-9
    assert s.gamma > 0
    assert all(np.all(u >= 0) for u in s.pair)


def test_defocusing_reference_values(defoc_solution):
    s = defoc_solution
    assert s.gamma == pytest.approx(20.527, abs=1e-2)
    # symmetric data gives symmetric components
    assert np.max(np.abs(s.pair[0] - s.pair[1])) < 1e-8
    assert s.omega1 == pytest.approx(s.omega2, abs=1e-8)


def test_physical_solution(defoc, defoc_solution):
    U, w1, w2, m1, m2 = to_physical(defoc_solution)
    assert solitary_residual(U, w1, w2, defoc) < 1e-9
    q1, q2 = masses(defoc.grid, U)
    assert (q1, q2) == pytest.approx((m1, m2), rel=1e-9)
    assert m1 == pytest.approx(defoc_solution.gamma * defoc_solution.rho1)


def test_envelope_identity(defoc_coarse):
    # dM/dalpha equals 1/(2 gamma) at a maximizer
    h = 1e-3
    up = maximize(defoc_coarse, ConstraintSpec(2.5 + h, 1, 1)).m_value
    dn = maximize(defoc_coarse, ConstraintSpec(2.5 - h, 1, 1)).m_value
    s = maximize(defoc_coarse, ConstraintSpec(2.5, 1, 1))
    assert (up - dn) / (2 * h) == pytest.approx(1 / (2 * s.gamma), rel=1e-5)


def test_M_nondecreasing_in_alpha(defoc_coarse):
    vals = [maximize(defoc_coarse, ConstraintSpec(a, 1, 1)).m_value for a in (2.1, 2.4, 3.0, 4.0)]
    assert np.all(np.diff(vals) > 0)


def test_multi_start_agrees(defoc_coarse):
    best, sols = multi_start(defoc_coarse, ConstraintSpec(2.5, 1, 1), seeds=range(8))
    assert len(sols) == 8
    assert best.diagnostics["max_spread"] < 1e-5
    assert len(best.diagnostics["distinct"]) == 1


def test_multi_start_threads_deterministic(defoc_coarse):
    c = ConstraintSpec(2.5, 1, 1)
    a, _ = multi_start(defoc_coarse, c, MaximizeOptions(threads=2), seeds=range(4))
    b, _ = multi_start(defoc_coarse, c, MaximizeOptions(threads=1), seeds=range(4))
    assert a.seed == b.seed
    assert l2_distance(defoc_coarse, a.pair, b.pair) == 0.0


def test_ascent_without_polish_reaches_gtol(defoc_coarse):
    s = maximize(defoc_coarse, ConstraintSpec(2.5, 1, 1), opts=MaximizeOptions(polish=False))
    assert s.grad_norm <= 1e-8
    assert s.residual < 1e-6
    assert s.diagnostics["F_history_monotone"]


def test_warm_start_matches_cold(defoc_coarse):
    c = ConstraintSpec(2.6, 1, 1)
    cold = maximize(defoc_coarse, c)
    warm = maximize(defoc_coarse, c, maximize(defoc_coarse, ConstraintSpec(2.5, 1, 1)).pair)
    assert l2_distance(defoc_coarse, cold.pair, warm.pair) < 1e-8


def test_retract_lands_on_constraints(defoc_coarse):
    c = ConstraintSpec(3.0, 0.7, 1.3)
    u = initial_pair(defoc_coarse, c, seed=3)
    assert constraint_violation(defoc_coarse, u, c) < 1e-10
    v = retract(tuple(1.1 * x for x in u), defoc_coarse, c)
    assert constraint_violation(defoc_coarse, v, c) < 1e-10


def test_multipliers_of_eigenpair(defoc_coarse):
    phis = tuple(ep.phi for ep in defoc_coarse.eigenpairs)
    w1, w2, g, res = extract_multipliers(phis, defoc_coarse)
    lam = defoc_coarse.lambdas
    assert (w1, w2, g) == pytest.approx((-lam[0], -lam[1], 0.0), abs=1e-8)


def test_infeasible_and_degenerate():
    m = ModelParams.harmonic(n=256, mu1=-1, mu2=-1, beta=0.5)
    with pytest.raises(InfeasibleConstraint):
        maximize(m, ConstraintSpec(1.5, 1, 1))
    with pytest.raises(DegenerateRegime):
        maximize(m.with_scattering(type(m.scattering)(1, 1, -1)), ConstraintSpec(2.5, 1, 1))


def test_no_convergence_reports_residual(defoc_coarse):
    with pytest.raises(NoConvergence) as exc:
        maximize(defoc_coarse, ConstraintSpec(2.5, 1, 1), opts=MaximizeOptions(rtol=1e-30))
    assert exc.value.residual is not None


def test_record_fields(defoc_solution):
    rec = defoc_solution.record()
    for key in ("alpha", "rho1", "rho2", "M", "omega1", "omega2", "gamma", "residual", "iterations"):
        assert key in rec


def test_two_dimensional_solve():
    m = ModelParams.harmonic(dim=2, L=5.0, n=48, mu1=-1, mu2=-1, beta=0.5)
    T = feasibility_threshold(m, 1.0, 1.0)
    s = maximize(m, ConstraintSpec(T + 0.5, 1, 1))
    assert s.residual < 1e-6 and s.gamma > 0


def test_retract_from_much_larger_budget():
    # both components carry more excess energy than the new budget allows
    m = ModelParams.harmonic(n=512, mu1=1, mu2=1, beta=0.2)
    rho = (0.5 / m.lambdas[0], 0.5 / m.lambdas[1])
    big = maximize(m, ConstraintSpec(1.5, *rho))
    c = ConstraintSpec(1.0001, *rho)
    v = retract(big.pair, m, c)
    assert constraint_violation(m, v, c) < 1e-12
    s = maximize(m, c, big.pair)
    assert s.residual < 1e-6
