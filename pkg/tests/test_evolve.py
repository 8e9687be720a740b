import numpy as np
import pytest

from gp_mass.errors import ConfigError, LinearSolveFailure
from gp_mass.evolve import (
    EvolutionState, energy_trap, evolve, h_norm_of, orbital_distance, perturbed_data,
    stability_experiment, step,
)
from gp_mass.model import masses


def test_orbital_distance_of_phase_orbit(coarse_solution, defoc_coarse):
    u = coarse_solution.pair
    psi = (np.exp(0.4j) * u[0], np.exp(-2.1j) * u[1])
    assert orbital_distance(psi, u, defoc_coarse) < 1e-10


def test_orbital_distance_matches_brute_force(coarse_solution, defoc_coarse):
    m, u = defoc_coarse, coarse_solution.pair
    psi = perturbed_data(m, coarse_solution, 0.3, "bump", seed=7)
    psi = (np.exp(1.0j) * psi[0], np.exp(2.5j) * psi[1])
    s = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    # the two phases decouple, so the 100 x 100 grid is a sum of two 1-D scans
    best = 0.0
    for i in range(2):
        cost = [h_norm_of(m, tuple(psi[k] - np.exp(1j * a) * u[k] if k == i else 0 * u[k]
                                   for k in range(2))) ** 2 for a in s]
        best += min(cost)
    d = orbital_distance(psi, u, m)
    assert d <= np.sqrt(best) + 1e-12
    # grid spacing 2 pi / 100 bounds the gap
    assert np.sqrt(best) - d < 0.5 * (2 * np.pi / 100) ** 2 * h_norm_of(m, u) ** 2


@pytest.mark.parametrize("kind", ["bump", "rotation", "tangent"])
def test_perturbation_size(kind, coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    psi = perturbed_data(m, s, 1e-2, kind, seed=1)
    diff = tuple(a - b for a, b in zip(psi, s.pair))
    assert h_norm_of(m, diff) == pytest.approx(1e-2, rel=1e-8)
    if kind == "rotation":
        assert masses(m.grid, psi) == pytest.approx((s.rho1, s.rho2), rel=1e-12)


def test_unknown_perturbation(coarse_solution, defoc_coarse):
    with pytest.raises(ConfigError):
        perturbed_data(defoc_coarse, coarse_solution, 1e-3, "kick")


def test_mass_conserved_and_energy_second_order(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    psi0 = perturbed_data(m, s, 0.1, "bump", 0)
    drifts = []
    for dt in (2e-3, 1e-3):
        _, series, _ = evolve(m, psi0, s.gamma, dt, 1.0, 0.1)
        assert series.max_mass_drift() < 1e-10
        drifts.append(series.max_energy_drift())
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.1)


def test_standing_wave_is_stationary(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    _, series, _ = evolve(m, s.pair, s.gamma, 1e-3, 2.0, 0.5, reference=s.pair)
    assert max(series.orbital_distance) < 1e-5
    assert series.t == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])


def test_time_reversibility(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    psi0 = perturbed_data(m, s, 0.1, "bump", 0)
    st = EvolutionState.start(psi0, m, s.gamma)
    for _ in range(200):
        st = step(st, m, s.gamma, 1e-3)
    for _ in range(200):
        st = step(st, m, s.gamma, -1e-3)
    err = max(np.max(np.abs(a - b)) for a, b in zip(st.pair, psi0))
    assert err < 1e-6 * 0.2
    assert st.t == pytest.approx(0.0, abs=1e-12)


def test_bad_step_inputs(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    st = EvolutionState.start(s.pair, m, s.gamma)
    with pytest.raises(ConfigError):
        step(st, m, s.gamma, 0.0)
    bad = EvolutionState.start((s.pair[0] * np.nan, s.pair[1]), m, s.gamma)
    with pytest.raises(LinearSolveFailure):
        step(bad, m, s.gamma, 1e-3)


def test_snapshots(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    _, _, snaps = evolve(m, s.pair, s.gamma, 1e-2, 0.5, 0.1, snapshots=[0.2])
    assert set(snaps) == {0.2}
    assert np.iscomplexobj(snaps[0.2][0])


def test_stability_experiment_linear_in_delta(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    a = stability_experiment(s, m, 1e-3, 2.0, 1e-3, "rotation", 0)
    b = stability_experiment(s, m, 5e-4, 2.0, 1e-3, "rotation", 0)
    assert a.sup_distance < 0.1
    assert 1.5 <= a.sup_distance / b.sup_distance <= 2.5
    z = stability_experiment(s, m, 0.0, 2.0)
    assert z.sup_distance < 1e-5


def test_energy_trap(coarse_solution, defoc_coarse):
    m, s = defoc_coarse, coarse_solution
    psi0 = perturbed_data(m, s, 1e-3, "rotation", 0)
    out = energy_trap(m, s, psi0, s.alpha + 0.2, 1e-3, 2.0)
    assert out["hypotheses"]
    assert out["trapped"]
    assert out["max_h_norm_sq"] < s.alpha + 0.2
