import numpy as np
import pytest

from gp_mass.eigen import feasibility_threshold, principal_eigenpair, rayleigh_quotient
from gp_mass.errors import ConfigError
from gp_mass.grid import Grid, integrate
from gp_mass.model import ModelParams, PotentialSpec


def test_harmonic_1d():
    g = Grid(1, 10.0, 1024)
    ep = principal_eigenpair(g, g.r2)
    assert ep.lam == pytest.approx(1.0, abs=1e-4)
    assert np.all(ep.phi >= 0)
    assert integrate(g, ep.phi ** 2) == pytest.approx(1.0, abs=1e-12)
    exact = np.pi ** -0.25 * np.exp(-g.x ** 2 / 2)
    assert np.max(np.abs(ep.phi - exact)) < 1e-4


def test_harmonic_1d_second_order_error():
    # 3-point stencil error on the ground state is -h^2/16 (from <phi, phi''''>/12)
    errs = []
    for n in (256, 512):
        g = Grid(1, 10.0, n)
        errs.append(1.0 - principal_eigenpair(g, g.r2).lam)
        assert errs[-1] == pytest.approx(g.h ** 2 / 16, rel=2e-2)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=2e-2)


def test_harmonic_2d():
    g = Grid(2, 5.0, 128)
    assert principal_eigenpair(g, g.r2).lam == pytest.approx(2.0, abs=1e-3)
    g8 = Grid(2, 8.0, 128)
    # two 1-D errors of h^2/16 each
    assert principal_eigenpair(g8, g8.r2).lam == pytest.approx(2.0 - g8.h ** 2 / 8, abs=1e-4)


def test_anisotropic_harmonic_sum_of_frequencies():
    g = Grid(2, 6.0, 96)
    V = PotentialSpec("anisotropic-harmonic", {"a": [1.0, 4.0]}).evaluate(g)
    assert principal_eigenpair(g, V).lam == pytest.approx(3.0, abs=5e-3)


def test_quartic_oscillator():
    # ground state of -d^2/dx^2 + x^4
    g = Grid(1, 6.0, 1024)
    V = PotentialSpec("quartic").evaluate(g)
    assert principal_eigenpair(g, V).lam == pytest.approx(1.0603620904841829, abs=1e-4)


def test_rayleigh_quotient_at_eigenpair():
    g = Grid(1, 8.0, 400)
    ep = principal_eigenpair(g, g.r2)
    assert rayleigh_quotient(g, ep.phi, g.r2) == pytest.approx(ep.lam, rel=1e-12)
    rng = np.random.default_rng(0)
    f = ep.phi + 0.1 * rng.standard_normal(g.shape) * ep.phi
    assert rayleigh_quotient(g, f, g.r2) >= ep.lam - 1e-12


def test_threshold():
    m = ModelParams.harmonic(n=512, mu1=-1, mu2=-1, beta=0.5, scale2=4.0)
    lam1, lam2 = m.lambdas
    assert lam2 == pytest.approx(2.0, abs=1e-3)
    assert feasibility_threshold(m, 2.0, 0.5) == pytest.approx(2 * lam1 + 0.5 * lam2)
    with pytest.raises(ConfigError):
        feasibility_threshold(m, 0.0, 1.0)
