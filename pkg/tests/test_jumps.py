import math
import pickle

import numpy as np
import pytest
from scipy import integrate, stats

from switchspde.errors import DomainViolation, GammaOutOfRange
from switchspde.jumps import (JumpMoments, ParametricMeasure, atomic, atomic_profile,
                              gauss_legendre_adaptive, integrate_functional, jump_moments,
                              parametric_profile, sample_jump_train)


def test_atomic_integral_is_weighted_sum():
    m = atomic([2.0])
    prof = atomic_profile(m, [[0.5]])
    assert integrate_functional(m, lambda y: prof.gamma(0, y) ** 2) == 0.5


def test_zero_integrand():
    m = ParametricMeasure(3.0, "exp(-y)")
    assert integrate_functional(m, lambda y: 0.0 * y) == 0.0
    assert integrate_functional(atomic([1.0, 2.0]), lambda y: 0.0 * y) == 0.0


def test_exponential_mean():
    m = ParametricMeasure(1.0, "exp(-y)")
    assert integrate_functional(m, lambda y: y) == pytest.approx(1.0, rel=1e-8)


def test_bounded_support_uniform():
    m = ParametricMeasure(2.0, "0.5", support=(1.0, 3.0))
    # rate 2, mean mark 2
    assert integrate_functional(m, lambda y: y) == pytest.approx(4.0, rel=1e-10)


def test_density_must_be_normalized():
    with pytest.raises(ValueError):
        ParametricMeasure(1.0, "2*exp(-y)")
    with pytest.raises(ValueError):
        ParametricMeasure(1.0, "sin(y)", support=(0.0, 2 * math.pi))


def test_quadrature_handles_peaked_integrand():
    val = gauss_legendre_adaptive(lambda t: np.exp(-((t - 0.3) / 1e-3) ** 2), 0.0, 1.0)
    assert val == pytest.approx(math.sqrt(math.pi) * 1e-3, rel=1e-8)


def test_domain_violation_from_integrand():
    m = ParametricMeasure(1.0, "exp(-y)")
    prof = parametric_profile(m, ["0.5"])
    from switchspde.exprlang import ScalarFunction
    bad = ScalarFunction("ln(y - 1)", "y")
    with pytest.raises(DomainViolation):
        integrate_functional(m, bad)
    assert prof.m == 1


def test_reference_mu_value():
    mo = jump_moments(atomic([2.0]), atomic_profile(atomic([2.0]), [[0.5]]), 0)
    assert mo.mu == pytest.approx(2 * (math.log(1.5) - 0.5), rel=1e-14)
    assert mo.mu == pytest.approx(-0.18906, abs=1e-5)


def test_delta_value_and_identity():
    m = atomic([1.0])
    mo = jump_moments(m, atomic_profile(m, [[1.0]]), 0)
    assert mo.delta == pytest.approx(1 + 2 - 2 * math.log(2), rel=1e-14)
    assert mo.delta == pytest.approx(1.61371, abs=1e-5)
    assert mo.delta == mo.gamma_sq + mo.m_small


def test_zero_gamma_gives_zero_moments():
    m = ParametricMeasure(1.5, "exp(-y)")
    mo = jump_moments(m, parametric_profile(m, ["0"]), 0)
    assert mo == JumpMoments.zero()
    assert jump_moments(None, None, 0) == JumpMoments.zero()


def test_parametric_moments_against_scipy_quad():
    m = ParametricMeasure(2.0, "exp(-y)")
    prof = parametric_profile(m, ["y/(1+y)", "-0.5*exp(-y)"])
    for i, gam in enumerate([lambda y: y / (1 + y), lambda y: -0.5 * math.exp(-y)]):
        def w(f):
            return 2.0 * integrate.quad(lambda y: f(y) * math.exp(-y), 0, math.inf,
                                        epsabs=0, epsrel=1e-12)[0]
        mo = jump_moments(m, prof, i)
        assert mo.gamma_sq == pytest.approx(w(lambda y: gam(y) ** 2), rel=1e-8)
        assert mo.mu == pytest.approx(w(lambda y: math.log1p(gam(y)) - gam(y)), rel=1e-8)
        assert mo.log_sq == pytest.approx(w(lambda y: math.log1p(gam(y)) ** 2), rel=1e-8)
        assert mo.gamma_mean == pytest.approx(w(gam), rel=1e-8)
        assert mo.delta == mo.gamma_sq + mo.m_small
        assert mo.mu <= 0 <= mo.m_small


def test_narrow_gaussian_matches_atom():
    # a point mass at y0 = 1 smoothed to a narrow Gaussian on the same rate
    s = 1e-3
    dens = f"exp(-((y - 1)/{s})^2/2)/({s}*sqrt(2*pi))"
    smooth = ParametricMeasure(2.0, dens, support=(1 - 12 * s, 1 + 12 * s))
    sp = parametric_profile(smooth, ["0.5*y"])
    exact = jump_moments(atomic([2.0]), atomic_profile(atomic([2.0]), [[0.5]]), 0)
    approx = jump_moments(smooth, sp, 0)
    for name in ("gamma_sq", "mu", "delta", "m_small", "log_sq"):
        assert getattr(approx, name) == pytest.approx(getattr(exact, name), abs=1e-4)


def test_gamma_out_of_range_cites_hypothesis():
    m = atomic([1.0])
    with pytest.raises(GammaOutOfRange, match="gamma > -1"):
        atomic_profile(m, [[-1.5]])
    pm = ParametricMeasure(1.0, "exp(-y)")
    with pytest.raises(GammaOutOfRange):
        parametric_profile(pm, ["-y"])


def test_measures_pickle():
    pm = ParametricMeasure(1.0, "exp(-y)")
    back = pickle.loads(pickle.dumps(pm))
    assert back.total_rate == 1.0 and back.density_src == "exp(-y)"


def test_train_count_mean():
    m = atomic([0.5, 1.5])
    counts = np.array([len(sample_jump_train(m, 1.0, np.random.default_rng(s)))
                       for s in range(10_000)])
    assert abs(counts.mean() - 2.0) <= 3 * math.sqrt(2.0 / 10_000)


def test_train_structure_and_determinism():
    m = atomic([3.0])
    a = sample_jump_train(m, 10.0, np.random.default_rng(4))
    b = sample_jump_train(m, 10.0, np.random.default_rng(4))
    assert a.events == b.events
    assert np.all(np.diff(a.times) > 0)
    assert np.all(a.marks == 1.0)


def test_atomic_marks_chi_square():
    # 1% test on five independent trains: a correct sampler fails at most one
    # with probability above 0.999
    m = atomic([1.0, 2.0, 5.0], [0.1, 0.2, 0.3])
    passed = 0
    for seed in range(5):
        tr = sample_jump_train(m, 10_000 / 8.0, np.random.default_rng(seed))
        obs = np.array([(tr.marks == v).sum() for v in m.marks])
        passed += stats.chisquare(obs, obs.sum() * m.rates / m.total_rate).pvalue > 0.01
    assert passed >= 4


def test_parametric_marks_chi_square():
    m = ParametricMeasure(1.0, "exp(-y)")
    edges = np.array([0, 0.25, 0.5, 1, 1.5, 2, 3, np.inf])
    probs = np.diff(1 - np.exp(-edges))
    passed = 0
    for seed in range(5):
        tr = sample_jump_train(m, 10_000.0, np.random.default_rng(seed))
        obs = np.histogram(tr.marks, edges)[0]
        passed += stats.chisquare(obs, obs.sum() * probs).pvalue > 0.01
    assert passed >= 4
