import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SCENARIOS, example45, linear_scenario
from switchspde.criteria import (RegimeCriterionTerms, SIGMA_BOUNDS, decay_quantity,
                                 example33_bound, example33_theta, example45_q_range,
                                 example45_report, linear_terms, normalize_sigma,
                                 optimize_sigma, semilinear_terms, theorem31_bound,
                                 theorem41_bound, theorem44_exact, verdict_for)
from switchspde.ctmc import stationary_distribution, validate_generator
from switchspde.errors import HypothesisViolated, NoImprovement, NonpositiveD
from switchspde.jumps import JumpMoments, atomic, atomic_profile, jump_moments
from switchspde.scenario import load


def _moment(gamma_sq=0.0, m_small=0.0):
    return JumpMoments(gamma_sq=gamma_sq, mu=-m_small / 2, delta=gamma_sq + m_small,
                       m_small=m_small, log_sq=0.0, gamma_mean=0.0, log_mean=0.0)


def _moments(m):
    return [_moment() for _ in range(m)]


def test_single_regime_linear_terms():
    a, b = 0.7, 0.4
    s = linear_scenario(alpha=(a,), beta=(b,))
    t = linear_terms(s)
    assert t.alpha[0] == pytest.approx(-2.0 + 2 * a + b * b, abs=1e-15)
    assert t.beta[0] == pytest.approx(4 * b * b, abs=1e-15)
    assert t.delta[0] == 0.0 and t.rho[0] == 0.0


def test_rho_for_two_regime_weights():
    q, lam2 = 0.8, 2.5
    g = validate_generator([[-1.0, 1.0], [q, -q]])
    t = semilinear_terms([0.0, 0.0], [1.0, 1.0], 1.0, _moments(2), [1.0, lam2], g)
    assert t.rho[0] == pytest.approx(math.log(lam2) - lam2 + 1, abs=1e-15)
    assert t.rho[1] == pytest.approx(q * (-math.log(lam2) - 1 / lam2 + 1), abs=1e-15)
    assert np.all(t.rho <= 0)


def test_rho_matches_full_sum_form():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(2, 6))
        a = rng.uniform(0.1, 3.0, (m, m))
        g = validate_generator(a)
        sig = np.exp(rng.uniform(-3, 3, m))
        t = semilinear_terms(np.zeros(m), np.ones(m), 1.0, _moments(m), sig, g)
        r = sig[None, :] / sig[:, None]
        want = (g.rates * (np.log(r) - r)).sum(axis=1)
        np.testing.assert_allclose(t.rho, want, rtol=0, atol=1e-12)


def test_trivial_terms_give_zero_and_inconclusive():
    z = np.zeros(2)
    rep = theorem31_bound(RegimeCriterionTerms(z, z, z, z), [0.5, 0.5])
    assert rep.bound == 0.0 and rep.verdict == "inconclusive"


def test_theorem31_formula():
    t = RegimeCriterionTerms(np.array([1.0, -3.0]), np.array([0.5, 0.2]),
                             np.array([0.1, 0.0]), np.array([0.0, -0.2]))
    pi = [0.25, 0.75]
    q = 0.25 * (0.25 + 0.1 - 1.0) + 0.75 * (0.1 + 3.0 + 0.2)
    rep = theorem31_bound(t, pi, p=2)
    assert rep.bound == pytest.approx(-q / 2, abs=1e-15)
    assert theorem31_bound(t, pi, p=4).bound == pytest.approx(-q / 4, abs=1e-15)
    with pytest.raises(ValueError):
        theorem31_bound(t, pi, p=0)
    assert set(rep.hypotheses) == {"(i)", "(iv)", "(v)", "(vi)"}


def test_theorem41_geometric_jump_value():
    s = load(SCENARIOS / "geometric_jump.json").scenario
    rep = theorem41_bound(s)
    assert rep.bound == pytest.approx(-0.68907, abs=1e-5)
    assert rep.bound == pytest.approx(-1 + 1 - 0.5 + 2 * (math.log(1.5) - 0.5), abs=1e-14)


def test_theorem41_without_noise_is_minus_lambda1():
    s = linear_scenario(alpha=(0.0,), beta=(0.0,), length=2.0)
    assert theorem41_bound(s).bound == pytest.approx(-(math.pi / 2) ** 2, abs=1e-14)


def test_theorem41_switching_example():
    rep = theorem41_bound(example45())
    assert rep.bound == pytest.approx(-2 / 3, abs=1e-14)
    assert rep.verdict == "stable"
    assert rep.notes


def test_theorem44_second_mode():
    a = 0.3
    s = linear_scenario(alpha=(a,), beta=(0.0,), mode=2)
    rep = theorem44_exact(s)
    assert rep.bound == pytest.approx(-4 + a, abs=1e-14)
    assert rep.kind == "exact" and rep.extra["n0"] == 2
    assert theorem44_exact(s, n0=1).bound == pytest.approx(-1 + a)


def test_frozen_unstable_regime():
    s = linear_scenario(alpha=(3.0,), beta=(0.0,))
    assert theorem44_exact(s).bound == 2.0
    assert theorem41_bound(s).verdict == "unstable"


def test_example45_ranges():
    assert example45_q_range([3.0, -1.0], [0, 0], 1.0) == (0.0, 1.0)
    assert example45_q_range([3.0, -1.0], [0, 0], 2.0) == (0.0, 2.0)
    with pytest.raises(HypothesisViolated) as info:
        example45_q_range([0.5, -1.0], [0, 0], 1.0)
    assert info.value.which == "first"
    with pytest.raises(HypothesisViolated) as info:
        example45_q_range([3.0, 2.0], [0, 0], 1.0)
    assert info.value.which == "second"


def test_example45_report_and_sign_change():
    rep = example45_report(example45(q=0.5))
    assert rep.extra["q_range"] == [0.0, 1.0] and rep.extra["q_in_range"]
    assert theorem41_bound(example45(q=2.0)).bound == pytest.approx(2 / 3, abs=1e-14)
    assert theorem41_bound(example45(q=1.0)).bound == pytest.approx(0.0, abs=1e-14)


def test_example33_theta_by_hand():
    b, d, m, nu, q, lam2 = [1.5, -3.5], [0.09, 0.04], [0.02, 0.01], 1.0, 0.6, 1.7
    want = 0.6 * (0.045 + 0.02 + 2.0 - 1.5) + 0.04 / (2 * 1.7 ** 2) + 0.01 + 2.0 + 3.5
    theta = example33_theta(b, d, m, nu, q, lam2)
    assert theta == pytest.approx(want, abs=1e-14)
    rep = example33_bound(b, d, m, nu, q, lam2)
    assert rep.bound == pytest.approx(-want / (2 * 1.6), abs=1e-14)
    assert rep.extra["theta"] == theta


def test_example33_theta_equals_general_decay():
    rng = np.random.default_rng(0)
    for _ in range(100):
        q, lam2, nu = rng.uniform(0.1, 5), rng.uniform(0.2, 5), rng.uniform(0.5, 3)
        b, d = rng.uniform(-5, 5, 2), rng.uniform(0.01, 2, 2)
        gsq, ms = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
        mo = [_moment(gsq[i], ms[i]) for i in range(2)]
        g = validate_generator([[-1.0, 1.0], [q, -q]])
        t = semilinear_terms(b, d, nu, mo, [1.0, lam2], g)
        pi = stationary_distribution(g).pi
        theta = example33_theta(b, d, ms, nu, q, lam2)
        assert abs(theta - (1 + q) * decay_quantity(t, pi)) <= 1e-12 * (1 + abs(theta))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_linear_bound_is_weight_invariant(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    gen = rng.uniform(0.1, 3, (m, m))
    s = linear_scenario(gen, rng.uniform(-2, 2, m), rng.uniform(0, 1, m), jump_rate=1.0,
                        gamma=rng.uniform(-0.5, 0.5, m))
    pi = stationary_distribution(s.generator).pi
    base = theorem41_bound(s).bound
    sig = np.exp(rng.uniform(-4, 4, m))
    assert abs(theorem31_bound(linear_terms(s, sig), pi).bound - base) <= 1e-10
    t = linear_terms(s, sig)
    assert np.all(t.delta >= 0) and np.all(t.rho <= 1e-15)


def test_semilinear_rejects_nonpositive_d():
    g = validate_generator([[0.0]])
    with pytest.raises(NonpositiveD):
        semilinear_terms([1.0], [0.0], 1.0, _moments(1), [1.0], g)


def test_semilinear_beta_scales_with_weight():
    g = validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    t = semilinear_terms([0, 0], [0.09, 0.09], 1.0, _moments(2), [1.0, 3.0], g)
    np.testing.assert_allclose(t.beta, [0.09, 0.01])


def test_verdict_and_normalisation():
    assert [verdict_for(v) for v in (-1, 0, 1)] == ["stable", "inconclusive", "unstable"]
    np.testing.assert_allclose(normalize_sigma([2.0, 4.0]), [1.0, 2.0])
    with pytest.raises(ValueError):
        normalize_sigma([1.0, 0.0])


# optimiser -----------------------------------------------------------------

def _brute_force(builder, pi, n=101):
    xs = np.linspace(math.log(SIGMA_BOUNDS[0]), math.log(SIGMA_BOUNDS[1]), n)
    best = -math.inf
    for a in xs:
        for b in xs:
            best = max(best, decay_quantity(builder(normalize_sigma(np.exp([a, b]))), pi))
    return best


def _interior_builder(c=1.3):
    # test-only family with an interior optimum at sigma = (1, e^c)
    def build(sigma):
        ls = np.log(normalize_sigma(sigma))
        z = np.zeros(2)
        return RegimeCriterionTerms((ls - np.array([0.0, c])) ** 2, z, z, z)
    return build


def test_optimizer_beats_brute_force_on_interior_optimum():
    pi = np.array([0.4, 0.6])
    build = _interior_builder()
    sigma, rep = optimize_sigma(build, pi)
    got = decay_quantity(build(sigma), pi)
    assert got >= _brute_force(build, pi) - 1e-4
    assert sigma[1] == pytest.approx(math.exp(1.3), rel=1e-4)
    assert got == pytest.approx(0.0, abs=1e-8)


def _semilinear_builder(q=0.7):
    g = validate_generator([[-1.0, 1.0], [q, -q]])
    m = atomic([1.0])
    prof = atomic_profile(m, [[0.1, -0.1]])
    mo = [jump_moments(m, prof, i) for i in range(2)]
    return (lambda sig: semilinear_terms([1.49, -3.51], [0.09, 0.05], 1.0, mo, sig, g),
            stationary_distribution(g).pi)


def test_optimizer_against_brute_force_on_semilinear_family():
    build, pi = _semilinear_builder()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoImprovement)
        sigma, rep = optimize_sigma(build, pi)
    assert decay_quantity(build(sigma), pi) >= _brute_force(build, pi) - 1e-4


def test_symmetric_problem_returns_uniform_weights():
    build, pi = _semilinear_builder(q=1.0)
    with pytest.warns(NoImprovement):
        sigma, rep = optimize_sigma(build, pi)
    np.testing.assert_allclose(sigma, [1.0, 1.0], atol=1e-6)
    assert rep.tag == "thm31" and "uniform weights" in rep.notes


def test_linear_objective_is_flat_so_uniform_is_kept():
    s = example45(jumps=True, beta=(0.3, 0.3))
    pi = stationary_distribution(s.generator).pi
    with pytest.warns(NoImprovement):
        sigma, rep = optimize_sigma(lambda sg: linear_terms(s, sg), pi)
    assert np.all(sigma == 1.0)
    assert rep.bound == pytest.approx(theorem41_bound(s).bound, abs=1e-12)


def test_optimizer_needs_two_regimes():
    with pytest.raises(ValueError):
        optimize_sigma(lambda s: None, [1.0])
