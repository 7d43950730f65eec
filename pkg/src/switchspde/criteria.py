"""Analytic almost-sure stability criteria on the weighted quadratic family
``U(x, i) = sigma_i |x|^2``, the closed-form exponent of the linear class,
and a derivative-free optimiser for the weights ``sigma``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ctmc import GeneratorMatrix, stationary_distribution
from .errors import HypothesisViolated, NoImprovement, NonpositiveD
from .spectral import first_nonzero_index

INDEX_READING_NOTE = ("the per-regime jump term is summed as sum_j pi_j mu_j "
                      "(the regime index inside the jump integral is read as j)")
SIGMA_BOUNDS = (1e-3, 1e3)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class RegimeCriterionTerms:
    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    rho: np.ndarray

    def to_json(self) -> dict:
        return {k: [float(v) for v in getattr(self, k)] for k in ("alpha", "beta", "delta", "rho")}


@dataclass(eq=False)
class CriterionReport:
    tag: str                    # thm31 | thm41 | thm44 | ex33 | ex45
    bound: float
    verdict: str
    kind: str = "bound"         # bound: limsup estimate; exact: true limit
    terms: Optional[RegimeCriterionTerms] = None
    pi: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    p: Optional[float] = None
    hypotheses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"tag": self.tag, "kind": self.kind, "bound": float(self.bound),
               "verdict": self.verdict}
        if self.terms is not None:
            out["terms"] = self.terms.to_json()
        if self.pi is not None:
            out["pi"] = [float(v) for v in self.pi]
        if self.sigma is not None:
            out["sigma"] = [float(v) for v in self.sigma]
        if self.p is not None:
            out["p"] = float(self.p)
        if self.hypotheses:
            out["hypotheses"] = dict(self.hypotheses)
        if self.notes:
            out["notes"] = list(self.notes)
        for k, v in self.extra.items():
            out[k] = v
        return out


def verdict_for(bound: float) -> str:
    if bound < 0:
        return "stable"
    if bound > 0:
        return "unstable"
    return "inconclusive"


def normalize_sigma(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("weights must be strictly positive")
    return sigma / sigma.min()


def _switching_terms(rates, sigma):
    """``sum_j g_ij s_j/s_i`` and ``sum_j g_ij [ln(s_j/s_i) - s_j/s_i]``.

    Written over ``j != i`` using ``g_ii = -sum_{j != i} g_ij`` so both vanish
    exactly for uniform weights.
    """
    m = rates.shape[0]
    ratio = sigma[None, :] / sigma[:, None]
    off = ~np.eye(m, dtype=bool)
    gen = np.where(off, rates * (ratio - 1.0), 0.0).sum(axis=1)
    rho = np.where(off, rates * (np.log(ratio) - ratio + 1.0), 0.0).sum(axis=1)
    return gen, rho


def linear_terms(s, sigma=None) -> RegimeCriterionTerms:
    """Per-regime constants for the linear class."""
    m = s.m
    sigma = np.ones(m) if sigma is None else np.asarray(sigma, dtype=float)
    gen, rho = _switching_terms(s.generator.rates, sigma)
    lam1 = s.basis.eigenvalues[0]
    ab, bb = s.dynamics.alpha, s.dynamics.beta
    gsq = np.array([mo.gamma_sq for mo in s.moments])
    alpha = -2.0 * lam1 + 2.0 * ab + bb ** 2 + gsq + gen
    beta = 4.0 * bb ** 2
    delta = np.array([mo.delta for mo in s.moments])
    return RegimeCriterionTerms(alpha, beta, delta, rho)


def semilinear_terms(b, d, nu: float, moments, sigma, generator: GeneratorMatrix) -> RegimeCriterionTerms:
    """Per-regime constants for Nemytskii drift/diffusion with bounds ``b_i``, ``d_i``.

    ``nu`` is the lower bound of the spectrum of ``-A``.
    """
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(d > 0)):
        raise NonpositiveD("diffusion lower-bound constants d_i must be positive")
    gen, rho = _switching_terms(generator.rates, sigma)
    gsq = np.array([mo.gamma_sq for mo in moments])
    alpha = -2.0 * nu + b + gsq + gen
    beta = d / sigma ** 2
    delta = np.array([mo.delta for mo in moments])
    return RegimeCriterionTerms(alpha, beta, delta, rho)


def decay_quantity(terms: RegimeCriterionTerms, pi) -> float:
    """``sum_i pi_i (beta_i/2 + delta_i - alpha_i - rho_i)``; stability iff positive."""
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    return float(np.dot(pi, 0.5 * terms.beta + terms.delta - terms.alpha - terms.rho))


def _sigma_family_hypotheses(sigma):
    return {
        "(i)": f"c1 = {float(np.min(sigma))!r}, c2 = {float(np.max(sigma))!r} (min/max weight), p = 2",
        "(iv)": "holds with Psi = sigma_j/sigma_i",
        "(v)": "zeta finite: Lambda is a weight ratio times (1+gamma)^2, "
               "bounded under the jump moment hypotheses",
        "(vi)": "eta finite: Upsilon is a ratio of weights, bounded above and below",
    }


def theorem31_bound(terms: RegimeCriterionTerms, pi, p: float = 2.0, sigma=None) -> CriterionReport:
    """Certified limsup of ``(1/t) ln|X(t)|``: ``-(1/p) * decay_quantity``."""
    if not p > 0:
        raise ValueError("p must be positive")
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    q = decay_quantity(terms, pi)
    bound = -q / p
    sig = None if sigma is None else np.asarray(sigma, dtype=float)
    hyp = _sigma_family_hypotheses(sig if sig is not None else np.ones(pi.size))
    return CriterionReport("thm31", bound, "stable" if q > 0 else verdict_for(bound),
                           terms=terms, pi=pi, sigma=sig, p=p, hypotheses=hyp)


def _linear_sum(s, pi):
    ab, bb = s.dynamics.alpha, s.dynamics.beta
    mu = np.array([mo.mu for mo in s.moments])
    return float(np.dot(pi, ab - 0.5 * bb ** 2 + mu))


def theorem41_bound(s) -> CriterionReport:
    """``-lam_1 + sum_j pi_j (alpha_j - beta_j^2/2 + mu_j)`` for the linear class."""
    pi = stationary_distribution(s.generator).pi
    bound = float(-s.basis.eigenvalues[0] + _linear_sum(s, pi))
    return CriterionReport("thm41", bound, verdict_for(bound), pi=pi,
                           hypotheses={"jump moments": "gamma > -1 and finite "
                                       "int gamma^2, int ln(1+gamma)^2 (checked)"},
                           notes=[INDEX_READING_NOTE])


def theorem44_exact(s, n0: Optional[int] = None) -> CriterionReport:
    """Almost-sure limit for deterministic nonzero initial data with first mode ``n0``."""
    if n0 is None:
        n0 = first_nonzero_index(s.initial)
    pi = stationary_distribution(s.generator).pi
    value = float(-s.basis.eigenvalues[n0 - 1] + _linear_sum(s, pi))
    return CriterionReport("thm44", value, verdict_for(value), kind="exact", pi=pi,
                           notes=[INDEX_READING_NOTE], extra={"n0": int(n0)})


def example45_q_range(alpha_bar, mu, nu: float, lam1: float = 1.0):
    """Open interval of return rates ``q`` certified stable for the two-regime switch.

    Needs ``alpha_1 + mu_1 > lam1`` and ``alpha_2 + mu_2 < lam1``.
    """
    a1, a2 = float(alpha_bar[0]), float(alpha_bar[1])
    m1, m2 = float(mu[0]), float(mu[1])
    if not a1 + m1 > lam1:
        raise HypothesisViolated("first", f"alpha_1 + mu_1 = {a1 + m1} is not > {lam1}")
    if not a2 + m2 < lam1:
        raise HypothesisViolated("second", f"alpha_2 + mu_2 = {a2 + m2} is not < {lam1}")
    return (0.0, nu * (lam1 - a2 - m2) / (a1 + m1 - lam1))


def example45_report(s) -> CriterionReport:
    rates = s.generator.rates
    nu, q = rates[0, 1], rates[1, 0]
    mu = [mo.mu for mo in s.moments]
    lam1 = s.basis.eigenvalues[0]
    lo, hi = example45_q_range(s.dynamics.alpha, mu, float(nu), float(lam1))
    pi = stationary_distribution(s.generator).pi
    bound = float(-lam1 + _linear_sum(s, pi))
    inside = lo < q < hi
    return CriterionReport("ex45", bound, verdict_for(bound), kind="bound", pi=pi,
                           extra={"q_range": [lo, hi], "q": float(q), "q_in_range": bool(inside)})


def example33_theta(b, d, m_small, nu: float, q: float, lam2: float) -> float:
    """The decay constant of the two-regime semilinear example with weights ``(1, lam2)``."""
    return (q * (d[0] / 2.0 + m_small[0] + 2.0 * nu - b[0])
            + d[1] / (2.0 * lam2 ** 2) + m_small[1] + 2.0 * nu - b[1])


def example33_bound(b, d, m_small, nu: float, q: float, lam2: float) -> CriterionReport:
    theta = float(example33_theta(b, d, m_small, nu, q, lam2))
    bound = -theta / (2.0 * (1.0 + q))
    return CriterionReport("ex33", bound, verdict_for(bound), sigma=np.array([1.0, lam2]),
                           p=2.0, extra={"theta": theta})


def _golden_max(phi, lo, hi, tol=1e-10, max_iter=200):
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = phi(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = phi(x1)
    cands = [(f1, x1), (f2, x2), (phi(lo), lo), (phi(hi), hi)]
    return max(cands)


def optimize_sigma(terms_builder: Callable, pi, p: float = 2.0, bounds=SIGMA_BOUNDS,
                   sweeps: int = 3):
    """Maximise ``decay_quantity`` over weights in ``bounds`` by coordinate search.

    Works in ``log sigma``: ``sweeps`` golden-section passes over each
    coordinate's full range, then one pass on a bracket half as wide centred
    at the incumbent. The objective is evaluated on weights normalised to
    ``min sigma = 1``. Returns ``(sigma, report)`` with normalised ``sigma``.
    """
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    m = pi.size
    if m < 2:
        raise ValueError("weights are irrelevant for a single regime")
    lo, hi = math.log(bounds[0]), math.log(bounds[1])

    def objective(x):
        return decay_quantity(terms_builder(normalize_sigma(np.exp(x))), pi)

    x = np.zeros(m)
    best = objective(x)
    base = best

    def coord_pass(width):
        nonlocal best
        for i in range(m):
            a = max(lo, x[i] - width / 2) if width < hi - lo else lo
            b = min(hi, x[i] + width / 2) if width < hi - lo else hi

            def phi(t, i=i):
                y = x.copy()
                y[i] = t
                return objective(y)

            val, arg = _golden_max(phi, a, b)
            if val > best:
                best = val
                x[i] = arg

    for _ in range(sweeps):
        coord_pass(hi - lo)
    coord_pass((hi - lo) / 2)
    # gains at rounding level come from cancellation noise, not structure
    if best - base <= 1e-10 * (1.0 + abs(base)):
        warnings.warn("no weights improve on uniform; uniform weights returned",
                      NoImprovement, stacklevel=2)
        sigma = np.ones(m)
    else:
        sigma = normalize_sigma(np.exp(x))
    report = theorem31_bound(terms_builder(sigma), pi, p, sigma)
    report.notes.append("weights from coordinate search" if not np.all(sigma == 1.0)
                        else "uniform weights")
    return sigma, report
