"""Finite-activity jump intensity measures, per-regime jump coefficients and
the integral functionals the stability formulas need.

Two measure families are supported: a finite list of atoms with rates, and
``total_rate * density(y) dy`` on an interval (default ``(0, inf)``) with the
density given as an expression in ``y``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DomainViolation, EvalDomainError, GammaOutOfRange,
                     MomentDivergence, QuadratureFailure)
from .exprlang import ScalarFunction

QUAD_RTOL = 1e-8
QUAD_BUDGET = 2 ** 15
_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_INITIAL_PANELS = 16


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    rates: np.ndarray
    marks: np.ndarray
    kind: str = field(default="atomic", init=False)

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        marks = np.atleast_1d(np.asarray(self.marks, dtype=float))
        if rates.size == 0:
            raise ValueError("atomic measure needs at least one atom")
        if rates.shape != marks.shape:
            raise ValueError("rates and marks must have equal length")
        if np.any(~np.isfinite(rates)) or np.any(rates <= 0):
            raise ValueError("atom rates must be positive and finite")
        if np.unique(marks).size != marks.size:
            raise ValueError("atom marks must be distinct")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "marks", marks)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def atom_index(self, marks):
        order = np.argsort(self.marks)
        pos = np.searchsorted(self.marks[order], marks)
        pos = np.clip(pos, 0, self.marks.size - 1)
        idx = order[pos]
        if np.any(self.marks[idx] != marks):
            raise ValueError("mark outside the atom set")
        return idx


def atomic(rates, marks=None) -> AtomicMeasure:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if marks is None:
        marks = np.arange(1, rates.size + 1, dtype=float)
    return AtomicMeasure(rates, marks)


class ParametricMeasure:
    """``total_rate * density(y) dy`` on ``support``; density must integrate to 1."""

    kind = "parametric"

    def __init__(self, total_rate: float, density: str, support=(0.0, math.inf)):
        if not (total_rate > 0 and math.isfinite(total_rate)):
            raise ValueError("total rate must be positive and finite")
        lo, hi = float(support[0]), float(support[1])
        if not (math.isfinite(lo) and hi > lo):
            raise ValueError("support must be (lo, hi) with finite lo < hi")
        self.total_rate = float(total_rate)
        self.density_src = density
        self.density = ScalarFunction(density, "y")
        self.support = (lo, hi)
        nodes = self.check_nodes()
        try:
            vals = np.broadcast_to(self.density(nodes), nodes.shape)
        except EvalDomainError as exc:
            raise DomainViolation(f"density undefined on support: {exc}") from None
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("density must be nonnegative and finite on the support")
        mass = gauss_legendre_adaptive(self._density_on_t, 0.0, 1.0)
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        self._cdf = None

    def __reduce__(self):
        return (ParametricMeasure, (self.total_rate, self.density_src, self.support))

    # map the support onto (0, 1); Jacobian included
    def to_support(self, t):
        lo, hi = self.support
        if math.isinf(hi):
            return lo + t / (1.0 - t), 1.0 / (1.0 - t) ** 2
        return lo + (hi - lo) * t, np.full_like(t, hi - lo)

    def _density_on_t(self, t):
        y, jac = self.to_support(t)
        return np.broadcast_to(self.density(y), y.shape) * jac

    def check_nodes(self):
        """1024 quadrature nodes spread over the support."""
        edges = np.linspace(0.0, 1.0, 65)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * np.diff(edges)[:, None]
        t = (mid + half * _GL_X[None, :]).ravel()
        return self.to_support(t)[0]

    def inverse_cdf(self, u):
        """Mark quantiles by inverting a tabulated CDF in the mapped variable."""
        if self._cdf is None:
            panels = 4096
            edges = np.linspace(0.0, 1.0, panels + 1)
            mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
            half = 0.5 / panels
            t = mid + half * _GL_X[None, :]
            mass = half * (self._density_on_t(t.ravel()).reshape(t.shape) @ _GL_W)
            cdf = np.concatenate(([0.0], np.cumsum(mass)))
            self._cdf = (edges, cdf / cdf[-1])
        edges, cdf = self._cdf
        t = np.interp(u, cdf, edges)
        t = np.clip(t, 0.0, np.nextafter(1.0, 0.0))
        return self.to_support(t)[0]


def gauss_legendre_adaptive(g, a, b, rtol=QUAD_RTOL, budget=QUAD_BUDGET):
    """Globally adaptive Gauss-Legendre quadrature of vectorised ``g`` on ``[a, b]``.

    Each panel's error is estimated by comparing its one-panel rule with the
    sum over its two halves; the worst panel is bisected until the summed
    estimate meets ``rtol`` or ``budget`` integrand evaluations are spent.
    """
    def rule(lo, hi):
        c, h = 0.5 * (hi + lo), 0.5 * (hi - lo)
        vals = g(c + h * _GL_X)
        return h * float(vals @ _GL_W), h * float(np.abs(vals) @ _GL_W)

    def refine(lo, hi, coarse):
        mid = 0.5 * (lo + hi)
        left, labs = rule(lo, mid)
        right, rabs = rule(mid, hi)
        fine = left + right
        return fine, labs + rabs, abs(fine - coarse)

    evals = 0
    heap = []
    edges = np.linspace(a, b, _INITIAL_PANELS + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        coarse, _ = rule(lo, hi)
        fine, fabs, err = refine(lo, hi, coarse)
        evals += 3 * _GL_ORDER
        heapq.heappush(heap, (-err, lo, hi, fine, fabs))
    while True:
        total = sum(item[3] for item in heap)
        total_abs = sum(item[4] for item in heap)
        err = sum(-item[0] for item in heap)
        if not math.isfinite(total):
            raise QuadratureFailure("integrand is not finite on the support")
        if err <= rtol * abs(total) + 1e-15 * total_abs:
            return float(total)
        if evals + 4 * _GL_ORDER > budget:
            raise QuadratureFailure(
                f"relative tolerance {rtol} not reached within {budget} evaluations")
        _, lo, hi, fine, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            coarse, _ = rule(sub_lo, sub_hi)
            sfine, sabs, serr = refine(sub_lo, sub_hi, coarse)
            heapq.heappush(heap, (-serr, sub_lo, sub_hi, sfine, sabs))
        evals += 6 * _GL_ORDER


def integrate_functional(measure, f, rtol=QUAD_RTOL, budget=QUAD_BUDGET) -> float:
    """Integral of ``f`` (vectorised over marks) against the intensity measure."""
    try:
        if measure.kind == "atomic":
            vals = np.broadcast_to(f(measure.marks), measure.marks.shape)
            return float(np.dot(measure.rates, vals))

        def g(t):
            y, jac = measure.to_support(t)
            dens = np.broadcast_to(measure.density(y), y.shape)
            return measure.total_rate * dens * np.broadcast_to(f(y), y.shape) * jac

        return gauss_legendre_adaptive(g, 0.0, 1.0, rtol, budget)
    except EvalDomainError as exc:
        raise DomainViolation(str(exc)) from None


@dataclass(frozen=True, eq=False)
class GammaProfile:
    """Per-regime jump coefficient ``gamma_i(y)``.

    Atomic measures use ``table`` (one row per atom, one column per regime);
    parametric measures use one expression in ``y`` per regime.
    """

    m: int
    table: Optional[np.ndarray] = None
    exprs: Optional[tuple] = None
    measure: object = None

    def gamma(self, regime: int, marks):
        marks = np.asarray(marks, dtype=float)
        if self.table is not None:
            return self.table[self.measure.atom_index(marks), regime]
        try:
            return np.broadcast_to(self.exprs[regime](marks), marks.shape).astype(float)
        except EvalDomainError as exc:
            raise DomainViolation(str(exc)) from None


def atomic_profile(measure: AtomicMeasure, table) -> GammaProfile:
    table = np.asarray(table, dtype=float)
    if table.ndim == 1:
        table = table[None, :]
    if table.shape[0] != measure.rates.size:
        raise ValueError("one gamma row per atom required")
    prof = GammaProfile(table.shape[1], table=table, measure=measure)
    check_profile(measure, prof)
    return prof


def parametric_profile(measure: ParametricMeasure, exprs) -> GammaProfile:
    funcs = tuple(ScalarFunction(src, "y") for src in exprs)
    prof = GammaProfile(len(funcs), exprs=funcs, measure=measure)
    check_profile(measure, prof)
    return prof


def check_profile(measure, profile: GammaProfile):
    """Enforce ``gamma_i > -1`` on the atoms or on 1024 nodes of the support."""
    marks = measure.marks if measure.kind == "atomic" else measure.check_nodes()
    for i in range(profile.m):
        g = profile.gamma(i, marks)
        bad = ~(g > -1.0) | ~np.isfinite(g)
        if np.any(bad):
            y = float(np.asarray(marks)[bad][0])
            val = float(np.asarray(g)[bad][0])
            raise GammaOutOfRange(
                f"jump coefficient of regime {i + 1} is {val} at mark {y}; "
                "the jump hypothesis requires gamma > -1")


@dataclass(frozen=True)
class JumpMoments:
    """Per-regime jump functionals (rates, units 1/time)."""

    gamma_sq: float     # int gamma^2
    mu: float           # int [ln(1+gamma) - gamma]
    delta: float        # int [gamma^2 + 2 gamma - 2 ln(1+gamma)]
    m_small: float      # int [2 gamma - 2 ln(1+gamma)]
    log_sq: float       # int ln(1+gamma)^2
    gamma_mean: float   # int gamma, the compensator rate
    log_mean: float     # int ln(1+gamma)

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def jump_moments(measure, profile: GammaProfile, regime: int) -> JumpMoments:
    if measure is None:
        return JumpMoments.zero()

    def gam(y):
        g = profile.gamma(regime, y)
        if np.any(~(g > -1.0)):
            raise GammaOutOfRange(
                f"jump coefficient of regime {regime + 1} reaches {float(np.min(g))} <= -1")
        return g

    def excess(y):
        g = gam(y)
        return np.maximum(2.0 * (g - np.log1p(g)), 0.0)

    gamma_sq = integrate_functional(measure, lambda y: gam(y) ** 2)
    m_small = integrate_functional(measure, excess)
    log_sq = integrate_functional(measure, lambda y: np.log1p(gam(y)) ** 2)
    gamma_mean = integrate_functional(measure, gam)
    log_mean = integrate_functional(measure, lambda y: np.log1p(gam(y)))
    vals = (gamma_sq, m_small, log_sq, gamma_mean, log_mean)
    if not all(math.isfinite(v) for v in vals):
        raise MomentDivergence(f"jump moments of regime {regime + 1} are not finite")
    return JumpMoments(gamma_sq=gamma_sq, mu=-0.5 * m_small, delta=gamma_sq + m_small,
                       m_small=m_small, log_sq=log_sq, gamma_mean=gamma_mean,
                       log_mean=log_mean)


@dataclass(frozen=True, eq=False)
class JumpTrain:
    times: np.ndarray
    marks: np.ndarray
    horizon: float

    @property
    def events(self):
        return list(zip(self.times.tolist(), self.marks.tolist()))

    def __len__(self):
        return self.times.size


def empty_train(T: float) -> JumpTrain:
    return JumpTrain(np.empty(0), np.empty(0), float(T))


def sample_jump_train(measure, T: float, rng: np.random.Generator) -> JumpTrain:
    """Poisson(Lambda T) jump count, uniform order-statistic times, i.i.d. marks."""
    if T <= 0:
        raise ValueError("horizon must be positive")
    lam = measure.total_rate
    count = int(rng.poisson(lam * T))
    times = np.sort(rng.uniform(0.0, T, size=count))
    u = rng.random(count)
    if measure.kind == "atomic":
        cum = np.cumsum(measure.rates) / lam
        idx = np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)
        marks = measure.marks[idx]
    else:
        marks = measure.inverse_cdf(u)
    return JumpTrain(times, np.asarray(marks, dtype=float), float(T))
