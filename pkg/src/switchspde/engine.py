"""Driving noise and the two path solvers.

``exact_linear_path`` evaluates the closed-form mild solution of the linear
class in log form on the event-aligned timeline. ``numerical_path`` runs an
exponential Euler scheme on the mode system (linear or Nemytskii semilinear)
on the same timeline, so both consume identical randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .ctmc import GeneratorMatrix, SwitchingPath, sample_switching_path
from .errors import NotLinear
from .exprlang import ScalarFunction
from .jumps import (GammaProfile, JumpMoments, JumpTrain, empty_train,
                    jump_moments, sample_jump_train)
from .spectral import SpectralBasis, TransformPair

# stream roles; bridge streams use BRIDGE + refinement level
CHAIN, JUMPS, WIENER, BRIDGE = 0, 1, 2, 16


@dataclass(frozen=True, eq=False)
class LinearDynamics:
    alpha: np.ndarray
    beta: np.ndarray
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))


@dataclass(frozen=True, eq=False)
class SemilinearDynamics:
    """Pointwise drift ``f(x, i)`` and diffusion ``g(x, i)``, one expression per regime.

    ``b`` and ``d`` are the constants of the one-sided bounds
    ``2 x f + g^2 <= b x^2`` and ``x g >= sqrt(d) x^2`` used by the criterion.
    """

    drift: tuple
    diffusion: tuple
    b: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    grid_points: Optional[int] = None
    kind: str = field(default="semilinear", init=False)

    def __post_init__(self):
        as_funcs = lambda xs: tuple(x if isinstance(x, ScalarFunction) else ScalarFunction(x, "x")
                                    for x in xs)
        object.__setattr__(self, "drift", as_funcs(self.drift))
        object.__setattr__(self, "diffusion", as_funcs(self.diffusion))
        for name in ("b", "d"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(val, dtype=float)))


@dataclass(frozen=True, eq=False)
class Scenario:
    generator: GeneratorMatrix
    r0: int
    basis: SpectralBasis
    initial: np.ndarray
    dynamics: object
    jump_measure: object = None
    gamma_profile: Optional[GammaProfile] = None
    horizon: float = 1.0
    dt: float = 0.01
    moments: tuple = field(default=(), init=False)

    def __post_init__(self):
        m = self.generator.m
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0 < self.dt <= self.horizon:
            raise ValueError("need 0 < dt <= T")
        if not 0 <= self.r0 < m:
            raise ValueError(f"initial regime {self.r0} outside 0..{m - 1}")
        init = np.asarray(self.initial, dtype=float)
        if init.shape != (self.basis.mode_count,):
            raise ValueError("initial coefficients must match the mode count")
        object.__setattr__(self, "initial", init)
        dyn = self.dynamics
        sizes = ([dyn.alpha.size, dyn.beta.size] if dyn.kind == "linear"
                 else [len(dyn.drift), len(dyn.diffusion)]
                 + [v.size for v in (dyn.b, dyn.d) if v is not None])
        if any(s != m for s in sizes):
            raise ValueError(f"regime-indexed arrays must have length {m}")
        if (self.jump_measure is None) != (self.gamma_profile is None):
            raise ValueError("jump measure and gamma profile go together")
        if self.gamma_profile is not None and self.gamma_profile.m != m:
            raise ValueError(f"gamma profile must cover {m} regimes")
        moms = tuple(jump_moments(self.jump_measure, self.gamma_profile, i) for i in range(m))
        object.__setattr__(self, "moments", moms)

    @property
    def m(self) -> int:
        return self.generator.m

    def with_(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


def stream(master_seed: int, path_id: int, role: int) -> np.random.Generator:
    """Counter-based (Philox) stream keyed by ``(master_seed, path_id, role)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_id), int(role)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class DrivingNoise:
    switching: SwitchingPath
    jumps: JumpTrain
    times: np.ndarray
    w: np.ndarray
    dt: float
    master_seed: int
    path_id: int
    level: int = 0

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.w)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    def interval_regimes(self) -> np.ndarray:
        """Regime on each ``[t_k, t_{k+1})``."""
        return np.asarray(self.switching.state_at(self.times[:-1]), dtype=np.int64)

    def jump_slots(self) -> np.ndarray:
        """Index ``k`` of the interval each jump closes (jump time is ``t_{k+1}``)."""
        return np.searchsorted(self.times, self.jumps.times) - 1


def _grid(T, dt):
    n = int(math.ceil(T / dt - 1e-9))
    g = np.arange(n + 1) * dt
    g[-1] = T
    return g[g <= T]


def _timeline(T, dt, switching, train):
    return np.unique(np.concatenate((_grid(T, dt), switching.event_times, train.times)))


def generate_noise(s: Scenario, path_id: int, master_seed: int = 0) -> DrivingNoise:
    """All randomness for one path, from three independent sub-streams."""
    T = s.horizon
    switching = sample_switching_path(s.generator, s.r0, T, stream(master_seed, path_id, CHAIN))
    if s.jump_measure is None:
        train = empty_train(T)
    else:
        train = sample_jump_train(s.jump_measure, T, stream(master_seed, path_id, JUMPS))
    times = _timeline(T, s.dt, switching, train)
    z = stream(master_seed, path_id, WIENER).standard_normal(times.size - 1)
    w = np.concatenate(([0.0], np.cumsum(np.sqrt(np.diff(times)) * z)))
    return DrivingNoise(switching, train, times, w, float(s.dt), int(master_seed), int(path_id))


def refine_noise(noise: DrivingNoise, dt: float) -> DrivingNoise:
    """Same underlying path on a finer grid; new Brownian values are bridge-sampled."""
    if dt > noise.dt:
        raise ValueError("refinement step must not exceed the current step")
    T = noise.switching.horizon
    times = np.unique(np.concatenate((noise.times, _grid(T, dt))))
    level = noise.level + 1
    z = stream(noise.master_seed, noise.path_id, BRIDGE + level).standard_normal(
        times.size - noise.times.size)
    w = kernels.bridge_refine(noise.times, noise.w, times, z)
    return DrivingNoise(noise.switching, noise.jumps, times, w, float(dt),
                        noise.master_seed, noise.path_id, level)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    ln_norm: np.ndarray
    regimes: np.ndarray
    terminal: np.ndarray
    flag_index: int = -1
    flag: Optional[str] = None      # "extinct" | "exploded"

    @property
    def extinct(self) -> bool:
        return self.flag == "extinct"

    @property
    def exploded(self) -> bool:
        return self.flag == "exploded"

    @property
    def flag_time(self) -> Optional[float]:
        return None if self.flag_index < 0 else float(self.times[self.flag_index])

    def to_csv(self, path_or_buf, stride: int = 1):
        import csv
        own = isinstance(path_or_buf, str)
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            wr = csv.writer(fh)
            wr.writerow(["t", "ln_norm", "regime"])
            idx = np.arange(0, self.times.size, max(1, int(stride)))
            if idx[-1] != self.times.size - 1:
                idx = np.append(idx, self.times.size - 1)
            for k in idx:
                wr.writerow([repr(float(self.times[k])), repr(float(self.ln_norm[k])),
                             int(self.regimes[k]) + 1])
        finally:
            if own:
                fh.close()

    def terminal_json(self) -> dict:
        return {"t": float(self.times[-1]), "ln_norm": float(self.ln_norm[-1]),
                "coefficients": [float(c) for c in self.terminal], "flag": self.flag}


_FLAG_NAMES = {kernels.NO_FLAG: None, kernels.EXTINCT: "extinct", kernels.EXPLODED: "exploded"}


def _jump_log(s, noise, regimes):
    out = np.zeros(noise.times.size - 1)
    if len(noise.jumps):
        slots = noise.jump_slots()
        gam = np.empty(slots.size)
        before = regimes[slots]
        for i in np.unique(before):
            sel = before == i
            gam[sel] = s.gamma_profile.gamma(int(i), noise.jumps.marks[sel])
        np.add.at(out, slots, np.log1p(gam))
    return out


def _per_regime(s, attr):
    return np.array([getattr(mo, attr) for mo in s.moments])


def _require_linear(s):
    if s.dynamics.kind != "linear":
        raise NotLinear("this operation needs the linear dynamics class")


def exact_linear_path(s: Scenario, noise: DrivingNoise) -> Trajectory:
    """Closed-form solution in log form.

    ``ln|X(t)| = ln|v(t)| + E(t)`` with ``v_n(t) = exp(-lam_n t + int alpha) u_n``
    and ``E`` the exponent collecting the diffusion, compensated-jump and
    jump-sum terms. Regimes are constant between timeline points, so every
    time integral is a finite sum.
    """
    _require_linear(s)
    regimes = noise.interval_regimes()
    alpha = s.dynamics.alpha[regimes]
    beta = s.dynamics.beta[regimes]
    mu = _per_regime(s, "mu")[regimes]
    kappa = _per_regime(s, "log_mean")[regimes]
    drift = alpha - 0.5 * beta ** 2 + mu - kappa
    lam = s.basis.eigenvalues
    ln_norm, idx, kind = kernels.exact_lognorm(
        lam, s.initial, noise.steps, noise.increments, drift, beta, _jump_log(s, noise, regimes))
    last = ln_norm.size - 1 if idx < 0 else idx
    t_last = noise.times[last]
    base = kernels._mode_lognorm_numpy(lam, s.initial, np.array([t_last]))[0]
    terminal = s.initial * np.exp(-lam * t_last + (ln_norm[last] - base))
    return Trajectory(noise.times, ln_norm, _sample_regimes(noise), terminal, int(idx),
                      _FLAG_NAMES[int(kind)])


def _sample_regimes(noise):
    return np.asarray(noise.switching.state_at(noise.times), dtype=np.int64)


def numerical_path(s: Scenario, noise: DrivingNoise) -> Trajectory:
    """Exponential Euler on the event-aligned timeline.

    Per interval each mode gets the exact heat factor ``exp(-lam_n h)``; the
    drift (including the jump compensator ``-int gamma dlambda``) and the
    diffusion enter explicitly. Jumps multiply the state by ``1 + gamma`` at
    their times, using the regime in force just before the jump.
    """
    if s.dynamics.kind == "linear":
        return _numerical_linear(s, noise)
    return _numerical_semilinear(s, noise)


def _numerical_linear(s, noise):
    regimes = noise.interval_regimes()
    comp = _per_regime(s, "gamma_mean")[regimes]
    drift = s.dynamics.alpha[regimes] - comp
    diff = s.dynamics.beta[regimes]
    ln_norm, idx, kind, x = kernels.euler_linear(
        s.basis.eigenvalues, s.initial, noise.steps, noise.increments, drift, diff,
        _jump_log(s, noise, regimes))
    last = ln_norm.size - 1 if idx < 0 else idx
    with np.errstate(over="ignore", under="ignore"):
        terminal = x * np.exp(ln_norm[last])
    return Trajectory(noise.times, ln_norm, _sample_regimes(noise), terminal, int(idx),
                      _FLAG_NAMES[int(kind)])


def _numerical_semilinear(s, noise):
    dyn = s.dynamics
    basis = s.basis
    N = basis.mode_count
    M = dyn.grid_points or max(4 * N, 32)
    tp = TransformPair(basis, M)
    regimes = noise.interval_regimes()
    comp = _per_regime(s, "gamma_mean")
    jump_log = _jump_log(s, noise, regimes)
    lam = basis.eigenvalues
    h = noise.steps
    dW = noise.increments
    K = h.size
    out = np.empty(K + 1)
    x = s.initial.copy()
    out[0] = math.log(np.linalg.norm(x))
    idx, flag = -1, None
    for k in range(K):
        i = regimes[k]
        xg = tp.to_grid(x)
        f = tp.from_grid(np.broadcast_to(dyn.drift[i](xg), xg.shape))
        g = tp.from_grid(np.broadcast_to(dyn.diffusion[i](xg), xg.shape))
        x = np.exp(-lam * h[k]) * (x + (f - comp[i] * x) * h[k] + g * dW[k])
        if jump_log[k] != 0.0:
            x = x * math.exp(jump_log[k])
        nrm = float(np.linalg.norm(x))
        if not math.isfinite(nrm) or nrm > 1e300:
            out[k + 1] = kernels.LN_OVERFLOW if not math.isfinite(nrm) else math.log(nrm)
            idx, flag = k + 1, "exploded"
        elif nrm < 1e-150:
            out[k + 1] = math.log(nrm) if nrm > 0 else kernels.LN_FLOOR
            idx, flag = k + 1, "extinct"
        else:
            out[k + 1] = math.log(nrm)
            continue
        out[k + 2:] = out[k + 1]
        break
    return Trajectory(noise.times, out, _sample_regimes(noise), x, idx, flag)


def simulate(s: Scenario, path_id: int, master_seed: int = 0, method: str = "auto") -> Trajectory:
    noise = generate_noise(s, path_id, master_seed)
    if method == "auto":
        method = "exact" if s.dynamics.kind == "linear" else "numerical"
    if method == "exact":
        return exact_linear_path(s, noise)
    return numerical_path(s, noise)


def martingale_parts(s: Scenario, noise: DrivingNoise):
    """The two local martingales in the log-norm decomposition, on the timeline.

    ``M1(t) = int beta(r) dW`` and ``M2(t)`` = jump log-sum minus its
    compensator ``int (int ln(1+gamma) dlambda) ds``.
    """
    _require_linear(s)
    regimes = noise.interval_regimes()
    m1 = np.concatenate(([0.0], np.cumsum(s.dynamics.beta[regimes] * noise.increments)))
    kappa = _per_regime(s, "log_mean")[regimes]
    m2 = np.concatenate(([0.0], np.cumsum(_jump_log(s, noise, regimes) - kappa * noise.steps)))
    return m1, m2


def quadratic_variation_bounds(s: Scenario):
    """Rates bounding ``<M1>_t / t`` and ``<M2>_t / t``."""
    _require_linear(s)
    return (float(np.max(s.dynamics.beta ** 2)),
            float(max(mo.log_sq for mo in s.moments)))


def _sup_error(a: Trajectory, b: Trajectory) -> float:
    # compare only up to the first flag; values are frozen after it
    stops = [t.flag_index for t in (a, b) if t.flag_index >= 0]
    end = min(stops) + 1 if stops else a.ln_norm.size
    return float(np.max(np.abs(a.ln_norm[:end] - b.ln_norm[:end])))


def convergence_ladder(s: Scenario, levels: int, path_id: int = 0, master_seed: int = 0):
    """Sup-norm gap between numerical and exact ``ln|X|`` for ``dt, dt/2, ..., dt/2^levels``.

    The same driving noise is reused across levels, refined by Brownian
    bridges, so the gaps form a pathwise convergence study.
    """
    _require_linear(s)
    noise = generate_noise(s, path_id, master_seed)
    out = []
    for k in range(levels + 1):
        if k:
            noise = refine_noise(noise, noise.dt / 2)
        out.append(_sup_error(exact_linear_path(s, noise), numerical_path(s, noise)))
    return np.array(out)
