"""Finite-state continuous-time Markov chains: generators, stationary laws, paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (NegativeOffDiagonal, NonSquare, Reducible,
                     SingularBeyondRankOne)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Validated transition-rate matrix; build it with :func:`validate_generator`."""

    rates: np.ndarray

    @property
    def m(self) -> int:
        return self.rates.shape[0]

    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates).copy()

    def to_list(self):
        return self.rates.tolist()


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: np.ndarray

    def __getitem__(self, i):
        return self.pi[i]

    def __len__(self):
        return len(self.pi)


@dataclass(frozen=True, eq=False)
class SwitchingPath:
    """Right-continuous piecewise-constant path of the chain on ``[0, horizon]``."""

    initial_state: int
    event_times: np.ndarray
    event_states: np.ndarray
    horizon: float
    m: int = 1

    @property
    def events(self):
        return list(zip(self.event_times.tolist(), self.event_states.tolist()))

    def state_at(self, t):
        """State at time(s) ``t``; at an event time this is the new state."""
        t = np.asarray(t, dtype=float)
        states = np.concatenate(([self.initial_state], self.event_states)).astype(np.int64)
        idx = np.searchsorted(self.event_times, t, side="right")
        out = states[idx]
        return int(out) if out.ndim == 0 else out


def _reachable(adj, start):
    seen = np.zeros(adj.shape[0], dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def validate_generator(raw) -> GeneratorMatrix:
    """Check a raw rate matrix and return it with the diagonal recomputed.

    Off-diagonal entries must be nonnegative and the positive ones must make
    the state graph strongly connected.
    """
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NonSquare(f"generator must be a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("generator entries must be finite")
    m = a.shape[0]
    off = ~np.eye(m, dtype=bool)
    bad = np.argwhere((a < 0) & off)
    if len(bad):
        i, j = bad[0]
        raise NegativeOffDiagonal(
            f"rate from state {i + 1} to state {j + 1} is negative ({a[i, j]})")
    a[~off] = 0.0
    np.fill_diagonal(a, -a.sum(axis=1))
    adj = (a > 0) & off
    if not _reachable(adj, 0).all() or not _reachable(adj.T, 0).all():
        raise Reducible("generator is not irreducible (more than one communicating class)")
    a.setflags(write=False)
    return GeneratorMatrix(a)


def stationary_distribution(g: GeneratorMatrix, rank_tol: float = 1e-10) -> StationaryDistribution:
    """Solve pi @ G = 0 with sum(pi) = 1 from the null space of G^T."""
    m = g.m
    if m == 1:
        return StationaryDistribution(np.ones(1))
    scale = max(np.abs(g.rates).max(), 1e-300)
    _, s, vt = np.linalg.svd(g.rates.T / scale)
    rank = int(np.sum(s > rank_tol * s[0]))
    if rank != m - 1:
        raise SingularBeyondRankOne(f"numerical rank of generator is {rank}, expected {m - 1}")
    # least squares with the normalisation row appended is better conditioned
    # than rescaling the singular vector
    a = np.vstack([g.rates.T, np.ones((1, m))])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.any(pi <= 0):
        pi = np.abs(vt[-1])
        if np.any(pi <= 0):
            raise SingularBeyondRankOne("stationary vector has nonpositive entries")
    pi = pi / pi.sum()
    pi.setflags(write=False)
    return StationaryDistribution(pi)


def _jump_tables(g):
    """Exit rates and row-wise cumulative jump probabilities."""
    m = g.m
    exit_rates = g.exit_rates()
    cum = np.zeros((m, m))
    for i in range(m):
        if exit_rates[i] > 0:
            p = np.where(np.arange(m) == i, 0.0, g.rates[i]) / exit_rates[i]
            cum[i] = np.cumsum(p)
            # pin the last reachable column to exactly 1 so rounding can
            # never hand the draw to a zero-probability state
            cum[i, np.flatnonzero(p > 0)[-1]:] = 1.0
    return exit_rates, cum


def sample_switching_path(g: GeneratorMatrix, r0: int, T: float,
                          rng: np.random.Generator) -> SwitchingPath:
    """Simulate the chain from ``r0`` on ``[0, T]``.

    Holding times are drawn by inversion, ``-ln(U)/q_i``; the next state is
    chosen by inverting the cumulative jump distribution of row ``i``.
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    if not 0 <= r0 < g.m:
        raise ValueError(f"initial state {r0} outside 0..{g.m - 1}")
    if g.m == 1:
        empty = np.empty(0)
        return SwitchingPath(int(r0), empty, np.empty(0, dtype=np.int64), float(T), 1)
    exit_rates, cum = _jump_tables(g)
    qmax = exit_rates.max()
    chunk = int(T * qmax * 1.1 + 10.0 * np.sqrt(T * qmax + 1.0) + 16)
    times_parts, states_parts = [], []
    t, state = 0.0, int(r0)
    while True:
        u = rng.random((chunk, 2))
        times, states, t, state, done = kernels.ctmc_events(
            exit_rates, cum, u, t, state, float(T))
        times_parts.append(times)
        states_parts.append(states)
        if done:
            break
    return SwitchingPath(int(r0), np.concatenate(times_parts),
                         np.concatenate(states_parts).astype(np.int64), float(T), g.m)


def occupation_fractions(path: SwitchingPath, m: int | None = None) -> np.ndarray:
    """Fraction of ``[0, horizon]`` spent in each state; sums to one."""
    if path.horizon <= 0:
        raise ValueError("horizon must be positive")
    m = path.m if m is None else m
    starts = np.concatenate(([0.0], path.event_times))
    ends = np.concatenate((path.event_times, [path.horizon]))
    states = np.concatenate(([path.initial_state], path.event_states)).astype(np.int64)
    occ = np.bincount(states, weights=ends - starts, minlength=m)
    return occ / occ.sum()


def holding_times(path: SwitchingPath):
    """Completed sojourns as ``(state, duration)`` arrays (the censored last one dropped)."""
    starts = np.concatenate(([0.0], path.event_times))
    states = np.concatenate(([path.initial_state], path.event_states)).astype(np.int64)
    durations = np.diff(starts)
    return states[:-1], durations
