"""Hot inner loops.

Each kernel has a loop form compiled by numba and, where the computation
vectorises, a pure-numpy form. ``_accel.NUMBA_AVAILABLE`` decides which one
the public name points at. Loop-only kernels (chain sampling, bridge
refinement) run as plain Python when numba is disabled.

Log-norm kernels return ``(ln_norm, flag_index, flag_kind)`` where
``flag_kind`` is 0 (none), 1 (extinction: norm fell below 1e-150) or 2
(explosion: norm exceeded 1e300). From ``flag_index`` on, ``ln_norm`` is
frozen at its value there.
"""
import math

import numpy as np

from ._accel import NUMBA_AVAILABLE, jit

LN_OVERFLOW = math.log(1e300)
LN_FLOOR = math.log(1e-150)

NO_FLAG = 0
EXTINCT = 1
EXPLODED = 2


@jit
def ctmc_events(exit_rates, cum, u, t, state, horizon):
    """Consume uniform pairs ``u`` to extend a chain path from ``(t, state)``."""
    n = u.shape[0]
    times = np.empty(n)
    states = np.empty(n, dtype=np.int64)
    m = cum.shape[1]
    k = 0
    done = False
    for r in range(n):
        rate = exit_rates[state]
        if rate <= 0.0:
            done = True
            break
        t = t - math.log(1.0 - u[r, 0]) / rate
        if t >= horizon:
            done = True
            break
        # first j with u < cum[j]; zero-width columns (the diagonal
        # included) can never be selected because u is in [0, 1)
        v = u[r, 1]
        nxt = m - 1
        for j in range(m):
            if v < cum[state, j]:
                nxt = j
                break
        state = nxt
        times[k] = t
        states[k] = state
        k += 1
    return times[:k].copy(), states[:k].copy(), t, state, done


@jit
def _apply_flags(out):
    n = out.shape[0]
    for k in range(n):
        v = out[k]
        if v > LN_OVERFLOW:
            for j in range(k + 1, n):
                out[j] = v
            return k, EXPLODED
        if v < LN_FLOOR:
            for j in range(k + 1, n):
                out[j] = v
            return k, EXTINCT
    return -1, NO_FLAG


# terms below exp(-42) < 2**-60 of a partial sum >= 1 cannot change it
_NEGLIGIBLE = -42.0


@jit
def _log_weights(u):
    lw = np.full(u.shape[0], -np.inf)
    top = -np.inf
    for n in range(u.shape[0]):
        if u[n] != 0.0:
            lw[n] = 2.0 * math.log(abs(u[n]))
            if lw[n] > top:
                top = lw[n]
    return lw, top


@jit
def _mode_lognorm_at(lam, lw, top, t):
    # 0.5 * log(sum_n exp(lw_n - 2 lam_n t)); lam increasing, so top - 2 lam_n t
    # bounds every later term and lets both passes stop early
    N = lw.shape[0]
    best = -np.inf
    arg = -1
    for n in range(N):
        if top - 2.0 * lam[n] * t < best:
            break
        a = lw[n] - 2.0 * lam[n] * t
        if a > best:
            best = a
            arg = n
    if arg < 0:
        return -np.inf
    s = 0.0
    for n in range(N):
        if top - 2.0 * lam[n] * t - best < _NEGLIGIBLE:
            break
        if n == arg:
            s += 1.0
        elif lw[n] != -np.inf:
            s += math.exp(lw[n] - 2.0 * lam[n] * t - best)
    if s == 1.0:
        return 0.5 * best
    return 0.5 * (best + math.log(s))


@jit
def _mode_lognorm_loop(lam, u, t):
    lw, top = _log_weights(u)
    return _mode_lognorm_at(lam, lw, top, t)


def _mode_lognorm_numpy(lam, u, times):
    nz = u != 0.0
    if not np.any(nz):
        return np.full(times.shape, -np.inf)
    a = 2.0 * np.log(np.abs(u[nz]))[None, :] - 2.0 * lam[nz][None, :] * times[:, None]
    best = a.max(axis=1)
    return 0.5 * (best + np.log(np.exp(a - best[:, None]).sum(axis=1)))


@jit
def _exact_lognorm_loop(lam, u, dt, dW, drift, beta, jump_log):
    K = dt.shape[0]
    out = np.empty(K + 1)
    lw, top = _log_weights(u)
    t = 0.0
    e = 0.0
    out[0] = _mode_lognorm_at(lam, lw, top, 0.0)
    for k in range(K):
        t += dt[k]
        e += drift[k] * dt[k] + beta[k] * dW[k] + jump_log[k]
        out[k + 1] = _mode_lognorm_at(lam, lw, top, t) + e
    idx, kind = _apply_flags(out)
    return out, idx, kind


def _exact_lognorm_numpy(lam, u, dt, dW, drift, beta, jump_log):
    times = np.concatenate(([0.0], np.cumsum(dt)))
    e = np.concatenate(([0.0], np.cumsum(drift * dt + beta * dW + jump_log)))
    out = _mode_lognorm_numpy(lam, u, times) + e
    idx, kind = _apply_flags_numpy(out)
    return out, idx, kind


def _apply_flags_numpy(out):
    hit = (out > LN_OVERFLOW) | (out < LN_FLOOR)
    if not hit.any():
        return -1, NO_FLAG
    k = int(np.argmax(hit))
    kind = EXPLODED if out[k] > LN_OVERFLOW else EXTINCT
    out[k + 1:] = out[k]
    return k, kind


@jit
def _euler_linear_loop(lam, u, dt, dW, drift, diff, jump_log):
    """Exponential Euler on the mode vector, renormalised every step.

    Trailing modes whose share of the unit-norm state drops below 2**-60 are
    zeroed and skipped: they decay faster than every lower mode, so they can
    no longer affect the norm.
    """
    K = dt.shape[0]
    N = u.shape[0]
    out = np.empty(K + 1)
    norm0 = math.sqrt(np.sum(u * u))
    x = u / norm0
    s = math.log(norm0)
    out[0] = s
    flag_idx = -1
    flag_kind = NO_FLAG
    active = N
    decay = np.empty(N)
    last_h = -1.0
    for k in range(K):
        h = dt[k]
        if h != last_h:
            for n in range(active):
                decay[n] = math.exp(-lam[n] * h)
            last_h = h
        fg = (1.0 + drift[k] * h + diff[k] * dW[k]) * math.exp(jump_log[k])
        acc = 0.0
        for n in range(active):
            x[n] = decay[n] * (x[n] * fg)
            acc += x[n] * x[n]
        nu = math.sqrt(acc)
        if nu == 0.0:
            s = -np.inf
        else:
            s += math.log(nu)
            for n in range(active):
                x[n] /= nu
            while active > 1 and x[active - 1] * x[active - 1] < 8.7e-19:
                x[active - 1] = 0.0
                active -= 1
        out[k + 1] = s
        if s > LN_OVERFLOW or s < LN_FLOOR:
            flag_idx = k + 1
            flag_kind = EXPLODED if s > LN_OVERFLOW else EXTINCT
            for j in range(k + 2, K + 1):
                out[j] = s
            break
    return out, flag_idx, flag_kind, x


def _euler_linear_numpy(lam, u, dt, dW, drift, diff, jump_log):
    """Same scheme in factorised form: every mode shares the scalar step factor."""
    f = 1.0 + drift * dt + diff * dW
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(f)) + jump_log
    times = np.concatenate(([0.0], np.cumsum(dt)))
    common = np.concatenate(([0.0], np.cumsum(logs)))
    out = _mode_lognorm_numpy(lam, u, times) + common
    idx, kind = _apply_flags_numpy(out)
    last = len(out) - 1 if idx < 0 else idx
    sign = np.prod(np.sign(f[:last]))
    v = u * np.exp(-lam * times[last])
    nv = np.sqrt(np.sum(v * v))
    x = sign * v / nv if nv > 0 else v
    return out, idx, kind, x


@jit
def bridge_refine(old_t, old_w, new_t, z):
    """Fill Brownian values on ``new_t`` (a superset of ``old_t``).

    Points already on ``old_t`` keep their values; each inserted point is
    drawn from the bridge between its left neighbour on the new grid and the
    next point of the old grid, consuming one standard normal from ``z``.
    """
    n = new_t.shape[0]
    w = np.empty(n)
    j = 0
    used = 0
    for i in range(n):
        t = new_t[i]
        while j < old_t.shape[0] and old_t[j] < t:
            j += 1
        if j < old_t.shape[0] and old_t[j] == t:
            w[i] = old_w[j]
            continue
        tl = new_t[i - 1]
        wl = w[i - 1]
        tr = old_t[j]
        wr = old_w[j]
        frac = (t - tl) / (tr - tl)
        var = (t - tl) * (tr - t) / (tr - tl)
        w[i] = wl + frac * (wr - wl) + math.sqrt(var) * z[used]
        used += 1
    return w


if NUMBA_AVAILABLE:
    exact_lognorm = _exact_lognorm_loop
    euler_linear = _euler_linear_loop
else:
    exact_lognorm = _exact_lognorm_numpy
    euler_linear = _euler_linear_numpy

# both implementations stay importable for benchmarking and cross-checks
exact_lognorm_loop = _exact_lognorm_loop
exact_lognorm_numpy = _exact_lognorm_numpy
euler_linear_loop = _euler_linear_loop
euler_linear_numpy = _euler_linear_numpy
