"""Parallel Monte Carlo over paths with worker-count-independent results."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .engine import simulate
from .lyapunov import pathwise_exponent


def _one_path(args):
    s, path_id, seed, burn_in, method = args
    return pathwise_exponent(simulate(s, path_id, seed, method), burn_in)


def run_ensemble(s, paths: int, seed: int = 0, workers: int = 1, burn_in: float = 0.2,
                 method: str = "auto"):
    """Per-path exponent estimates in path-id order.

    Each path depends only on ``(seed, path_id)``, and results are collected
    in submission order, so the output does not depend on ``workers``.
    """
    if paths < 1 or workers < 1:
        raise ValueError("need at least one path and one worker")
    jobs = [(s, pid, seed, burn_in, method) for pid in range(paths)]
    if workers == 1:
        return [_one_path(j) for j in jobs]
    # running path 0 here first loads the jitted kernels once, before forking
    first = _one_path(jobs[0])
    rest = jobs[1:]
    if not rest:
        return [first]
    chunk = max(1, len(rest) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [first] + list(pool.map(_one_path, rest, chunksize=chunk))
