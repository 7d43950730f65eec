"""Eigenbasis of the Dirichlet Laplacian on an interval and mode/grid transforms.

Coefficients are taken in the orthonormal basis ``e_n(x) = sqrt(2/L) sin(n pi x / L)``
so the H-norm of a field is the Euclidean norm of its coefficient vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllZero, UnderResolved
from .exprlang import ScalarFunction


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    eigenvalues: np.ndarray
    length: Optional[float] = None
    kind: str = "dirichlet_interval"
    diffusivity: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("need at least one eigenvalue")
        if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("eigenvalues must be positive and strictly increasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size

    def eigenfunction(self, n: int, x):
        """Evaluate ``e_n`` (1-based ``n``) at ``x``; interval bases only."""
        if self.kind != "dirichlet_interval":
            raise TypeError("user-supplied bases carry eigenvalues only")
        L = self.length
        return np.sqrt(2.0 / L) * np.sin(n * np.pi * np.asarray(x, dtype=float) / L)

    def grid(self, M: int) -> np.ndarray:
        """Uniform interior grid of ``M`` points in ``(0, L)``."""
        return self.length * np.arange(1, M + 1) / (M + 1)


def dirichlet_basis(N: int, L: float, diffusivity: float = 1.0) -> SpectralBasis:
    """First ``N`` eigenpairs of ``-diffusivity * d^2/dx^2`` on ``(0, L)``."""
    if N < 1 or L <= 0 or diffusivity <= 0:
        raise ValueError("need N >= 1, L > 0 and diffusivity > 0")
    n = np.arange(1, N + 1)
    lam = diffusivity * (n * np.pi / L) ** 2
    return SpectralBasis(lam, float(L), "dirichlet_interval", float(diffusivity))


def user_basis(eigenvalues) -> SpectralBasis:
    return SpectralBasis(np.asarray(eigenvalues, dtype=float), None, "user")


def h_norm(v) -> float:
    return float(np.sqrt(np.sum(np.square(v))))


def first_nonzero_index(v, tol: Optional[float] = None) -> int:
    """1-based index of the first coefficient with ``|u_n| > tol``.

    The default tolerance is ``1e-12 * h_norm(v)``.
    """
    v = np.asarray(v, dtype=float)
    if tol is None:
        tol = 1e-12 * h_norm(v)
    hits = np.flatnonzero(np.abs(v) > tol)
    if hits.size == 0:
        raise AllZero("initial data has no coefficient above the zero tolerance")
    return int(hits[0]) + 1


def _sine_matrix(N, M):
    # S[j, n] = sqrt(2/L) sin(n pi x_j / L) with x_j = j L / (M + 1); the L
    # dependence is restored by the callers
    j = np.arange(1, M + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    return np.sin(np.pi * j * n / (M + 1))


def to_grid(v, M: int, basis: SpectralBasis) -> np.ndarray:
    """Synthesize grid values ``sum_n v_n e_n(x_j)`` on the interior grid."""
    v = np.asarray(v, dtype=float)
    if M < v.size:
        raise UnderResolved(f"grid of {M} points cannot hold {v.size} modes")
    return np.sqrt(2.0 / basis.length) * (_sine_matrix(v.size, M) @ v)


def from_grid(f, N: int, basis: SpectralBasis) -> np.ndarray:
    """Analyse interior grid values into the first ``N`` coefficients.

    Uses the discrete sine orthogonality, exact for grid functions in the span
    of the first ``M`` modes.
    """
    f = np.asarray(f, dtype=float)
    M = f.size
    if M < N:
        raise UnderResolved(f"grid of {M} points cannot resolve {N} modes")
    h = basis.length / (M + 1)
    return h * np.sqrt(2.0 / basis.length) * (_sine_matrix(N, M).T @ f)


class TransformPair:
    """Precomputed dense sine matrices for repeated grid round trips."""

    def __init__(self, basis: SpectralBasis, M: int):
        N = basis.mode_count
        if M < N:
            raise UnderResolved(f"grid of {M} points cannot hold {N} modes")
        L = basis.length
        s = _sine_matrix(N, M)
        self.synth = np.sqrt(2.0 / L) * s
        self.analyse = (L / (M + 1)) * np.sqrt(2.0 / L) * s.T
        self.x = basis.grid(M)

    def to_grid(self, v):
        return self.synth @ v

    def from_grid(self, f):
        return self.analyse @ f


def project_initial(spec: dict, basis: SpectralBasis) -> np.ndarray:
    """Coefficients of the initial field.

    ``spec`` is ``{"kind": "mode", "index": n, "amplitude": a}`` (1-based
    index), ``{"kind": "modes", "amplitudes": [...]}``, or
    ``{"kind": "grid_expr", "expr": "...", "points": M}``; the last is sampled
    on ``M`` equispaced points including both ends and projected with the
    composite trapezoid rule.
    """
    N = basis.mode_count
    kind = spec["kind"]
    if kind == "mode":
        idx = int(spec["index"])
        if not 1 <= idx <= N:
            raise ValueError(f"mode index {idx} outside 1..{N}")
        coeffs = np.zeros(N)
        coeffs[idx - 1] = float(spec.get("amplitude", 1.0))
    elif kind == "modes":
        amps = np.asarray(spec["amplitudes"], dtype=float)
        if amps.size > N:
            raise ValueError(f"{amps.size} amplitudes given for {N} modes")
        coeffs = np.zeros(N)
        coeffs[:amps.size] = amps
    elif kind == "grid_expr":
        if basis.kind != "dirichlet_interval":
            raise TypeError("grid initial data needs an interval basis")
        M = int(spec.get("points", 512))
        if M < 3:
            raise UnderResolved("need at least 3 grid points")
        f = ScalarFunction(spec["expr"], "x")
        x = np.linspace(0.0, basis.length, M)
        vals = np.broadcast_to(f(x), x.shape)
        w = np.full(M, basis.length / (M - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        n = np.arange(1, N + 1)
        e = np.sqrt(2.0 / basis.length) * np.sin(np.outer(n, x) * np.pi / basis.length)
        coeffs = e @ (w * vals)
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}")
    if not np.any(coeffs != 0.0):
        raise AllZero("initial data is identically zero")
    return coeffs
