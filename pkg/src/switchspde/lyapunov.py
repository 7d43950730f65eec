"""Sample Lyapunov exponent estimates for single paths and ensembles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import TooFewPaths, WindowTooShort

MIN_WINDOW_SAMPLES = 10


@dataclass(frozen=True)
class ExponentEstimate:
    terminal_quotient: float
    regression_slope: float
    window: tuple
    extinct: bool = False
    exploded: bool = False
    flag_time: Optional[float] = None


def pathwise_exponent(traj, burn_in_fraction: float = 0.2) -> ExponentEstimate:
    """Slope of ``ln|X(t)|`` over ``[burn_in_fraction * T, T]``.

    Two estimators: the terminal difference quotient and the least-squares
    slope. Flagged paths (extinct or exploded) are cut at the flag time.
    """
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn-in fraction must lie in [0, 1)")
    times, y = traj.times, traj.ln_norm
    end = times.size - 1 if traj.flag_index < 0 else traj.flag_index
    t_end = times[end]
    t_b = burn_in_fraction * times[-1]
    start = int(np.searchsorted(times, t_b, side="left"))
    if end - start + 1 < MIN_WINDOW_SAMPLES:
        raise WindowTooShort(
            f"only {max(end - start + 1, 0)} samples in [{t_b}, {t_end}]; "
            f"need {MIN_WINDOW_SAMPLES}")
    tw = times[start:end + 1]
    yw = y[start:end + 1]
    quotient = (yw[-1] - yw[0]) / (tw[-1] - tw[0])
    tc = tw - tw.mean()
    slope = float(np.dot(tc, yw - yw.mean()) / np.dot(tc, tc))
    return ExponentEstimate(float(quotient), slope, (float(tw[0]), float(tw[-1])),
                            traj.extinct, traj.exploded, traj.flag_time)


@dataclass(frozen=True)
class EnsembleReport:
    estimates: tuple
    mean: float
    stderr: float
    ci: tuple
    paths: int
    extinct: int
    exploded: int
    verdict: str
    estimator: str = "terminal_quotient"
    regression: dict = field(default_factory=dict)
    first_explosion: Optional[float] = None

    def to_json(self) -> dict:
        out = {"mean": self.mean, "stderr": self.stderr, "ci": list(self.ci),
               "paths": self.paths, "extinct": self.extinct, "exploded": self.exploded,
               "verdict": self.verdict, "estimator": self.estimator,
               "regression": self.regression}
        if self.first_explosion is not None:
            out["first_explosion_time"] = self.first_explosion
        return out


def _t_interval(values, level):
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n))
    half = float(stats.t.ppf(0.5 + level / 2, n - 1)) * se
    return mean, se, (mean - half, mean + half)


def _verdict(ci):
    lo, hi = ci
    if hi < 0:
        return "stable"
    if lo > 0:
        return "unstable"
    return "inconclusive"


def ensemble_exponent(estimates, level: float = 0.95,
                      estimator: str = "terminal_quotient") -> EnsembleReport:
    """Mean, standard error and Student-t interval over non-extinct paths.

    Extinct paths are excluded from the statistics but counted. If any path
    overflowed, the verdict is ``"explosion"``.
    """
    estimates = tuple(estimates)
    alive = [e for e in estimates if not e.extinct]
    if len(alive) < 2:
        raise TooFewPaths(f"{len(alive)} usable paths; need at least 2")
    primary = np.array([getattr(e, estimator) for e in alive])
    secondary_name = ("regression_slope" if estimator == "terminal_quotient"
                      else "terminal_quotient")
    secondary = np.array([getattr(e, secondary_name) for e in alive])
    mean, se, ci = _t_interval(primary, level)
    rmean, rse, rci = _t_interval(secondary, level)
    exploded = [e for e in estimates if e.exploded]
    verdict = "explosion" if exploded else _verdict(ci)
    first = min(e.flag_time for e in exploded) if exploded else None
    return EnsembleReport(
        estimates=estimates, mean=mean, stderr=se, ci=ci, paths=len(estimates),
        extinct=len(estimates) - len(alive), exploded=len(exploded), verdict=verdict,
        estimator=estimator,
        regression={"estimator": secondary_name, "mean": rmean, "stderr": rse, "ci": list(rci)},
        first_explosion=first)
