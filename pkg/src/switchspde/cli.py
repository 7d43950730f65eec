"""Command-line front end.

Exit codes: 0 ok, 2 usage or schema error, 3 hypothesis violation,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__, criteria
from .ctmc import stationary_distribution
from .engine import convergence_ladder, simulate
from .ensemble import run_ensemble
from .errors import (BadParamPath, DomainViolation, ExprError, HypothesisViolated,
                     HypothesisViolation, NotLinear, ScenarioError, SwitchSPDEError)
from .lyapunov import ensemble_exponent
from .scenario import build, read_document, set_param

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4
FP_FLOOR_DT = 1e-6


class UsageError(Exception):
    pass


def _exit_code(exc) -> int:
    if isinstance(exc, (UsageError, ScenarioError, ExprError, BadParamPath, NotLinear)):
        return EXIT_USAGE
    if isinstance(exc, (HypothesisViolation, DomainViolation)):
        return EXIT_HYPOTHESIS
    return EXIT_NUMERIC


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(command, doc, seed):
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    return {"tool": "switchspde", "version": __version__, "command": command,
            "scenario_sha256": digest, "seed": seed}


def _parse_sigma(text, m):
    if text in ("auto", "uniform"):
        return text
    try:
        sigma = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--sigma: expected auto, uniform or a comma list, got {text!r}") from None
    if len(sigma) != m or not all(v > 0 for v in sigma):
        raise UsageError(f"--sigma: need {m} positive weights")
    return criteria.normalize_sigma(sigma)


def _sigma_report(builder, pi, m, sigma_opt):
    if m == 1 or (isinstance(sigma_opt, str) and sigma_opt == "uniform"):
        sigma = np.ones(m)
        return criteria.theorem31_bound(builder(sigma), pi, 2.0, sigma)
    if isinstance(sigma_opt, str):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", criteria.NoImprovement)
            _, rep = criteria.optimize_sigma(builder, pi)
        rep.notes.extend(str(w.message) for w in caught)
        return rep
    return criteria.theorem31_bound(builder(sigma_opt), pi, 2.0, sigma_opt)


def criterion_reports(loaded, sigma_opt="uniform") -> list:
    """Every criterion that applies to the scenario's dynamics class."""
    s = loaded.scenario
    m = s.m
    pi = stationary_distribution(s.generator)
    reports = []
    if s.dynamics.kind == "linear":
        reports.append(criteria.theorem41_bound(s))
        reports.append(_sigma_report(lambda sg: criteria.linear_terms(s, sg), pi, m, sigma_opt))
        reports.append(criteria.theorem44_exact(s))
        if m == 2:
            try:
                reports.append(criteria.example45_report(s))
            except HypothesisViolated as exc:
                reports.append({"tag": "ex45", "applicable": False,
                                "reason": f"{exc.which} inequality fails: {exc}"})
        return reports
    dyn = s.dynamics
    if dyn.b is None or dyn.d is None:
        return [{"tag": "thm31", "applicable": False,
                 "reason": "semilinear criterion needs the constants b and d"}]
    builder = lambda sg: criteria.semilinear_terms(dyn.b, dyn.d, loaded.nu, s.moments, sg,
                                                   s.generator)
    rep = _sigma_report(builder, pi, m, sigma_opt)
    rep.extra["nu"] = loaded.nu
    reports.append(rep)
    rates = s.generator.rates
    if m == 2 and rates[0, 1] == 1.0:
        sigma = rep.sigma if rep.sigma is not None else np.ones(2)
        lam2 = float(sigma[1] / sigma[0])
        m_small = [mo.m_small for mo in s.moments]
        reports.append(criteria.example33_bound(dyn.b, dyn.d, m_small, loaded.nu,
                                                float(rates[1, 0]), lam2))
    return reports


def _as_json(rep):
    return rep if isinstance(rep, dict) else rep.to_json()


def cmd_validate(args) -> int:
    try:
        doc = read_document(args.file)
        loaded = build(doc)
    except Exception as exc:
        code = _exit_code(exc)
        kind = {EXIT_USAGE: "schema", EXIT_HYPOTHESIS: "hypothesis"}.get(code, "numeric")
        for line in str(exc).split("; "):
            print(f"{args.file}: {kind} error: {line}", file=sys.stderr)
        return code
    s = loaded.scenario
    print(f"{args.file}: ok ({s.m} regimes, {s.basis.mode_count} modes, "
          f"{s.dynamics.kind} dynamics)")
    return EXIT_OK


def cmd_criterion(args) -> int:
    doc = read_document(args.file)
    loaded = build(doc)
    sigma_opt = _parse_sigma(args.sigma, loaded.scenario.m)
    report = _header("criterion", doc, loaded.sim["seed"])
    report["criteria"] = [_as_json(r) for r in criterion_reports(loaded, sigma_opt)]
    _emit(_dump(report), args.out)
    return EXIT_OK


def _seed(args, loaded):
    return loaded.sim["seed"] if args.seed is None else args.seed


def cmd_exponent(args) -> int:
    doc = read_document(args.file)
    loaded = build(doc)
    s, sim = loaded.scenario, loaded.sim
    seed = _seed(args, loaded)
    paths = args.paths or sim["paths"]
    started = time.perf_counter()
    estimates = run_ensemble(s, paths, seed, args.workers, sim["burn_in"])
    ens = ensemble_exponent(estimates, estimator=args.estimator)
    report = _header("exponent", doc, seed)
    report.update({"paths": paths, "T": s.horizon, "dt": s.dt, "burn_in": sim["burn_in"],
                   "method": "exact" if s.dynamics.kind == "linear" else "numerical",
                   "ensemble": ens.to_json()})
    if s.dynamics.kind == "linear":
        report["analytic"] = criteria.theorem44_exact(s).to_json()
    _emit(_dump(report), args.out)
    if args.trajectory:
        simulate(s, 0, seed).to_csv(args.trajectory, sim["sample_stride"])
    print(f"wall-clock {time.perf_counter() - started:.2f} s", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = read_document(args.file)
    loaded = build(doc)
    s = loaded.scenario
    if s.dynamics.kind != "linear":
        raise NotLinear("the oracle needs linear dynamics")
    if args.dt_ladder < 1:
        raise UsageError("--dt-ladder must be at least 1")
    seed = _seed(args, loaded)
    dts = [s.dt / 2 ** k for k in range(args.dt_ladder + 1)]
    if dts[-1] < FP_FLOOR_DT:
        print(f"warning: dt down to {dts[-1]:.3g} is near the floating-point floor; "
              "errors there are dominated by rounding", file=sys.stderr)
    errs = np.array([convergence_ladder(s, args.dt_ladder, pid, seed) for pid in range(args.paths)])
    mean = errs.mean(axis=0)
    rows = []
    for k, dt in enumerate(dts):
        row = {"dt": dt, "sup_error": float(mean[k]), "max_sup_error": float(errs[:, k].max())}
        if k:
            ratio = mean[k] / mean[k - 1] if mean[k - 1] > 0 else float("nan")
            row["ratio"] = float(ratio)
            row["order"] = -math.log2(ratio) if ratio > 0 else None
        rows.append(row)
    report = _header("oracle", doc, seed)
    report.update({"paths": args.paths, "T": s.horizon, "table": rows,
                   "monotone": bool(np.all(np.diff(mean) <= 0))})
    _emit(_dump(report), args.out)
    return EXIT_OK


def _values(text):
    items = [v for v in (text or "").split(",") if v.strip()]
    if not items:
        raise UsageError("--values: empty list")
    try:
        return [float(v) for v in items]
    except ValueError:
        raise UsageError(f"--values: not a number list: {text!r}") from None


def _headline(reports):
    # thm41 for the linear class, the weighted-quadratic bound otherwise
    for r in reports:
        if not isinstance(r, dict) and r.tag in ("thm41", "thm31"):
            return r
    raise HypothesisViolation("no criterion applies to this scenario")


def cmd_sweep(args) -> int:
    doc = read_document(args.file)
    values = _values(args.values)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["value", "bound", "verdict", "mc_mean", "mc_ci_lo", "mc_ci_hi", "mc_verdict"])
    for v in values:
        loaded = build(set_param(doc, args.param, v))
        rep = _headline(criterion_reports(loaded))
        row = [repr(v), repr(rep.bound), rep.verdict]
        if args.paths:
            seed = _seed(args, loaded)
            est = run_ensemble(loaded.scenario, args.paths, seed, args.workers,
                               loaded.sim["burn_in"])
            ens = ensemble_exponent(est)
            row += [repr(ens.mean), repr(ens.ci[0]), repr(ens.ci[1]), ens.verdict]
        else:
            row += ["", "", "", ""]
        wr.writerow(row)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="switchspde",
                                description="Switching-diffusion SPDE simulator and "
                                            "stability calculator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("criterion", help="analytic stability criteria")
    c.add_argument("file")
    c.add_argument("--sigma", default="uniform",
                   help="auto, uniform, or comma-separated weights (default: uniform)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_criterion)

    e = sub.add_parser("exponent", help="Monte Carlo sample Lyapunov exponent")
    e.add_argument("file")
    e.add_argument("--paths", type=int, help="number of paths (default: sim.paths)")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--seed", type=int, help="master seed (default: sim.seed)")
    e.add_argument("--estimator", choices=("terminal_quotient", "regression_slope"),
                   default="terminal_quotient")
    e.add_argument("--trajectory", help="write path 0 as CSV (t, ln_norm, regime)")
    e.add_argument("--out")
    e.set_defaults(func=cmd_exponent)

    o = sub.add_parser("oracle", help="numerical vs exact solver convergence table")
    o.add_argument("file")
    o.add_argument("--dt-ladder", type=int, default=3, help="number of step halvings")
    o.add_argument("--paths", type=int, default=1)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    w = sub.add_parser("sweep", help="criterion (and optional Monte Carlo) over a parameter")
    w.add_argument("file")
    w.add_argument("--param", required=True,
                   help="dotted path into the scenario, 0-based array indices (e.g. generator.1.0)")
    w.add_argument("--values", required=True, help="comma-separated numbers")
    w.add_argument("--paths", type=int, default=0, help="Monte Carlo paths per value (0: none)")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--seed", type=int)
    w.add_argument("--out", help="CSV file (default: stdout)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "paths", None) is not None and args.paths < 0:
        print("error: --paths must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (SwitchSPDEError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
