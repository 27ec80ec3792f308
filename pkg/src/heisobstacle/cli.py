"""Command-line front end.

    python -m heisobstacle <command> [--config FILE] [--out DIR] [--seed N]
                                     [--tol T] [--trials N] [--negative-control]
                                     [--set KEY=VALUE ...]

Commands: solve, penalize, ls-check, eps-sweep, lemmas, consistency.
Exit status is 0 when every check of the command passes, 1 when a check
fails or a solve does not converge, and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump, parse_config, parse_value
from .grid import Grid, write_field_csv
from .heisenberg import AnalyticFunction, Point
from .operators import EnergyParams, measured_mask
from .report import Table, emit_report
from .solver import (
    InfeasibleDatum,
    ObstacleProblem,
    solve_obstacle,
    solve_penalized,
    vi_residual_check,
    write_history_csv,
)
from .verify import checks, consistency, lemmas, rates

log = logging.getLogger("heisobstacle")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
COMMANDS = ("solve", "penalize", "ls-check", "eps-sweep", "lemmas", "consistency")
ZERO_TOL = 1e-10
SUPPLEMENTARY_P = 3.0


class CommandFailed(RuntimeError):
    """A solve or check could not be completed; reported with exit status 1."""


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(Point(*cfg.box_lower), Point(*cfg.box_upper), cfg.resolution)


def build_problem(cfg: RunConfig, eps: float | None = None) -> ObstacleProblem:
    params = EnergyParams(cfg.p, cfg.eps if eps is None else eps)
    try:
        return ObstacleProblem.from_presets(build_grid(cfg), cfg.psi_function(),
                                            cfg.u_star_function(), params, tol=cfg.tol,
                                            max_iter=cfg.max_iter, step_policy=cfg.step_policy)
    except InfeasibleDatum as exc:
        raise ConfigError(f"u_star: {exc}") from None


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _solve(prob: ObstacleProblem):
    res = solve_obstacle(prob)
    if not res.converged:
        raise CommandFailed(f"obstacle solve did not converge: residual {res.final_grad_norm:.3e} "
                            f"after {res.iterations} iterations")
    return res


# --------------------------------------------------------------------------
# commands: each returns (tables, field files, summary lines, passed)

def cmd_solve(cfg: RunConfig, out: Path):
    prob = build_problem(cfg)
    g = prob.grid
    res = solve_obstacle(prob)
    vi = vi_residual_check(res, prob, cfg.vi_trials, cfg.seed)
    m = measured_mask(g)
    lam = res.multiplier[m]
    gap = (prob.psi - res.u)[m]
    bar = 10.0 * prob.tol
    kkt_ok = bool(lam.min() >= -bar)
    comp = float(np.max(lam * gap))
    barrier_gap = float(res.u.min() - prob.barrier)
    active_frac = float(res.active.sum() / g.interior.sum())
    ok = (res.converged and vi["passed"] and kkt_ok and comp <= bar
          and barrier_gap >= -prob.tol)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_field_csv(out / "solution.csv", g, res.u),
             write_field_csv(out / "multiplier.csv", g, res.multiplier),
             write_history_csv(out / "history.csv", res)]
    table = Table("solve_report.csv",
                  ["p", "eps", "iterations", "converged", "grad_norm", "energy", "active_fraction",
                   "vi_min_directional", "vi_bar", "min_multiplier", "max_complementarity",
                   "barrier_gap", "pass"],
                  [[cfg.p, cfg.eps, res.iterations, res.converged, res.final_grad_norm,
                    res.energy_history[-1], active_frac, vi["min_directional"], vi["bar"],
                    float(lam.min()), comp, barrier_gap, ok]])
    lines = [f"solve: {_verdict(ok)}",
             f"  iterations {res.iterations}, projected gradient {res.final_grad_norm:.3e} "
             f"(tol {prob.tol:g}), converged {res.converged}",
             f"  active fraction {active_frac:.4f}",
             f"  variational inequality: min directional derivative {vi['min_directional']:.3e} "
             f"(bar {vi['bar']:.1e}) over {vi['trials']} directions",
             f"  multiplier min {lam.min():.3e}, max complementarity {comp:.3e}, "
             f"barrier gap {barrier_gap:.3e}"]
    return [table], files, lines, ok


def cmd_penalize(cfg: RunConfig, out: Path):
    prob = build_problem(cfg)
    g = prob.grid
    obst = _solve(prob)
    bounds = checks.sandwich_bounds(prob)
    out.mkdir(parents=True, exist_ok=True)
    files, reports = [], []
    for k, eta in enumerate(cfg.eta_list, 1):
        pen = solve_penalized(prob, eta, boundary=obst.u, method=cfg.penalized_method)
        if not pen.converged:
            raise CommandFailed(f"penalised solve at eta={eta:g} did not converge: residual "
                                f"{pen.final_grad_norm:.3e}")
        reports.append(checks.sandwich_check(obst, pen, prob.psi, eta, cfg.sandwich_tol, **bounds))
        files.append(write_field_csv(out / f"penalized_{k}.csv", g, pen.u))
        files.append(write_history_csv(out / f"penalized_{k}_history.csv", pen))
    shrink = [a.sup_diff / b.sup_diff if b.sup_diff > 0 else np.inf
              for a, b in zip(reports, reports[1:])]
    ok = all(r.passed for r in reports) and all(s >= cfg.min_shrink for s in shrink)
    tables = [Table("sandwich_report.csv", checks.SANDWICH_CSV_HEADER, [r.row() for r in reports]),
              Table("shrink_report.csv", ["eta_from", "eta_to", "shrink", "min_shrink", "pass"],
                    [[a.eta, b.eta, s, cfg.min_shrink, s >= cfg.min_shrink]
                     for a, b, s in zip(reports, reports[1:], shrink)])]
    lines = [f"penalize: {_verdict(ok)}"]
    for r in reports:
        failed = [k for k, v in r.checks.items() if not v]
        lines.append(f"  eta {r.eta:g}: sup|u_eta - u| {r.sup_diff:.4e}, "
                     f"max(u_eta - psi) {r.gap_psi:.2e}, max(u_eta - u) {r.gap_u:.2e}, "
                     f"max(u - u_eta - eta) {r.gap_band:.2e}"
                     + (f", failed {failed}" if failed else ""))
    for a, b, s in zip(reports, reports[1:], shrink):
        lines.append(f"  shrink eta {a.eta:g} -> {b.eta:g}: {s:.3f} (need >= {cfg.min_shrink:g})")
    return tables, files, lines, ok


def cmd_ls_check(cfg: RunConfig, out: Path):
    prob = build_problem(cfg)
    res = _solve(prob)
    target = checks.negative_control(res, prob) if cfg.negative_control else res
    rep = checks.ls_check(target, prob, cfg.ls_tol)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_field_csv(out / "solution.csv", prob.grid, target.u)]
    label = "ls-check (negative control)" if cfg.negative_control else "ls-check"
    lines = [f"{label}: {_verdict(rep.passed)}",
             f"  p {rep.p:g}, eps {rep.eps:g}, tol {rep.tol:.3e}, {rep.measured} measured nodes",
             f"  min A(u) {rep.min_A:.4e} ({rep.lower_violations} below -tol)",
             f"  max A(u) - (A psi)^+ {rep.max_excess:.4e} ({rep.upper_violations} above tol), "
             f"excess mass {rep.excess_mass:.3e}",
             f"  against the discrete obstacle operator: max excess {rep.max_excess_discrete:.4e}",
             f"  active fraction {rep.active_fraction:.4f}"]
    return [Table("ls_report.csv", checks.LS_CSV_HEADER, [rep.row()])], files, lines, rep.passed


def rate_passed(rep: rates.RateReport) -> bool:
    if rep.p == 2:
        return all(v <= rep.noise_floor for v in rep.values)
    return bool(np.isfinite(rep.slope) and rep.slope >= 0.9 * rep.exponent and rep.monotone)


def cmd_eps_sweep(cfg: RunConfig, out: Path):
    prob = build_problem(cfg, eps=0.0)
    try:
        rep = rates.eps_sweep(prob, cfg.eps_list, cfg.R)
    except rates.SweepAborted as exc:
        raise CommandFailed(str(exc)) from None
    ok = rate_passed(rep)
    tables = [Table("rate_report.csv", rates.RATE_CSV_HEADER, rep.rows()),
              Table("rate_summary.csv",
                    ["p", "R", "slope", "exponent", "required_slope", "fitted_constant", "prefactor",
                     "noise_floor", "monotone", "pass"],
                    [[rep.p, rep.R, rep.slope, rep.exponent, 0.9 * rep.exponent,
                      rep.fitted_constant, rep.prefactor, rep.noise_floor, rep.monotone, ok]])]
    lines = [f"eps-sweep: {_verdict(ok)}",
             f"  p {rep.p:g}, R {rep.R:g}, theoretical exponent {rep.exponent:g}, "
             f"fitted slope {rep.slope:.4f}, monotone {rep.monotone}"]
    lines += [f"  eps {e:g}: value {v:.4e}, implied constant {c:.3e}"
              for e, v, c in zip(rep.eps, rep.values, rep.implied_constants)]
    return tables, [], lines, ok


def cmd_lemmas(cfg: RunConfig, out: Path):
    try:
        reps = lemmas.lemma_suite(cfg.seed, cfg.trials, cfg.min_trials)
    except ValueError as exc:
        raise ConfigError(f"trials: {exc}") from None
    ok = all(r.passed for r in reps)
    main = Table("lemma_report.csv", lemmas.LEMMA_CSV_HEADER,
                 [[r.lemma, lemmas.LEMMAS.index(r.lemma) + 1, r.trials, r.worst_margin, r.constant,
                   r.passed] for r in reps])
    detail = Table("lemma_constants.csv", ["lemma", "p", "constant", "provenance"],
                   [[r.lemma, p, c, r.provenance] for r in reps for p, c in r.constants.items()])
    stab = Table("lemma_stability.csv", ["lemma", "violations", "stability", "stable"],
                 [[r.lemma, r.violations, r.stability, r.stable] for r in reps])
    lines = [f"lemmas: {_verdict(ok)}"]
    for r in reps:
        extra = "".join(f", {k} {v}" for k, v in r.notes.items())
        lines.append(f"  {r.lemma}: {_verdict(r.passed)}, {r.trials} trials, worst margin "
                     f"{r.worst_margin:.4g}, violations {r.violations}, stability {r.stability:.3f}, "
                     f"constant {r.provenance}{extra}")
    return [main, detail, stab], [], lines, ok


def cmd_consistency(cfg: RunConfig, out: Path):
    f = cfg.consistency_function()
    lo, hi = np.array(cfg.box_lower), np.array(cfg.box_upper)
    if not (np.allclose(lo, lo[0]) and np.allclose(hi, hi[0]) and np.isclose(lo[0], -hi[0])):
        raise ConfigError("box_lower: the consistency study needs a cube [-a, a]^3")
    a = float(hi[0])
    main = consistency.consistency_study(f, cfg.p, cfg.consistency_resolutions, cfg.eps, a)
    studies = [main]
    if cfg.p != SUPPLEMENTARY_P:
        studies.append(consistency.consistency_study(f, SUPPLEMENTARY_P, cfg.consistency_resolutions,
                                                     cfg.eps, a))
    n_zero = cfg.consistency_resolutions[len(cfg.consistency_resolutions) // 2]
    zero = consistency.zero_operator_check(AnalyticFunction("coordinate-t"), n_zero, 2.0, a)
    ok = main.passed and zero <= ZERO_TOL
    rows = [r for s in studies for r in s.rows()]
    summary = Table("consistency_summary.csv", ["study", "preset", "p", "slope", "exact", "gated", "pass"],
                    [["refinement", s.preset, s.p, s.slope, s.exact, s is main, s.passed] for s in studies]
                    + [["zero", "coordinate-t", 2.0, float("nan"), zero <= ZERO_TOL, True,
                        zero <= ZERO_TOL]])
    lines = [f"consistency: {_verdict(ok)}"]
    for s in studies:
        errs = ", ".join(f"{e:.3e}" for e in s.errors)
        lines.append(f"  {s.preset} p={s.p:g}: errors [{errs}], slope {s.slope:.4f}, exact {s.exact}"
                     + ("" if s is main else " (reported, not gated)"))
    lines.append(f"  coordinate-t at {n_zero}^3: max |A| {zero:.3e} (tol {ZERO_TOL:g})")
    return [Table("consistency_report.csv", consistency.CONSISTENCY_CSV_HEADER, rows), summary], [], \
        lines, ok


HANDLERS = {"solve": cmd_solve, "penalize": cmd_penalize, "ls-check": cmd_ls_check,
            "eps-sweep": cmd_eps_sweep, "lemmas": cmd_lemmas, "consistency": cmd_consistency}


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heisobstacle",
        description="Obstacle problems for the Heisenberg p-Laplacian: solve and verify.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "solve": "solve the obstacle problem and check the variational inequality",
        "penalize": "solve the penalised problems and check the sandwich bounds",
        "ls-check": "check the two-sided operator bound on the obstacle solution",
        "eps-sweep": "measure the convergence of the regularised solutions as eps -> 0",
        "lemmas": "randomised checks of the supporting inequalities",
        "consistency": "refinement study of the discrete operator",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name], description=helps[name])
        sp.add_argument("--config", type=Path, help="flat key = value config file")
        sp.add_argument("--out", help="output directory (overrides the out key)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--tol", type=float, help="solver tolerance")
        sp.add_argument("--trials", type=int, help="random trials per lemma")
        sp.add_argument("--negative-control", action="store_true",
                        help="ls-check: perturb the solution inside the contact set first")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
        sp.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    return parser


def overrides_from_args(args) -> dict:
    over = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        over[key] = parse_value(key, val)
    for key in ("out", "seed", "tol", "trials"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    if args.negative_control:
        over["negative_control"] = True
    return over


def run_command(command: str, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    try:
        tables, files, lines, ok = HANDLERS[command](cfg, out)
    except CommandFailed as exc:
        lines, tables, files, ok = [f"{command}: FAIL", f"  {exc}"], [], [], False
    summary = "\n".join(lines) + "\n"
    emit_report(tables, out, command=command, config_text=dump(cfg), seed=cfg.seed,
                summary=summary, files=files)
    print(summary, end="")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, overrides_from_args(args))
        return run_command(args.command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
