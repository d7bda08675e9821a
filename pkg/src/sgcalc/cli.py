"""Command-line interface: ``sgcalc <command> FILE [--out DIR] [--seed S] [--quiet]``.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or input error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback

import numpy as np

from . import expr as ex
from .boundary import assemble_system, assumption_a_profile, left_elliptic_check
from .bvp import _check_decay, _jsonable, load_problem, solve, verify_regularity, versions
from .calculus import exact_composition, parametrix, remainder_order, subtract_identity
from .ellipticity import boundary_grid, ls_check, properly_elliptic_check, sg_elliptic_check
from .errors import ProblemFormatError, SGCalcError
from .extension import (BoundaryJet, ExtensionParams, empirical_T, extend_half_space, jet_match_errors,
                        seminorm_fit)
from .gridfunc import GridFunction
from .seminorm import SGOrder

log = logging.getLogger("sgcalc")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _write_json(out, name, doc):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        fh.write(json.dumps(_jsonable(doc), sort_keys=True, indent=2))
        fh.write("\n")
    return path


def _load(args):
    prob = load_problem(args.file)
    if args.seed is not None:
        prob.config["seed"] = args.seed
    return prob


def _grid(prob):
    c = prob.config
    return boundary_grid(prob.n, c["R"], c["R_max"], c["n_radii"], c["rays"], c["seed"])


def cmd_check_elliptic(args):
    prob = _load(args)
    c = prob.config
    rep = sg_elliptic_check(prob.P, c["R"], c["R_max"], c["n_radii"], c["rays"], c["seed"], c["C_min_elliptic"])
    doc = {"problem": prob.name, "sg_elliptic": rep.as_dict(), "pass": rep.passed}
    return doc, rep.passed


def cmd_check_ls(args):
    prob = _load(args)
    grid = _grid(prob)
    proper = properly_elliptic_check(prob.P, grid=grid)
    ls = ls_check(prob.bvp, grid=grid, C_min=prob.config["C_min_ls"])
    ok = proper.passed and ls.passed
    return {"problem": prob.name, "proper": proper.as_dict(), "ls": ls.as_dict(), "min_det": ls.min_det,
            "pass": ok}, ok


def cmd_parametrix(args):
    prob = _load(args)
    c = prob.config
    N = args.N if args.N is not None else int(c["parametrix_N"])
    b = parametrix(prob.P, N, float(c["parametrix_B"]), ellipticity_kwargs={"seed": c["seed"]})
    _write_json(args.out, "parametrix.json", b.to_json())
    fit = remainder_order(subtract_identity(exact_composition(b, prob.P)), n=prob.n, seed=c["seed"])
    bound = -(N - 1) + float(c["remainder_slack"])
    ok = fit.passes(SGOrder(bound, bound))
    return {"problem": prob.name, "N": N, "remainder": fit.as_dict(), "bound": bound, "pass": ok}, ok


def cmd_boundary_reduce(args):
    prob = _load(args)
    c = prob.config
    b = parametrix(prob.P, int(c["parametrix_N"]), float(c["parametrix_B"]), ellipticity_kwargs={"seed": c["seed"]})
    grid = boundary_grid(prob.n, c["R"], min(c["R_max"], 1e3), min(c["n_radii"], 6), min(c["rays"], 8), c["seed"])
    prof = assumption_a_profile(b.terms, prob.n, grid, m1=prob.bvp.m1)
    system = assemble_system(prob.bvp, b, grid)
    rep = left_elliptic_check(system, c["sigma_min"])
    ok = rep.passed and prof.passed
    first = system.matrices[0]
    doc = {"problem": prob.name, "assumption_a": prof.as_dict(), "left_elliptic": rep.as_dict(),
           "system_at_first_point": {"real": first.real.tolist(), "imag": first.imag.tolist()}, "pass": ok}
    return doc, ok


def cmd_extend(args):
    with open(args.file) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ProblemFormatError(str(err)) from err
    try:
        B = doc.get("B")
        mu, nu = float(doc.get("mu", 2.0)), float(doc.get("nu", 1.0))
        K = int(doc.get("K", 12))
        p = ExtensionParams(mu=mu, nu=nu, D=doc.get("D"), r_exp=doc.get("r_exp"), K=K,
                            quad_tol=float(doc.get("quad_tol", 1e-12)), B=B)
        f = ex.parse(doc["f"]) if "f" in doc else None
        if "jets" in doc:
            jet = BoundaryJet(np.asarray(doc["jets"], dtype=complex), B)
        elif f is not None:
            jet = BoundaryJet.from_expr(f, K, B=B)
        else:
            raise KeyError("either 'jets' or 'f' is required")
        grid = doc.get("grid", {})
        tol = float(doc.get("jet_tol", 1e-6))
    except (KeyError, TypeError, ValueError) as err:
        raise ProblemFormatError(f"malformed jet file: {err}") from err
    t = np.linspace(float(grid.get("min", -1.25)), 0.0, int(grid.get("points", 2001)))
    h = extend_half_space(jet, p, t, as_grid=True)
    if f is not None:
        xpos = np.linspace(0.0, float(grid.get("max", 5.0)), int(grid.get("points", 2001)))[1:]
        vals = np.concatenate([h.values, np.broadcast_to(ex.evaluate(f, [xpos], []), xpos.shape)])
        h = GridFunction([np.concatenate([t, xpos])], vals, h.meta)
    os.makedirs(os.path.join(args.out, "grids"), exist_ok=True)
    h.to_csv(os.path.join(args.out, "grids", "extension.csv"))
    errs = jet_match_errors(jet, p, min(8, K))
    # one-sided finite-difference check of the first derivative at 0-
    delta = 1e-6
    ends = extend_half_space(jet, p, np.array([-2 * delta, -delta, 0.0]))
    fd1 = complex((3 * ends[2] - 4 * ends[1] + ends[0]) / (2 * delta))
    ts = -np.linspace(0.0, 1.2 * p.sigma(1), 20001)
    derivs = extend_half_space(jet, p, ts, derivatives=8)
    fit = seminorm_fit((ts, derivs), 8, 8)
    ok = max(errs) <= tol
    report = {
        "params": p.as_dict(), "tail_bound": p.tail_bound(), "jet_match": errs, "jet_match_max": max(errs),
        "jet_tol": tol, "fd_first_derivative": [fd1.real, fd1.imag],
        "fd_first_derivative_error": abs(fd1 - jet.values[1]) if K >= 1 else None,
        "support_zero_below_minus_one": bool(np.all(h.values[h.axes[0] <= -1.0] == 0)),
        "empirical_T": empirical_T(p), "seminorm": fit.as_dict(), "pass": ok,
    }
    return report, ok


def cmd_solve(args):
    prob = _load(args)
    u = solve(prob)
    os.makedirs(os.path.join(args.out, "grids"), exist_ok=True)
    u.to_csv(os.path.join(args.out, "grids", "solution.csv"))
    doc = {"problem": prob.name, "grid": u.spec(), "max_abs": float(np.max(np.abs(u.values))), "pass": True}
    if prob.exact is not None:
        xs = u.mesh()
        err = float(np.max(np.abs(u.values - ex.evaluate(prob.exact, xs, []))))
        doc["max_error"] = err
    return doc, True


def cmd_verify_decay(args):
    prob = _load(args)
    u = solve(prob)
    d = _check_decay(prob, u)
    return {"problem": prob.name, "decay": d, "pass": d["pass"]}, d["pass"]


def cmd_report(args):
    prob = _load(args)
    rep, u = verify_regularity(prob)
    if u is not None:
        os.makedirs(os.path.join(args.out, "grids"), exist_ok=True)
        u.to_csv(os.path.join(args.out, "grids", "solution.csv"))
    return rep.as_dict(), rep.passed


COMMANDS = {
    "check-elliptic": (cmd_check_elliptic, "SG-ellipticity margin of P"),
    "check-ls": (cmd_check_ls, "proper ellipticity and the Lopatinski-Shapiro determinant"),
    "parametrix": (cmd_parametrix, "parametrix terms and remainder slope fit"),
    "boundary-reduce": (cmd_boundary_reduce, "normalized boundary system and its left ellipticity"),
    "extend": (cmd_extend, "half-space extension of a boundary jet"),
    "solve": (cmd_solve, "solve the model problem and write the solution grid"),
    "verify-decay": (cmd_verify_decay, "exponential decay fit of the solution"),
    "report": (cmd_report, "full regularity report"),
}


def build_parser():
    parser = _Parser(prog="sgcalc", description="SG calculus and half-space boundary problem checks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_fn, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file", help="problem (or jet) JSON file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized grids")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "parametrix":
            sp.add_argument("--N", type=int, default=None, help="number of parametrix terms")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code) if err.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    fn = COMMANDS[args.command][0]
    try:
        log.info("sgcalc %s %s", args.command, args.file)
        doc, ok = fn(args)
    except (ProblemFormatError, FileNotFoundError) as err:
        sys.stderr.write(f"sgcalc: {err}\n")
        return EXIT_USAGE
    except SGCalcError as err:
        # a mathematical precondition failed: report it as a failed check
        doc, ok = {"pass": False, "error": type(err).__name__, "message": str(err)}, False
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    doc = dict(doc)
    doc.setdefault("versions", versions())
    path = _write_json(args.out, "report.json", doc)
    log.info("%s: %s (report: %s)", args.command, "PASS" if ok else "FAIL", path)
    return EXIT_PASS if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
