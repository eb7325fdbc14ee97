"""Command-line entry point.

Exit status: 0 success, 2 solver error (including verification failures and
node limits), 3 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report
from .centers import METHODS, compute_center
from .errors import FlexError, InputError, NodeLimit, SolverError
from .feasibility import load_dist, stochastic_flexibility
from .flex import (FEAS_TOL, compare_designs, flexibility_index, rank_constraints,
                   verify_solution)
from .model import load_system, system_to_dict, validate
from .network import build_system, component_rank_map, emit_dot, load_network
from .sets import describe, load_set_data, set_from_dict
from .solvers.bnb import BnBConfig

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class _VerificationFailed(SolverError):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _add_tolerances(p):
    p.add_argument("--tol-feas", type=float, default=FEAS_TOL,
                   help="feasibility tolerance on psi at the nominal point")
    p.add_argument("--tol-gap", type=float, default=1e-9, help="relative optimality gap")
    p.add_argument("--big-m", type=float, default=None, help="fixed big-M instead of the automatic one")


def _add_output(p, formats, default="json"):
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", help="write here instead of stdout")


def build_parser():
    parser = _Parser(prog="flexkit", description="Flexibility analysis of linear systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="flexibility index of one system for one set")
    p.add_argument("--system", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--samples", type=_positive_int, default=10_000,
                   help="boundary samples for the verification pass")
    p.add_argument("--seed", type=int, default=0)
    _add_tolerances(p)
    _add_output(p, ["json", "csv"])

    p = sub.add_parser("sf", help="Monte Carlo stochastic flexibility")
    p.add_argument("--system", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p, ["json", "csv"])

    p = sub.add_parser("center", help="nominal point inside the feasible region")
    p.add_argument("--system", required=True)
    p.add_argument("--method", choices=METHODS, default="analytic")
    _add_output(p, ["json", "csv"])

    p = sub.add_parser("rank", help="limiting-constraint ranking")
    p.add_argument("--system", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--levels", type=_positive_int, default=None)
    _add_tolerances(p)
    _add_output(p, ["json", "csv"])

    p = sub.add_parser("compare", help="compare designs under several sets")
    p.add_argument("--system", action="append", required=True)
    p.add_argument("--set", action="append", required=True)
    p.add_argument("--dist")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_tolerances(p)
    _add_output(p, ["csv", "json"], default="csv")

    net = sub.add_parser("network", help="distribution networks")
    nsub = net.add_subparsers(dest="network_command", required=True, parser_class=_Parser)
    p = nsub.add_parser("build", help="compile a network to a system JSON")
    p.add_argument("--network", required=True)
    _add_output(p, ["json"])
    p = nsub.add_parser("rank", help="rank limiting network components")
    p.add_argument("--network", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--levels", type=_positive_int, default=None)
    _add_tolerances(p)
    _add_output(p, ["json", "csv", "dot"])
    return parser


# --- helpers -------------------------------------------------------------------------

def _load_system(path):
    system = load_system(_existing(path))
    diags = validate(system)
    if diags:
        raise InputError(f"{path}: " + "; ".join(diags))
    return system


def _existing(path):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    return path


def _resolve_set(path, system):
    """Load a set; a string mean names a center method computed on ``system``."""
    data = load_set_data(_existing(path))
    mean = data.get("mean") if isinstance(data, dict) else None
    if isinstance(mean, str):
        if mean not in METHODS:
            raise InputError(f"{path}: mean '{mean}' is neither a vector nor one of {METHODS}")
        return set_from_dict(data, mean=compute_center(system, mean).theta_bar), mean
    return set_from_dict(data), None


def _config(args):
    return BnBConfig(rel_gap=args.tol_gap, big_m=args.big_m)


def _tolerances(args):
    out = {}
    for key in ("tol_feas", "tol_gap", "big_m"):
        if hasattr(args, key):
            v = getattr(args, key)
            out[key.replace("_", "-")] = "auto" if v is None else v
    return out


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------------

def cmd_index(args, prov):
    system = _load_system(args.system)
    spec, center = _resolve_set(args.set, system)
    sol = flexibility_index(system, spec, _config(args), args.tol_feas)
    ver = verify_solution(sol, samples=args.samples, seed=args.seed)
    result = sol.to_dict()
    result["stats"].pop("seconds", None)  # keeps artifacts byte-reproducible
    if center:
        result["set"]["mean_method"] = center
    result["verification"] = ver
    if args.format == "csv":
        row = {"set": describe(spec), "F": sol.F, "active": sol.active_labels,
               "weakly_active": sol.weakly_active, "co_limiting": sol.co_limiting,
               "violations": ver["violations"], "outer_violations": ver["outer_violations"]}
        text = report.render_csv(list(row), [row], prov)
    else:
        text = report.render_json({"result": result}, prov)
    _emit(args, text)
    if not ver["passed"]:
        raise _VerificationFailed(
            f"verification found {ver['violations']} infeasible boundary samples at F")


def cmd_sf(args, prov):
    system = _load_system(args.system)
    dist = load_dist(_existing(args.dist))
    est = stochastic_flexibility(system, dist, args.samples, args.seed, tol=1e-9)
    d = est.to_dict()
    d.pop("elapsed_seconds")
    if args.format == "csv":
        text = report.render_csv(["estimate", "half_width", "samples", "seed"], [d], prov)
    else:
        text = report.render_json({"result": d}, prov)
    _emit(args, text)


def cmd_center(args, prov):
    system = _load_system(args.system)
    res = compute_center(system, args.method)
    if args.format == "csv":
        row = dict(zip(system.theta_names, res.theta_bar.tolist()))
        row.update(method=res.method, psi_at_center=res.psi_at_center)
        text = report.render_csv(["method", *system.theta_names, "psi_at_center"], [row], prov)
    else:
        text = report.render_json({"result": res.to_dict(system)}, prov)
    _emit(args, text)


def _ranking_payload(ranking):
    return {"levels": [lv.to_dict() for lv in ranking], "termination": ranking.termination}


def cmd_rank(args, prov):
    system = _load_system(args.system)
    spec, _ = _resolve_set(args.set, system)
    ranking = rank_constraints(system, spec, args.levels, _config(args), args.tol_feas)
    if args.format == "csv":
        text = report.render_csv(report.RANK_COLUMNS, report.rank_rows(ranking), prov)
    else:
        text = report.render_json(_ranking_payload(ranking), prov)
    _emit(args, text)


def cmd_compare(args, prov):
    designs = [(Path(p).stem, _load_system(p)) for p in args.system]
    n = {s.n_theta for _, s in designs}
    if len(n) != 1:
        raise InputError("all designs must share the same theta dimension")
    sets = []
    for path in args.set:
        data = load_set_data(_existing(path))
        if isinstance(data.get("mean"), str):
            raise InputError(f"{path}: compare needs an explicit mean vector shared by all designs")
        sets.append(set_from_dict(data))
    dist = load_dist(_existing(args.dist)) if args.dist else None
    rows = compare_designs(designs, sets, dist, args.samples, args.seed, _config(args), args.tol_feas)
    if args.format == "csv":
        text = report.render_csv(report.COMPARE_COLUMNS, rows, prov)
    else:
        text = report.render_json({"rows": rows}, prov)
    _emit(args, text)
    failed = [r["design"] for r in rows if r["errors"]]
    if failed:
        raise SolverError("analyses failed for " + ", ".join(failed) + ": "
                          + " | ".join(e for r in rows for e in r["errors"]))


def cmd_network(args, prov):
    net = load_network(_existing(args.network))
    system = build_system(net)
    if args.network_command == "build":
        _emit(args, report.render_json(system_to_dict(system), prov))
        return
    spec, _ = _resolve_set(args.set, system)
    ranking = rank_constraints(system, spec, args.levels, _config(args), args.tol_feas)
    cmap = component_rank_map(net, ranking)
    if args.format == "dot":
        text = report.render_dot(emit_dot(net, cmap), prov)
    elif args.format == "csv":
        text = report.render_csv(report.COMPONENT_COLUMNS, cmap.rows(), prov)
    else:
        text = report.render_json({**_ranking_payload(ranking), "components": cmap.rows()}, prov)
    _emit(args, text)


COMMANDS = {"index": cmd_index, "sf": cmd_sf, "center": cmd_center, "rank": cmd_rank,
            "compare": cmd_compare, "network": cmd_network}


def main(argv=None):
    args = build_parser().parse_args(argv)
    name = args.command + (f" {args.network_command}" if args.command == "network" else "")
    prov = report.provenance(name, getattr(args, "seed", None), _tolerances(args))
    try:
        COMMANDS[args.command](args, prov)
    except InputError as exc:
        print(f"flexkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NodeLimit as exc:
        print(f"flexkit: solver error: {exc} (gap {exc.gap:.6g})", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"flexkit: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FlexError as exc:
        print(f"flexkit: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"flexkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"flexkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
