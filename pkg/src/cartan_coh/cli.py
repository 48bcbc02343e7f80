"""Command-line driver: ``cartan-coh <command> ...``.

Every command prints one JSON report (or a CSV dimension table with
``--csv``).  Exit status: 0 success, 1 a verification failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import resources
from typing import Callable, Dict, List, Optional, Tuple

from . import __version__
from .suite import DEFAULT_SEED, MODULES, run_suite

COMMANDS = ("gf-cohomology", "wo-cohomology", "group-cohomology", "cech", "action-bicomplex",
            "algebroid-check", "matched-pair", "inf-haefliger", "jet-verify", "prolong", "suite")


class InputError(Exception):
    """Bad flags or input files; reported with exit status 2."""


# -- input handling ----------------------------------------------------------------------------

def load_schema(name: str) -> dict:
    return json.loads(resources.files("cartan_coh").joinpath("schemas", f"{name}.json").read_text())


def read_input(path: str, schema: str) -> dict:
    """Parse a JSON file and validate it, with line or field diagnostics on failure."""
    import jsonschema
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema(schema))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "(top level)"
        raise InputError(f"{path}: field {where}: {err.message}")
    return data


def _table(table) -> dict:
    rendered = any(isinstance(r, dict) for reps in table.representatives.values() for r in reps)
    return {"dims": table.dim_list(),
            "degrees": table.to_json(render=(lambda k, r: r) if rendered else None)}


# -- commands ------------------------------------------------------------------------------------
# Each returns (result payload, passed, csv rows or None).

Outcome = Tuple[dict, bool, Optional[List[Tuple[int, int]]]]


def _rows(table) -> List[Tuple[int, int]]:
    return sorted(table.dims.items())


def cmd_gf(args, inputs) -> Outcome:
    from .gelfand_fuchs import gf_cohomology
    t = gf_cohomology(args.q, args.weight, args.max_degree, relative=args.relative)
    return _table(t), True, _rows(t)


def cmd_wo(args, inputs) -> Outcome:
    from .gelfand_fuchs import wo_cohomology
    t = wo_cohomology(args.q, args.max_degree)
    return _table(t), True, _rows(t)


def cmd_group(args, inputs) -> Outcome:
    from .groupoid import FiniteGroupoid, group_cohomology
    t = group_cohomology(FiniteGroupoid.from_json(inputs["group"]), p_max=args.max_degree)
    return _table(t), True, _rows(t)


def cmd_cech(args, inputs) -> Outcome:
    from .groupoid import CoverNerve, mv_cech
    t = mv_cech(CoverNerve.from_json(inputs["nerve"]), args.max_degree)
    return _table(t), True, _rows(t)


def cmd_action(args, inputs) -> Outcome:
    from .groupoid import action_bicomplex
    bc = action_bicomplex(inputs["group"]["matrices"], args.cap, args.pmax, args.qmax)
    return {**_table(bc.total), "cap": args.cap}, True, _rows(bc.total)


def cmd_algebroid(args, inputs) -> Outcome:
    from .cartan_algebroid import AlgebroidData, CartanPackage, jacobi_check
    data = inputs["data"]
    alg = AlgebroidData.from_json(data)
    verdicts = [jacobi_check(alg)]
    result = {}
    if "gamma" in data:
        pkg = CartanPackage.from_json(data)
        verdicts += [pkg.flatness_verdict(), pkg.multiplicativity_verdict()]
        result["flags"] = pkg.flags
    result["verdicts"] = [v.to_json() for v in verdicts]
    return result, all(v.ok for v in verdicts), None


def cmd_matched_pair(args, inputs) -> Outcome:
    from .cartan_algebroid import (AlgebroidConnection, AlgebroidData, CartanPackage,
                                   matched_pair_check, tangent_matched_pair)
    data = inputs["data"]
    if "first" in data:
        a1 = AlgebroidData.from_json(data["first"])
        a2 = AlgebroidData.from_json(data["second"])
        n1 = AlgebroidConnection(a1, a2.rank, data["first_on_second"])
        n2 = AlgebroidConnection(a2, a1.rank, data["second_on_first"])
        v = matched_pair_check(a1, n1, a2, n2)
    else:
        v = matched_pair_check(*tangent_matched_pair(CartanPackage.from_json(data)))
    return {"verdict": v.to_json()}, v.ok, None


def cmd_inf_haefliger(args, inputs) -> Outcome:
    from .cartan_algebroid import CartanPackage, inf_haefliger
    pkg = CartanPackage.from_json(inputs["data"])
    rep = inf_haefliger(pkg, args.pmax, args.qmax, degree_bound=args.degree_bound,
                        weight=args.weight)
    rows = _rows(rep.cohomology) if rep.cohomology is not None else None
    return {**rep.to_json(), "flags": pkg.flags}, rep.ok, rows


def cmd_jet(args, inputs) -> Outcome:
    from .jet import jet_suite
    report = jet_suite(args.seed, samples=args.samples, q_max=args.q, order=args.order)
    verdicts = {k: v.to_json() for k, v in report.items()}
    return {"verdicts": verdicts}, all(v.ok for v in report.values()), None


def cmd_prolong(args, inputs) -> Outcome:
    import sympy
    from .jet import ConstraintSystem, base_symbol, prolong_constraints
    data = inputs["constraints"]
    system = ConstraintSystem.from_json(data)
    out = prolong_constraints(system, args.steps, working_order=args.order_budget)
    result = {"system": out.to_json()}
    passed = True
    if data.get("witnesses"):
        names = {base_symbol(i).name: base_symbol(i) for i in range(system.nvars)}
        checks = []
        for w in data["witnesses"]:
            maps = [sympy.sympify(m, locals=names) for m in w["maps"]]
            points = [[sympy.Rational(str(x)) for x in pt] for pt in w["points"]]
            ok = out.holds_for(maps, points)
            checks.append({"maps": w["maps"], "pass": ok})
            passed = passed and ok
        result["witnesses"] = checks
    return result, passed, None


def cmd_suite(args, inputs) -> Outcome:
    only = [int(x) for x in args.only.split(",")] if args.only else None
    rep = run_suite(None if args.all else args.module, seed=args.seed, only=only)
    return rep, rep["pass"], None


HANDLERS: Dict[str, Tuple[Callable, Dict[str, str]]] = {
    "gf-cohomology": (cmd_gf, {}),
    "wo-cohomology": (cmd_wo, {}),
    "group-cohomology": (cmd_group, {"group": "group"}),
    "cech": (cmd_cech, {"nerve": "nerve"}),
    "action-bicomplex": (cmd_action, {"group": "linear_group"}),
    "algebroid-check": (cmd_algebroid, {"data": "algebroid"}),
    "matched-pair": (cmd_matched_pair, {"data": "matched_pair"}),
    "inf-haefliger": (cmd_inf_haefliger, {"data": "algebroid"}),
    "jet-verify": (cmd_jet, {}),
    "prolong": (cmd_prolong, {"constraints": "constraints"}),
    "suite": (cmd_suite, {}),
}

TABLE_COMMANDS = {"gf-cohomology", "wo-cohomology", "group-cohomology", "cech",
                  "action-bicomplex", "inf-haefliger"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cartan-coh", description="Exact cohomology computations and verification suites.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"seed for randomized checks (default {DEFAULT_SEED})")
        p.add_argument("--timing", action="store_true",
                       help="add elapsed_ms to the report (breaks byte-identity)")
        if name in TABLE_COMMANDS:
            p.add_argument("--csv", action="store_true", help="print degree,dim rows instead of JSON")
        return p

    p = add("gf-cohomology", "weight slice cohomology of formal vector fields")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--weight", type=int, default=0)
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--relative", action="store_true", help="cochains relative to O_q")

    p = add("wo-cohomology", "cohomology of the truncated Weil algebra WO_q")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--max-degree", type=int, required=True)

    p = add("group-cohomology", "cohomology of a finite group with rational coefficients")
    p.add_argument("--group", required=True, help="multiplication table JSON")
    p.add_argument("--max-degree", type=int, default=2)

    p = add("cech", "Cech cohomology of a cover nerve")
    p.add_argument("--nerve", required=True, help="nerve JSON")
    p.add_argument("--max-degree", type=int, default=1)

    p = add("action-bicomplex", "total cohomology of a finite linear action on polynomial forms")
    p.add_argument("--group", required=True, help="matrices JSON")
    p.add_argument("--cap", type=int, required=True, help="bound on monomial degree plus form degree")
    p.add_argument("--pmax", type=int, required=True)
    p.add_argument("--qmax", type=int, required=True)

    p = add("algebroid-check", "algebroid axioms, plus flatness flags when gamma is given")
    p.add_argument("--data", required=True)

    p = add("matched-pair", "matched pair axioms")
    p.add_argument("--data", required=True)

    p = add("inf-haefliger", "bicomplex identities and sliced cohomology of a Cartan package")
    p.add_argument("--data", required=True)
    p.add_argument("--pmax", type=int, default=2)
    p.add_argument("--qmax", type=int, default=2)
    p.add_argument("--weight", type=int, default=None)
    p.add_argument("--degree-bound", type=int, default=4)

    p = add("jet-verify", "multiplicativity, bicomplex, Spencer and Moebius checks on jets")
    p.add_argument("--q", type=int, default=2, choices=(1, 2))
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--samples", type=int, default=100)

    p = add("prolong", "prolong a polynomial PDE system by total derivatives")
    p.add_argument("--constraints", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--order-budget", type=int, default=None, help="working jet order")

    p = add("suite", "run the acceptance matrix")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--all", action="store_true")
    group.add_argument("--module", choices=MODULES)
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return parser


def _arguments(args) -> dict:
    skip = {"command", "timing", "csv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _digest(command: str, arguments: dict, inputs: dict) -> str:
    blob = json.dumps({"command": command, "arguments": arguments, "inputs": inputs},
                      sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()


def _validate_numbers(args):
    for name in ("q", "max_degree", "cap", "pmax", "qmax", "samples", "steps", "order",
                 "degree_bound"):
        v = getattr(args, name, None)
        if v is not None and v < 0:
            raise InputError(f"--{name.replace('_', '-')} must be non-negative")
    if getattr(args, "q", None) == 0:
        raise InputError("--q must be positive")


def run(argv: Optional[List[str]] = None, out=None) -> int:
    """Parse, dispatch and print; returns the exit status."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    handler, files = HANDLERS[args.command]
    try:
        _validate_numbers(args)
        inputs = {key: read_input(getattr(args, key), schema) for key, schema in files.items()}
        result, passed, rows = handler(args, inputs)
    except InputError as exc:
        print(json.dumps({"error": "input", "message": str(exc)}), file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, IndexError, ZeroDivisionError) as exc:
        # raised by constructors and checks on malformed or out-of-range data
        print(json.dumps({"error": "input", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    if getattr(args, "csv", False):
        if rows is None:
            print(json.dumps({"error": "input", "message": "no dimension table to print"}),
                  file=sys.stderr)
            return 2
        out.write("degree,dim\n" + "".join(f"{k},{d}\n" for k, d in rows))
        return 0 if passed else 1
    arguments = _arguments(args)
    report = {
        "command": {"name": args.command, "arguments": arguments},
        "input_digest": _digest(args.command, arguments, inputs),
        "result": result,
        "pass": passed,
        "version": __version__,
        "seed": args.seed,
    }
    if args.timing:
        report["elapsed_ms"] = int((time.perf_counter() - start) * 1000)
    out.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    if not passed:
        print(json.dumps({"error": "verification", "first_failure": _first_failure(result)}),
              file=sys.stderr)
    return 0 if passed else 1


def _first_failure(result):
    """Depth-first search for the first serialized counterexample."""
    if isinstance(result, dict):
        if "first_failure" in result:
            return result["first_failure"]
        for k in sorted(result) if "criteria" not in result else ["criteria"]:
            found = _first_failure(result[k])
            if found is not None:
                return found
    if isinstance(result, list):
        for item in result:
            found = _first_failure(item)
            if found is not None:
                return found
    return None


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
