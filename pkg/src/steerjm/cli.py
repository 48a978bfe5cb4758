"""Command-line front end.

    steerjm se-map      --input A.json [--output B.json]
    steerjm check       --input A.json [--tol X]
    steerjm robustness  --input M.json --kind {general,white,weight} [--bias B]
    steerjm scan-fig1   [--output fig1.csv] [--threads N]
    steerjm scan-fig2   [--output fig2.csv] [--threads N]

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 internal
consistency failure, 5 solver failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

import numpy as np

from . import __version__
from .assemblage import AssemblageError, MeasurementAssemblage, check
from .jsonio import HermiticityError, ParseError, assemblage_to_dict, dumps, load, loads, matrix_to_json
from .robustness import incompatibility_robustness, incompatibility_weight, white_noise_robustness
from .scans import Grid, ScanSpec, ScanSpecError, run_scan, write_csv
from .sdp import BOUNDARY_TOL, FEASIBILITY_TOL, jm_feasible, lhs_feasible
from .semap import InconsistentModelError, JointObservable, se_observables
from .solver import SolverError

log = logging.getLogger("steerjm")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CONSISTENCY = 4
EXIT_SOLVER = 5


class ConsistencyError(RuntimeError):
    pass


def _provenance(args, **extra):
    out = {"tool": "steerjm", "version": __version__, "command": args.command}
    for k in ("input", "tol", "seed", "bias", "kind"):
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    out.update(extra)
    return out


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _emit_json(args, doc):
    doc = {"provenance": _provenance(args), **doc}
    with _output(args.output) as fh:
        fh.write(dumps(doc, indent=2) + "\n")


def _read(args, kind=None):
    if args.input is None:
        raise ParseError("--input is required")
    if args.input == "-":
        return loads(sys.stdin.read(), kind)
    return load(args.input, kind)


def _ops_json(ops):
    return [matrix_to_json(g) for g in ops]


def _verdict(result, yes, no):
    if result.status == "boundary":
        return "boundary"
    return yes if result.feasible else no


def _result_json(result, yes, no):
    out = {
        "verdict": _verdict(result, yes, no),
        "feasible": result.feasible,
        "status": result.status,
        "robustness": result.robustness,
        "margin": result.margin,
        "solver_inaccurate": any(s.info.get("inaccurate", False) for s in result.solutions),
    }
    if result.model is not None:
        ops = result.model.effects if isinstance(result.model, JointObservable) else result.model.states
        out["model"] = {
            "operators": _ops_json(ops),
            "response": np.asarray(result.model.response).tolist(),
        }
    if result.witness is not None:
        out["witness"] = {
            "operators": [_ops_json(s) for s in result.witness.operators],
            "value": result.witness.value,
        }
    return out


# commands

def cmd_se_map(args):
    a = _read(args, "state")
    check(a)
    se = se_observables(a)
    doc = {
        "observables": assemblage_to_dict(se.observables),
        "rank": se.rank,
        "dim": a.dim,
        "projection": matrix_to_json(se.proj),
        "range_residual": se.range_residual,
    }
    if se.trivially_jm:
        doc["note"] = "trivially JM"
    _emit_json(args, doc)
    return EXIT_OK


def cmd_check(args):
    a = _read(args)
    check(a)
    tol = args.tol if args.tol is not None else FEASIBILITY_TOL
    if isinstance(a, MeasurementAssemblage):
        res = jm_feasible(a, tol=tol)
        _emit_json(args, {"kind": "measurement", "jm": _result_json(res, "JM", "not JM")})
        return EXIT_OK

    lhs = lhs_feasible(a, tol=tol)
    se = se_observables(a)
    doc = {"kind": "state", "rank": se.rank,
           "unsteerable": _result_json(lhs, "unsteerable", "steerable")}
    if se.trivially_jm:
        doc["se_jm"] = {"verdict": "JM", "feasible": True, "status": "feasible",
                        "robustness": 0.0, "margin": None, "note": "trivially JM"}
        agree = lhs.feasible or abs(lhs.margin) < BOUNDARY_TOL
    else:
        jm = jm_feasible(se.observables, tol=tol)
        doc["se_jm"] = _result_json(jm, "JM", "not JM")
        agree = (jm.feasible == lhs.feasible
                 or min(abs(jm.margin), abs(lhs.margin)) < BOUNDARY_TOL)
    doc["agree"] = bool(agree)
    _emit_json(args, doc)
    if not agree:
        raise ConsistencyError("state verdict and SE-observable verdict disagree")
    return EXIT_OK


def cmd_robustness(args):
    m = _read(args, "measurement")
    check(m)
    if args.kind == "general":
        rep = incompatibility_robustness(m)
    elif args.kind == "white":
        rep = white_noise_robustness(m, args.bias, tol=args.tol if args.tol is not None else 1e-7)
    else:
        rep = incompatibility_weight(m)
    doc = {"kind": rep.kind, "value": rep.value, "margin": rep.margin, "bias": rep.bias,
           "mixing_weight": rep.mixing_weight}
    if rep.noise is not None:
        doc["noise"] = assemblage_to_dict(rep.noise)
    if rep.joint is not None:
        doc["joint"] = {"effects": _ops_json(rep.joint.effects),
                        "response": np.asarray(rep.joint.response).tolist()}
    doc["info"] = {k: v for k, v in rep.info.items() if isinstance(v, (int, float, str, list))}
    _emit_json(args, doc)
    return EXIT_OK


def _grid_arg(text):
    try:
        lo, hi, steps = text.split(":")
        return Grid(float(lo), float(hi), int(steps))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX:STEPS, got {text!r}") from None


def _scan(args, experiment, names):
    spec = ScanSpec.default(experiment, seed=args.seed,
                            tol=args.tol if args.tol is not None else 1e-7)
    for attr in names:
        g = getattr(args, attr)
        if g is not None:
            spec.grid[attr.rstrip("_")] = g
    if experiment == "fig1" and args.t2 is not None:
        spec.fixed["t2"] = args.t2
    spec.validate()
    rows = run_scan(spec, workers=args.threads)
    with _output(args.output) as fh:
        write_csv(fh, spec, rows, version=__version__)
    failed = [r for r in rows if experiment == "fig2" and r[-1] != "ok"]
    if failed:
        log.error("%d rows hit solver failures", len(failed))
        return EXIT_SOLVER
    return EXIT_OK


def cmd_scan_fig1(args):
    return _scan(args, "fig1", ("lambda_", "r", "theta"))


def cmd_scan_fig2(args):
    return _scan(args, "fig2", ("theta",))


def build_parser():
    p = argparse.ArgumentParser(prog="steerjm",
                                description="Steering <-> joint measurability toolkit")
    p.add_argument("--version", action="version", version=f"steerjm {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, inp=True):
        if inp:
            sp.add_argument("--input", help="assemblage JSON ('-' for stdin)")
        sp.add_argument("--output", help="output path (default stdout)")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("se-map", help="steering-equivalent observables of a state assemblage")
    common(sp)
    sp.set_defaults(func=cmd_se_map)

    sp = sub.add_parser("check", help="JM / unsteerability verdict with certificates")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("robustness", help="incompatibility quantifiers of a measurement assemblage")
    common(sp)
    sp.add_argument("--kind", choices=("general", "white", "weight"), default="general")
    sp.add_argument("--bias", type=float, default=0.0)
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("scan-fig1", help="Busch vs exact criterion over (lambda, r, theta)")
    common(sp, inp=False)
    sp.add_argument("--lambda", dest="lambda_", type=_grid_arg, metavar="MIN:MAX:STEPS")
    sp.add_argument("--r", type=_grid_arg, metavar="MIN:MAX:STEPS")
    sp.add_argument("--theta", type=_grid_arg, metavar="MIN:MAX:STEPS")
    sp.add_argument("--t2", type=float)
    sp.set_defaults(func=cmd_scan_fig1)

    sp = sub.add_parser("scan-fig2", help="noise tolerances of two sharp qubit measurements")
    common(sp, inp=False)
    sp.add_argument("--theta", type=_grid_arg, metavar="MIN:MAX:STEPS")
    sp.set_defaults(func=cmd_scan_fig2)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="steerjm: %(message)s")
    try:
        return args.func(args)
    except ParseError as e:
        print(f"steerjm: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (AssemblageError, HermiticityError) as e:
        print("steerjm: invalid input:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ScanSpecError, ValueError) as e:
        if isinstance(e, InconsistentModelError):
            print(f"steerjm: inconsistency: {e}", file=sys.stderr)
            return EXIT_CONSISTENCY
        print(f"steerjm: invalid input: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConsistencyError as e:
        print(f"steerjm: inconsistency: {e}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except SolverError as e:
        print(f"steerjm: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as e:
        print(f"steerjm: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
