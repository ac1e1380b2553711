"""Command-line front end.

Subcommands:

  make-cavity   emit a cavity model file
  synth         synthesize a controller (fixed tau or tau search)
  verify        check a synthesis report against sampled uncertainties
  sweep-tau     CSV of the bound and feasibility across a tau grid

Exit codes are a stable contract: 0 success, 1 input error, 2 the
synthesis is infeasible, 3 the verification found a bound violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys

import numpy as np

from .errors import (InfeasibleSynthesis, InputError, NumericError,
                     ParseError, VerificationFailure)
from .model import Controller
from .modelfile import CavitySpec, load_model, make_cavity, save_model
from .synthesis import SynthesisReport, evaluate_tau, minimize_tau, synthesize
from .verify import sweep_bound

REPORT_SCHEMA_VERSION = "1"

# short spellings accepted on the command line
_MODE_MAP = {"auto": "auto",
             "steady": "steady-state", "steady-state": "steady-state",
             "finite": "finite-horizon", "finite-horizon": "finite-horizon"}


class _Parser(argparse.ArgumentParser):
    # argparse's default error path exits with status 2, which this tool
    # reserves for infeasible synthesis; route usage errors to exit 1.
    def error(self, message):
        raise ParseError(message)


def _jsonable(v):
    # non-finite floats become the strings "inf"/"-inf"/"nan" so reports
    # stay strict JSON
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else repr(f)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def synthesis_report_dict(report: SynthesisReport) -> dict:
    """JSON form of a synthesis report (full matrices, full precision)."""
    pair = report.riccati
    steady = pair.mode == "steady-state"
    y_repr = pair.Y if steady else pair.Y.final
    x_repr = pair.X if steady else pair.X.initial
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "synthesis",
        "tau": float(report.tau),
        "bound": float(report.bound),
        "horizon": float(report.horizon),
        "mode": pair.mode,
        "controller": {
            "A_K": report.controller.A_K.tolist(),
            "B_K": report.controller.B_K.tolist(),
            "C_K": report.controller.C_K.tolist(),
            "x_K0": report.controller.x_K0.tolist(),
        },
        "riccati": {
            "mode": pair.mode,
            "feasible": bool(pair.feasible),
            "Y": y_repr.tolist(),
            "X": x_repr.tolist(),
            "rho_max": float(pair.rho_max),
            "c0_margin": float(pair.c0_margin),
        },
        "assumptions": _jsonable(report.assumptions),
        "notes": _jsonable(report.notes),
    }


def _load_synthesis_report(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read report {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict) or doc.get("kind") != "synthesis":
        raise ParseError(f"{path} is not a synthesis report")
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ParseError(
            f"unsupported report schema_version {doc.get('schema_version')!r}")
    for key in ("tau", "bound", "horizon", "controller"):
        if key not in doc:
            raise ParseError(f"missing key '{key}' in synthesis report")
    ctrl = doc["controller"]
    for key in ("A_K", "B_K", "C_K", "x_K0"):
        if key not in ctrl:
            raise ParseError(f"missing key 'controller.{key}' in report")
    return doc


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _parse_range(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"--tau-range wants 'lo,hi', got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ParseError(f"--tau-range wants two numbers, got {text!r}")
    return lo, hi


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_make_cavity(args) -> int:
    spec = CavitySpec(kappa1=args.kappas[0], kappa2=args.kappas[1],
                      kappa3=args.kappas[2], delta0=args.delta0,
                      Omega0=args.omega0, epsilon0=args.epsilon0,
                      uncertainty=args.type)
    save_model(make_cavity(spec, t_f=args.tf), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    sys_, w, t_f = load_model(args.model)
    if args.tf is not None:
        t_f = args.tf
    if (args.tau is None) == (args.tau_range is None):
        raise ParseError("pass exactly one of --tau or --tau-range")

    mode = _MODE_MAP[args.mode]
    if args.tau is not None:
        report = synthesize(sys_, w, args.tau, t_f, mode=mode)
    else:
        lo, hi = _parse_range(args.tau_range)
        report = minimize_tau(sys_, w, t_f, (lo, hi), grid=args.grid,
                              mode=mode)
    if args.out:
        _write_json(synthesis_report_dict(report), args.out)
    print(f"tau={report.tau:.6g} bound={report.bound:.10g} "
          f"mode={report.riccati.mode} rho_max={report.riccati.rho_max:.6g}")
    return 0


def cmd_verify(args) -> int:
    sys_, w, _ = load_model(args.model)
    doc = _load_synthesis_report(args.report)
    ctrl = Controller(A_K=np.array(doc["controller"]["A_K"], dtype=float),
                      B_K=np.array(doc["controller"]["B_K"], dtype=float),
                      C_K=np.array(doc["controller"]["C_K"], dtype=float),
                      x_K0=np.array(doc["controller"]["x_K0"], dtype=float))
    result = sweep_bound(
        sys_, w, ctrl, float(doc["bound"]), float(doc["horizon"]),
        n_samples=args.samples, seed=args.seed,
        mc_paths=args.paths if args.mc else 0)
    if args.out:
        out = {"schema_version": REPORT_SCHEMA_VERSION,
               "kind": "verification", **result.as_dict()}
        _write_json(_jsonable(out), args.out)
    print(f"samples={len(result.samples)} max_j={result.max_j_dre:.10g} "
          f"min_margin={result.min_margin:.10g} all_pass={result.all_pass}")
    if not result.all_pass:
        worst = min(result.admissible_samples, key=lambda s: s.margin,
                    default=None)
        detail = f" (worst: {worst.delta_id})" if worst else ""
        raise VerificationFailure(
            f"cost bound violated by sampled uncertainty{detail}")
    return 0


def cmd_sweep_tau(args) -> int:
    sys_, w, t_f = load_model(args.model)
    if args.tf is not None:
        t_f = args.tf
    lo, hi = _parse_range(args.tau_range)
    if not (0.0 < lo < hi):
        raise ParseError("--tau-range wants 0 < lo < hi")
    taus = np.geomspace(lo, hi, args.grid)

    mode = _MODE_MAP[args.mode]
    rows = []
    for tau in taus:
        s = evaluate_tau(sys_, w, float(tau), t_f, mode)
        rows.append([f"{s.tau!r}", int(s.feasible), f"{s.bound!r}",
                     f"{s.rho_max!r}", f"{s.c0_margin!r}"])

    sink = open(args.out, "w", newline="", encoding="utf-8") if args.out \
        else _sys.stdout
    try:
        writer = csv.writer(sink)
        writer.writerow(["tau", "feasible", "bound", "rho_max", "min_eig_Y"])
        writer.writerows(rows)
    finally:
        if args.out:
            sink.close()
    if args.out:
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    p = _Parser(prog="qgcc",
                description="guaranteed-cost controller synthesis and "
                            "verification for uncertain linear quantum "
                            "stochastic models")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    mk = sub.add_parser("make-cavity", help="emit a cavity model file")
    mk.add_argument("--kappas", type=float, nargs=3, default=[2.0, 2.0, 2.0],
                    metavar=("K1", "K2", "K3"))
    mk.add_argument("--delta0", type=float, default=0.0)
    mk.add_argument("--omega0", type=float, default=0.0)
    mk.add_argument("--epsilon0", type=float, default=1.0)
    mk.add_argument("--type", choices=("kappa2-perturbation", "detuning"),
                    default="kappa2-perturbation")
    mk.add_argument("--tf", type=float, default=100.0)
    mk.add_argument("--out", default="cavity.json")
    mk.set_defaults(func=cmd_make_cavity)

    sy = sub.add_parser("synth", help="synthesize a controller")
    sy.add_argument("model")
    sy.add_argument("--tau", type=float)
    sy.add_argument("--tau-range", dest="tau_range")
    sy.add_argument("--grid", type=int, default=64)
    sy.add_argument("--tf", type=float)
    sy.add_argument("--mode", choices=tuple(_MODE_MAP), default="auto")
    sy.add_argument("--out")
    sy.set_defaults(func=cmd_synth)

    ve = sub.add_parser("verify", help="verify a synthesis report")
    ve.add_argument("model")
    ve.add_argument("report")
    ve.add_argument("--samples", type=int, default=50)
    ve.add_argument("--paths", type=int, default=10_000)
    ve.add_argument("--seed", type=int, default=0)
    ve.add_argument("--mc", action="store_true",
                    help="add Monte Carlo spot checks per sample")
    ve.add_argument("--out")
    ve.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep-tau", help="tabulate the bound over tau")
    sw.add_argument("model")
    sw.add_argument("--tau-range", dest="tau_range", required=True)
    sw.add_argument("--grid", type=int, default=64)
    sw.add_argument("--tf", type=float)
    sw.add_argument("--mode", choices=tuple(_MODE_MAP), default="auto")
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep_tau)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=_sys.stderr)
        return 1
    except InfeasibleSynthesis as exc:
        print(f"infeasible: {exc}", file=_sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
