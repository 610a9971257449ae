"""Command-line front end.

Exit codes: 0 when every check passed, 1 when a check failed (reports are
still written), 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .calib import SamplePlan, _jsonable, verify_ms
from .energy import MsParams, evaluate_ms_energy
from .errors import CalibraError, ConfigurationError
from .examples import EXAMPLE_IDS, build_example
from .flux import flux_integral
from .oracle import Grid1d, minimize_1d_dp

SCHEMA = 1


def _pair(text, kind=float):
    try:
        a, b = text.split(",")
        return kind(a), kind(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}") from None


def _number_or_range(text):
    """``x`` or ``start:stop:step`` (inclusive of stop up to rounding)."""
    if ":" not in text:
        return float(text)
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:step") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, float(v)
    except ValueError:
        return k, v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=_number_or_range)
    common.add_argument("--beta", type=float)
    common.add_argument("--lambda", dest="lam", type=_number_or_range)
    common.add_argument("--grid", type=lambda s: _pair(s, int), help="N,M for the 1D oracle")
    common.add_argument("--tol", type=float, help="tolerance for every check")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report to this file")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--example", choices=EXAMPLE_IDS)
    common.add_argument("--param", type=_key_value, action="append", default=[],
                        help="extra example parameter key=value (repeatable)")
    common.add_argument("--input", help="example bundle written by the 'example' subcommand")

    p = argparse.ArgumentParser(prog="calibra", description="Verify calibrations of Mumford-Shah minimizers.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run every calibration check on an example")
    sub.add_parser("flux", parents=[common], help="energy versus flux of the calibration")
    m = sub.add_parser("minimize1d", parents=[common], help="exact discrete 1D minimization")
    m.add_argument("--dirichlet", type=_pair, help="boundary values u(0),u(a)")
    m.add_argument("--length", type=float, default=1.0)
    m.add_argument("--levels", type=_pair, help="level range lo,hi (defaults to the Dirichlet values)")
    sub.add_parser("sweep", parents=[common], help="threshold sweep over a parameter range")
    e = sub.add_parser("example", parents=[common], help="materialize an example bundle as JSON")
    e.add_argument("id", nargs="?", choices=EXAMPLE_IDS)
    sub.add_parser("report", parents=[common], help="summary of checks and energies for examples")
    return p


def _plan(args):
    if args.tol is None:
        return SamplePlan(seed=args.seed)
    return SamplePlan(seed=args.seed, tol_analytic=args.tol, tol_numeric=args.tol)


def _example_params(args, allow_ranges=False):
    if args.input:
        with open(args.input) as fh:
            data = json.load(fh)
        if data.get("schema") != SCHEMA:
            raise ConfigurationError("unsupported bundle schema")
        eid, params = data["example"], dict(data["params"])
    elif args.example:
        eid, params = args.example, {}
    else:
        raise ConfigurationError("give --example or --input")
    for key, val in (("alpha", args.alpha), ("beta", args.beta), ("lambda", args.lam)):
        if val is not None:
            params[key] = val
    params.update(dict(args.param))
    if not allow_ranges and any(isinstance(v, list) for v in params.values()):
        raise ConfigurationError("parameter ranges are only accepted by 'sweep'")
    return eid, params


def _emit(args, payload, rows=None, text=None):
    if args.format == "json":
        out = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in rows or []:
            w.writerow(r)
        out = buf.getvalue().rstrip("\n")
    else:
        out = text if text is not None else json.dumps(_jsonable(payload), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def cmd_verify(args):
    eid, params = _example_params(args)
    B = build_example(eid, **params)
    rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, _plan(args))
    payload = {**rep.to_dict(), "example": eid, "params": B.params, "seed": args.seed}
    rows = [("condition", "passed", "margin", "samples")] + [
        (r.condition, r.passed, repr(r.margin), r.samples_used) for r in rep.results]
    _emit(args, payload, rows, rep.table())
    return 0 if rep.verdict != "fails" else 1


def cmd_flux(args):
    eid, params = _example_params(args)
    B = build_example(eid, **params)
    F = evaluate_ms_energy(B.u, B.ms)
    fl = flux_integral(B.field, B.u, B.window)
    gap = F.total - fl.total
    tol = args.tol if args.tol is not None else 1e-5
    payload = {"schema": SCHEMA, "example": eid, "params": B.params, "energy": F.to_dict(),
               "flux": fl.to_dict(), "gap": gap, "equality": abs(gap) <= tol}
    rows = [("energy", "flux", "gap"), (repr(F.total), repr(fl.total), repr(gap))]
    text = f"energy {F.total:.10g}\nflux   {fl.total:.10g}\ngap    {gap:.3e}"
    _emit(args, payload, rows, text)
    return 0 if abs(gap) <= tol else 1


def cmd_minimize1d(args):
    alpha = args.alpha if args.alpha is not None else 1.0
    if isinstance(alpha, list):
        raise ConfigurationError("minimize1d takes a single alpha")
    p = MsParams(alpha, args.beta or 0.0)
    N, M = args.grid or (128, 257)
    if args.levels:
        lo, hi = args.levels
    elif args.dirichlet:
        lo, hi = min(args.dirichlet), max(args.dirichlet)
    else:
        raise ConfigurationError("give --levels or --dirichlet")
    grid = Grid1d(args.length, N, M, lo, hi, dirichlet=args.dirichlet)
    r = minimize_1d_dp(p, grid)
    payload = {"schema": SCHEMA, "energy": r.energy, "jumps": r.jump_count, "snap_error": r.snap_error,
               "nodes": grid.nodes.tolist(), "values": r.values.tolist(),
               "jump_edges": np.nonzero(r.jumps)[0].tolist()}
    rows = [("x", "u", "jump_after")] + [(repr(x), repr(v), bool(j)) for x, v, j in
                                          zip(grid.nodes, r.values, np.append(r.jumps, False))]
    _emit(args, payload, rows, f"optimum {r.energy:.10g}\njumps   {r.jump_count}")
    return 0


def cmd_sweep(args):
    eid, params = _example_params(args, allow_ranges=True)
    ranged = [k for k in ("lambda", "alpha") if isinstance(params.get(k), list)]
    if len(ranged) != 1:
        raise ConfigurationError("sweep needs exactly one of --lambda or --alpha given as start:stop:step")
    key = ranged[0]
    header = (key, "passed", "b1_margin", "verdict", "dp_optimum", "dp_jumps")
    rows, entries = [header], []
    N, M = args.grid or (128, 257)
    failed = False
    for val in params[key]:
        P = {**params, key: val}
        B = build_example(eid, **P)
        rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, _plan(args), c2=False)
        dp_opt = dp_jumps = ""
        if eid.startswith("affine") and B.u.dim == 1:
            lam, a = B.params["lambda"], B.params["a"]
            r = minimize_1d_dp(B.ms, Grid1d(a, N, M, 0.0, lam * a, dirichlet=(0.0, lam * a)))
            dp_opt, dp_jumps = repr(r.energy), r.jump_count
        passed = rep.verdict != "fails"
        failed |= not passed
        rows.append((repr(val), passed, repr(rep["b1"].margin), rep.verdict, dp_opt, dp_jumps))
        entries.append(dict(zip(header, rows[-1])))
    text = "\n".join(",".join(str(c) for c in r) for r in rows)
    _emit(args, {"schema": SCHEMA, "example": eid, "rows": entries}, rows, text)
    return 1 if failed else 0


def cmd_example(args):
    eid = args.id or args.example
    if eid is None:
        raise ConfigurationError("name an example")
    args.example = eid
    eid, params = _example_params(args)
    B = build_example(eid, **params)
    payload = B.to_dict()
    if args.format == "text" and not args.out:
        args.format = "json"
    _emit(args, payload, [("key", "value")] + [(k, v) for k, v in B.params.items()])
    return 0


def cmd_report(args):
    ids = [args.example] if (args.example or args.input) else list(EXAMPLE_IDS)
    header = ("example", "verdict", "energy", "flux", "gap", "failed")
    rows, entries, failed = [header], [], False
    for eid in ids:
        if args.input or args.example:
            eid, params = _example_params(args)
        else:
            params = {}
        B = build_example(eid, **params)
        rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, _plan(args))
        F = evaluate_ms_energy(B.u, B.ms).total
        fl = flux_integral(B.field, B.u, B.window).total
        bad = [r.condition for r in rep.results if not r.passed]
        failed |= rep.verdict == "fails"
        rows.append((eid, rep.verdict, repr(F), repr(fl), repr(F - fl), " ".join(bad)))
        entries.append({"example": eid, "params": B.params, "report": rep.to_dict(), "energy": F, "flux": fl})
    text = "\n".join(f"{r[0]:<17}{r[1]:<21}{r[2]:<22}{r[4]:<24}{r[5]}" for r in rows)
    _emit(args, {"schema": SCHEMA, "examples": entries}, rows, text)
    return 1 if failed else 0


COMMANDS = {"verify": cmd_verify, "flux": cmd_flux, "minimize1d": cmd_minimize1d, "sweep": cmd_sweep,
            "example": cmd_example, "report": cmd_report}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args)
    except (CalibraError, OSError, json.JSONDecodeError) as exc:
        print(f"calibra: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
