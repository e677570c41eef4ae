"""Command-line entry point: ``cfl list | run | check | compare``.

Exit codes: 0 when every expectation passes, 1 when one fails, 2 on usage or
parse errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from .equivalence import compare
from .errors import CflError, ParseError, ValidationError
from .scenarios import _BUILDERS, build, load_scenario, rcm_of, resolve, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _default_seed() -> int:
    raw = os.environ.get("CFL_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"CFL_SEED must be an integer, got {raw!r}") from None


def _params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ParseError(f"--param expects k=v, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ParseError(f"--param {key} needs a number, got {value!r}") from None
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfl", description="Structural and potential-outcome causal models.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list builtin scenarios")

    r = sub.add_parser("run", help="run a scenario and report its expectations")
    r.add_argument("scenario", help="builtin id or path to a scenario JSON file")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--engine", choices=("exact", "gaussian", "mc"), default=None)
    r.add_argument("--samples", type=int, default=1_000_000)
    r.add_argument("--param", action="append", metavar="K=V")
    r.add_argument("--format", choices=("csv", "md"), default="csv")
    r.add_argument("--out", default=None)

    c = sub.add_parser("check", help="validate a scenario file")
    c.add_argument("path")

    m = sub.add_parser("compare", help="compare the RCMs of two scenarios (id, path, optionally #rcm)")
    m.add_argument("model_a")
    m.add_argument("model_b")
    m.add_argument("--level", choices=("as", "cross", "single"), required=True)
    m.add_argument("--engine", choices=("exact", "gaussian", "mc"), default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--samples", type=int, default=20_000)
    return p


def _cmd_list() -> int:
    for b in _BUILDERS:
        d = b()
        print(f"{d['id']}\t{d['description']}")
    return EXIT_OK


def _cmd_run(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    report = run(args.scenario, seed=seed, engine=args.engine, n=args.samples, params=_params(args.param))
    text = report.render(args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{report.scenario}: {'PASS' if report.passed else 'FAIL'} ({report.wall_clock:.2f} s)",
          file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_check(args) -> int:
    sc = load_scenario(args.path)
    model = build(sc).model
    print(f"ok: {sc.id} ({len(model.variables)} variables, {len(model.noise)} noises, "
          f"{len(sc.rcm)} RCMs, {len(sc.expectations)} expectations)")
    return EXIT_OK


def _rcm_arg(ref: str):
    src, _, name = ref.partition("#")
    return rcm_of(resolve(src), name or None)


def _cmd_compare(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    a, b = _rcm_arg(args.model_a), _rcm_arg(args.model_b)
    kw = {"budget": args.samples, "seed": seed}
    if args.level != "as":
        kw["engine"] = args.engine
    v = compare(a, b, args.level, **kw)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "verdict", "statistic", "threshold", "p_value", "method", "seeds"])
    w.writerow([v.level.value, v.verdict.value, format(v.statistic, ".10g"), format(v.threshold, ".10g"),
                "" if v.p_value is None else format(v.p_value, ".10g"), v.method.value,
                " ".join(str(s) for s in v.seeds)])
    sys.stdout.write(buf.getvalue())
    if v.witness is not None:
        print(f"witness: {v.witness}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_compare(args)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
