"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 internal
error.  Inputs are never modified in place; every artifact lands under the
directory given by --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .codegen import VARIANTS
from .codegen.kernels import emit_kernels, kernel_file_name
from .errors import DeadlockDetected, FortpipeError, SourceError, UsageError
from .pipeline import (
    Compiled,
    build_graph,
    compile_corpus,
    compile_files,
    host_context,
    run_variant,
    ulp_diff,
)
from .sim import SimConfig, count_accesses, run_pipeline
from .swcorpus import OUTPUT_FIELDS, dump_state, load_params, run_reference
from .analyzer import dump_ir


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return 2 if ex.code not in (0, None) else 0
    if not hasattr(args, "func"):
        parser.print_usage()
        return 2
    try:
        return args.func(args)
    except UsageError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except DeadlockDetected as ex:
        print(f"deadlock: {ex}", file=sys.stderr)
        return 1
    except SourceError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    except FortpipeError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fortpipe",
        description="FORTRAN 77 subset to streaming pipelines, with a "
                    "deterministic channel simulator",
    )
    sub = p.add_subparsers(dest="command")

    def add_common(sp):
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("refactor", help="parse and refactor sources to F95")
    sp.add_argument("inputs", nargs="*", help="fixed-form .f/.for files")
    sp.add_argument("--emit-report", action="store_true")
    add_common(sp)
    sp.set_defaults(func=cmd_refactor)

    sp = sub.add_parser("analyze", help="classify loops and dump the dataflow IR")
    sp.add_argument("inputs", nargs="*")
    sp.add_argument("--config", default=None, help="experiment config (uses the corpus)")
    sp.add_argument("--dump-ir", action="store_true")
    add_common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("compile", help="lower to a pipeline graph and emit kernels")
    sp.add_argument("inputs", nargs="*")
    sp.add_argument("--config", default=None, help="experiment config (uses the corpus)")
    sp.add_argument("--variant", default="smartcache", help="|".join(VARIANTS))
    sp.add_argument("--capacity", type=int, default=None)
    sp.add_argument("--budget", type=int, default=None)
    add_common(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("simulate", help="run one pipeline variant")
    sp.add_argument("inputs", nargs="*", help="sources (default: rendered corpus)")
    sp.add_argument("--config", default=None, help="experiment config JSON")
    sp.add_argument("--variant", default="smartcache")
    sp.add_argument("--capacity", type=int, default=None)
    sp.add_argument("--sched", default="rr", help="rr or random:<seed>")
    sp.add_argument("--max-steps", type=int, default=None)
    sp.add_argument("--dump-report", default=None, help="write SimReport JSON here")
    add_common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="verify variants against the sequential oracle")
    sp.add_argument("--config", required=False, default=None)
    sp.add_argument("--variants", default=",".join(VARIANTS))
    sp.add_argument("--capacity", type=int, default=None)
    sp.add_argument("--tolerance-ulp", type=int, default=0,
                    help="maximum allowed ULP difference (default: bit-exact)")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("metrics", help="closed-form global-access counts per variant")
    sp.add_argument("--config", default=None)
    sp.add_argument("--variants", default=",".join(VARIANTS))
    sp.add_argument("--measure", action="store_true",
                    help="also run the simulator and verify the prediction")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_metrics)

    return p


def _load_inputs(args) -> Compiled:
    if getattr(args, "inputs", None):
        return compile_files(args.inputs)
    config = getattr(args, "config", None)
    if config is None:
        raise UsageError("no input files and no --config experiment given")
    return compile_corpus(load_params(config))


def _require_inputs(args) -> None:
    if not args.inputs:
        raise UsageError("no input files given")


def _sim_config(args) -> SimConfig:
    sched = getattr(args, "sched", "rr")
    seed = None
    if sched.startswith("random"):
        mode = "random"
        if ":" in sched:
            seed = int(sched.split(":", 1)[1])
    elif sched == "rr":
        mode = "rr"
    else:
        raise UsageError(f"unknown scheduler '{sched}' (rr or random:<seed>)")
    kwargs = {"sched": mode, "seed": seed}
    if getattr(args, "capacity", None):
        kwargs["capacity"] = args.capacity
    if getattr(args, "max_steps", None):
        kwargs["max_steps"] = args.max_steps
    return SimConfig(**kwargs)


def _variants_list(args) -> List[str]:
    out = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in out:
        if v not in VARIANTS:
            raise UsageError(f"unknown variant '{v}' (valid: {', '.join(VARIANTS)})")
    if not out:
        raise UsageError("no variants selected")
    return out


def cmd_refactor(args) -> int:
    _require_inputs(args)
    from .refactor import emit_f95

    compiled = compile_files(args.inputs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in emit_f95(compiled.refactored).items():
        (outdir / name).write_text(text)
        print(f"wrote {outdir / name}")
    if args.emit_report:
        path = outdir / "refactor-report.json"
        path.write_text(json.dumps(compiled.report.to_json(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")
    return 0


def cmd_analyze(args) -> int:
    compiled = _load_inputs(args)
    text = dump_ir(compiled.ir)
    if args.dump_ir:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "ir.json").write_text(text)
        print(f"wrote {outdir / 'ir.json'}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_compile(args) -> int:
    compiled = _load_inputs(args)
    graph = build_graph(compiled, args.variant, capacity=args.capacity,
                        budget=args.budget)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / f"graph_{args.variant}.json").write_text(graph.dump())
    print(f"wrote {outdir / f'graph_{args.variant}.json'}")
    for kernel, text in emit_kernels(graph).items():
        path = outdir / kernel_file_name(kernel, args.variant)
        path.write_text(text)
        print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    compiled = _load_inputs(args)
    config = _sim_config(args)
    result, ctx, graph = run_variant(compiled, args.variant, capacity=args.capacity,
                                     config=config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    final = ctx.finish(result.host)
    dumped = dump_state(result.host, [f for f in OUTPUT_FIELDS if f in result.host], outdir)
    for path in dumped:
        print(f"wrote {path}")
    if args.dump_report:
        Path(args.dump_report).write_text(result.report.dump())
        print(f"wrote {args.dump_report}")
    print(f"variant={args.variant} nt={ctx.nt} "
          f"globalAccesses={result.report.total_global_accesses}")
    sums = {k: float(v) for k, v in final.items()
            if isinstance(v, (float, np.floating)) and k.startswith("s")}
    if sums:
        print("host checksums:", json.dumps(sums, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    if args.config is None:
        raise UsageError("compare needs --config (the oracle runs the corpus model)")
    params = load_params(args.config)
    variants = _variants_list(args)
    compiled = compile_corpus(params)
    oracle = run_reference(params)

    rows = []
    worst = 0
    for variant in variants:
        result, ctx, graph = run_variant(compiled, variant, capacity=args.capacity)
        max_abs = 0.0
        max_ulp = 0
        for name in OUTPUT_FIELDS:
            a = result.host[name].astype(np.float64)
            b = oracle[name].astype(np.float64)
            max_abs = max(max_abs, float(np.abs(a - b).max()))
            max_ulp = max(max_ulp, ulp_diff(result.host[name], oracle[name]))
        worst = max(worst, max_ulp)
        rows.append({
            "variant": variant,
            "maxAbsDiff": max_abs,
            "maxUlpDiff": max_ulp,
            "globalReads": result.report.total_global_reads,
            "globalWrites": result.report.total_global_writes,
            "globalAccesses": result.report.total_global_accesses,
            "pass": max_ulp <= args.tolerance_ulp,
        })

    ok = all(r["pass"] for r in rows)
    if args.json:
        print(json.dumps({"rows": rows, "pass": ok}, indent=2, sort_keys=True))
    else:
        hdr = f"{'variant':<14}{'max|diff|':>12}{'ULP':>6}{'g.reads':>12}{'g.writes':>12}{'total':>12}  verdict"
        print(hdr)
        print("-" * len(hdr))
        for r in rows:
            print(f"{r['variant']:<14}{r['maxAbsDiff']:>12.3e}{r['maxUlpDiff']:>6d}"
                  f"{r['globalReads']:>12d}{r['globalWrites']:>12d}"
                  f"{r['globalAccesses']:>12d}  {'PASS' if r['pass'] else 'FAIL'}")
        print(f"overall: {'PASS' if ok else 'FAIL'} (tolerance {args.tolerance_ulp} ULP)")
    return 0 if ok else 1


def cmd_metrics(args) -> int:
    compiled = _load_inputs(args)
    variants = _variants_list(args)
    ctx = host_context(compiled)
    rows = []
    ok = True
    for variant in variants:
        graph = build_graph(compiled, variant)
        predicted = count_accesses(graph, ctx.nt)
        row = {
            "variant": variant,
            "nt": ctx.nt,
            "globalReads": predicted.total_global_reads,
            "globalWrites": predicted.total_global_writes,
            "globalAccesses": predicted.total_global_accesses,
        }
        if args.measure:
            result = run_pipeline(graph, ctx.arrays, ctx.nt, ctx.values)
            meas = {k: c.comparable() for k, c in result.report.per_kernel.items()}
            pred = {k: c.comparable() for k, c in predicted.per_kernel.items()}
            row["measured"] = result.report.total_global_accesses
            row["exactMatch"] = meas == pred
            ok = ok and row["exactMatch"]
        rows.append(row)
    if args.json:
        print(json.dumps({"rows": rows}, indent=2, sort_keys=True))
    else:
        cols = f"{'variant':<14}{'g.reads':>12}{'g.writes':>12}{'total':>12}"
        if args.measure:
            cols += f"{'measured':>12}  exact"
        print(cols)
        print("-" * len(cols))
        for r in rows:
            line = (f"{r['variant']:<14}{r['globalReads']:>12d}"
                    f"{r['globalWrites']:>12d}{r['globalAccesses']:>12d}")
            if args.measure:
                line += f"{r['measured']:>12d}  {'yes' if r['exactMatch'] else 'NO'}"
            print(line)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
