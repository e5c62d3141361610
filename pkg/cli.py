#!/usr/bin/env python3
# cli.py
# -------------------------------------------------------------------
# Command-line entry point for the oblivious-median toolkit:
# - gen / nbp / eval / reduce / roundelim / select: one module operation each
# - sweep: CSV sweeps with optional plotly charts
# - verify: the verification suites, canonical JSON/CSV on stdout
# Exit codes: 0 success, 1 failed check or library error, 2 usage error.
# -------------------------------------------------------------------

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

import bp_core
import hard_instances as hi
import infotools as it
import median_programs as mp
import partition_shell as ps
import reduction as rd
import reports
import selection_baselines as sb
import verify
from config import Settings, configure_logging, load_settings

logger = logging.getLogger(__name__)

NBP_SAMPLED_CHECKS = 1_000
SWEEP_NBP_NS = (4, 8, 16, 32, 64)
SWEEP_RATIO_NS = (64, 128, 256, 512, 1024)
SWEEP_UNIFORMITY_NS = (64, 128, 256, 512, 1024, 2048, 4096)
SWEEP_PASS_NS = (10_000, 100_000)
SWEEP_PASS_SS = (16, 256, 4096)
SWEEP_PASS_SEEDS = 10


class CheckFailed(Exception):
    """A command ran to completion but its check did not hold."""


# =========================
# Argument types
# =========================
def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"Expected a positive integer, got {value}")
    return value


def _scale(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected a number, got {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"--scale must lie in (0, 1], got {value}")
    return value


def _common_options(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--seed", type=int, default=default, help="Root seed for all randomness (default 0)")
    parser.add_argument("--config", default=default, help="Optional KEY=VALUE settings file")
    parser.add_argument("--format", choices=["json", "csv"], default=default, dest="output_format")
    parser.add_argument("--log-level", default=default, help="DEBUG, INFO, WARNING or ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cli", description="Oblivious branching programs and median lower-bound toolkit")
    _common_options(parser, None)
    # the same options after the subcommand; SUPPRESS keeps a value given before it
    common = argparse.ArgumentParser(add_help=False)
    _common_options(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Sample a hard median instance", parents=[common])
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--gamma", type=_positive_int, action="append", default=[], help="Core size per level (repeatable)")
    gen.add_argument("--k", type=_positive_int, required=True)
    gen.add_argument("--levels", type=_positive_int, default=None)
    gen.add_argument("--out", default=None)

    nbp = sub.add_parser("nbp", help="Build the nondeterministic read-once median program", parents=[common])
    nbp.add_argument("--n", type=_positive_int, required=True)
    nbp.add_argument("--count-only", action="store_true")
    nbp.add_argument("--check", action="store_true", help="Compare against the sort oracle")
    nbp.add_argument("--bit", action="store_true", help="MedianBit instead of the median")
    nbp.add_argument("--complement", action="store_true", help="Complement of MedianBit (implies --bit)")
    nbp.add_argument("--out", default=None)

    ev = sub.add_parser("eval", help="Evaluate a program JSON on one input", parents=[common])
    ev.add_argument("--bp", required=True)
    ev.add_argument("--input", type=_int_list, required=True)

    red = sub.add_parser("reduce", help="Simulate an oblivious program as a two-party protocol", parents=[common])
    red.add_argument("--bp", required=True)
    red.add_argument("--k", type=_positive_int, default=1)
    red.add_argument("--small", type=_int_list, default=None, help="Small instance; random when omitted")
    red.add_argument("--transcript", default=None)

    rel = sub.add_parser("roundelim", help="Eliminate the first message of an f^[k] protocol", parents=[common])
    rel.add_argument("--f", choices=["xor"], default="xor")
    rel.add_argument("--k", type=_positive_int, default=8)
    rel.add_argument("--m1", type=int, choices=[0, 1], default=1)
    rel.add_argument("--first", choices=["parity", "x1"], default="parity")
    rel.add_argument("--seeds", type=_positive_int, default=4, help="Shared-coin draws tried per coordinate")
    rel.add_argument("--delta", type=float, default=None, help="Lemma delta (default sqrt(8 ln2 m1 / k))")
    rel.add_argument("--exact", action="store_true", help="Print the errors as exact fractions")

    sel = sub.add_parser("select", help="Run one small-space selection", parents=[common])
    sel.add_argument("--algo", choices=["multipass", "sampling"], required=True)
    sel.add_argument("--n", type=_positive_int, default=None)
    sel.add_argument("--s", type=_positive_int, required=True)
    sel.add_argument("--rank", type=_positive_int, default=None)
    sel.add_argument("--input", default="synthetic", help="'synthetic' or a file with one integer per line")

    sw = sub.add_parser("sweep", help="Write a parameter sweep as CSV", parents=[common])
    sw.add_argument("kind", choices=["nbp-size", "ratio", "passes", "uniformity"])
    sw.add_argument("--out", default=None)
    sw.add_argument("--plot", default=None, help="Write an HTML chart here")
    sw.add_argument("--jobs", type=_positive_int, default=1)

    ver = sub.add_parser("verify", help="Run verification suites", parents=[common])
    ver.add_argument("--suite", choices=["all", *verify.SUITES], default="all")
    ver.add_argument("--report", default=None, help="Markdown report path")
    ver.add_argument("--scale", type=_scale, default=None)
    ver.add_argument("--jobs", type=_positive_int, default=1)
    return parser


# =========================
# Output helpers
# =========================
def _emit(obj, settings: Settings, out: str | None = None) -> None:
    if isinstance(obj, pd.DataFrame):
        text = obj.to_csv(index=False) if settings.output_format == "csv" else obj.to_json(orient="records") + "\n"
    elif settings.output_format == "csv":
        text = pd.json_normalize(obj).to_csv(index=False)
    else:
        text = json.dumps(obj, sort_keys=True, default=str) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        print(f"✅ Wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _load_program(path: str) -> bp_core.BranchingProgram:
    if not Path(path).exists():
        raise FileNotFoundError(f"Program file not found at: {path}")
    return bp_core.from_json(Path(path).read_text(encoding="utf-8"))


# =========================
# Commands
# =========================
def cmd_gen(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    levels = args.levels or max(1, len(args.gamma))
    try:
        params = hi.toy_schedule(args.n, levels, args.k, args.gamma)
    except hi.PairingError as exc:
        parser.error(str(exc))
    pairing = hi.build_pairing(params, args.n)
    instance = hi.sample_instance(pairing, np.random.default_rng(settings.seed), params)
    hi.check_instance(instance)
    _emit(instance.to_dict(), settings, args.out)


def cmd_nbp(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    bit = args.bit or args.complement
    if args.count_only:
        _emit({"n": args.n, "nodes": mp.count_median_nbp_nodes(args.n)}, settings, args.out)
        return
    bp = mp.build_medianbit_nbp(args.n, args.complement) if bit else mp.build_median_nbp(args.n)
    if args.out:
        Path(args.out).write_text(bp_core.to_json(bp), encoding="utf-8")
        print(f"✅ Wrote {len(bp)}-node program to {args.out}", file=sys.stderr)
    if not args.check:
        if not args.out:
            sys.stdout.write(bp_core.to_json(bp) + "\n")
        return

    if args.n <= 4:
        inputs = list(mp.distinct_inputs(args.n))
    else:
        rows = mp.random_distinct_inputs(args.n, NBP_SAMPLED_CHECKS, np.random.default_rng(settings.seed))
        inputs = [tuple(int(v) for v in row) for row in rows]

    def expected(x):
        return (mp.medianbit_oracle(x) ^ int(args.complement)) if bit else mp.median_oracle(x)

    mismatches = sum(1 for x in inputs if bp_core.evaluate_nondeterministic(bp, x) != expected(x))
    _emit({"n": args.n, "nodes": len(bp), "checked": len(inputs), "mismatches": mismatches}, settings)
    if mismatches:
        raise CheckFailed(f"{mismatches} of {len(inputs)} inputs disagree with the sort oracle")
    print(f"✅ {len(inputs)} inputs agree with the sort oracle", file=sys.stderr)


def cmd_eval(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    bp = _load_program(args.bp)
    if bp.deterministic:
        output = bp_core.evaluate_deterministic(bp, args.input)
    else:
        output = bp_core.evaluate_nondeterministic(bp, args.input)
    _emit({"input": args.input, "output": output, "deterministic": bp.deterministic}, settings)


def cmd_reduce(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    bp = _load_program(args.bp)
    oblivious, seq = bp_core.check_oblivious(bp)
    if not oblivious:
        raise rd.ReductionError("reduce needs an oblivious program")
    if len(seq) != args.k * bp.num_inputs:
        raise rd.ReductionError(
            f"Program reads {len(seq)} indices; --k {args.k} needs k*n = {args.k * bp.num_inputs}"
        )
    rng = np.random.default_rng(settings.seed)
    assignment = rd.find_assignment(
        rd.segment_split(seq, args.k, bp.num_inputs), args.k, bp.num_inputs, rng,
        exhaustive_cap=settings.exhaustive_assignment_cap, attempt_cap=settings.assignment_attempt_cap,
    )
    small = args.small
    if small is None:
        small = [int(v) for v in rng.permutation(2 * assignment.N)[: assignment.N] + 1]
    run, direct = rd.run_embedded(bp, assignment, small)
    if args.transcript:
        Path(args.transcript).write_text("\n".join(rd.transcript_lines(run)) + "\n", encoding="utf-8")
    S = math.log2(len(bp))
    agree = run.output == direct
    _emit({
        "assignment": assignment.to_dict(),
        "small": list(small),
        "run": run.to_dict(),
        "direct": direct,
        "agree": agree,
        "within_budget": run.within_budget(args.k, S),
    }, settings)
    if not agree:
        raise CheckFailed(f"Protocol output {run.output} differs from direct evaluation {direct}")


def cmd_roundelim(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    first = "constant" if args.m1 == 0 else args.first
    D = it.DistributionTable.uniform([(x, y) for x in (0, 1) for y in (0, 1)])
    result = it.eliminate_first_message(
        it.xor_index_protocol(args.k, first), it.xor, D, args.k, delta=args.delta, seeds=args.seeds,
        cap=settings.enumeration_cap,
    )
    within = float(result.epsilon_prime) <= float(result.epsilon) + result.delta
    _emit({**result.as_dict(exact=args.exact), "first": first, "within_bound": within}, settings)
    if result.precondition and not within:
        raise CheckFailed(f"eps'={float(result.epsilon_prime):.4f} exceeds eps + delta")


def cmd_select(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    if args.input == "synthetic":
        if args.n is None:
            parser.error("select --input synthetic needs --n")
        record = sb.run_select(args.algo, args.n, args.s, settings.seed, args.rank)
        _emit(record.as_dict(), settings)
        if not record.passed:
            raise CheckFailed(f"{args.algo} returned {record.measured['value']}, not the rank-{args.rank} value")
        return
    reader = sb.StreamReader.from_file(args.input, settings.chunk_size)
    rank = args.rank or (reader.length + 1) // 2
    budget = sb.RegisterBudget(args.s)
    if args.algo == "multipass":
        value = sb.multipass_select(reader, budget, rank)
    else:
        value = sb.sampling_select(reader, budget, rank, np.random.default_rng([settings.seed, reader.length, args.s, 1]))
    _emit({"algo": args.algo, "n": reader.length, "s": args.s, "rank": rank, "value": value,
           "passes": reader.pass_count, "peak_registers": budget.peak}, settings)


def cmd_sweep(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    if args.kind == "nbp-size":
        rows = mp.node_count_table(SWEEP_NBP_NS)
        frame, fig = pd.DataFrame(rows), reports.node_count_figure(rows)
    elif args.kind == "ratio":
        frame = ps.ratio_sweep(SWEEP_RATIO_NS)
        fig = reports.ratio_heatmap(frame, SWEEP_RATIO_NS[-1])
    elif args.kind == "passes":
        config = sb.BenchConfig(ns=SWEEP_PASS_NS, ss=SWEEP_PASS_SS,
                                seeds=tuple(range(settings.seed, settings.seed + SWEEP_PASS_SEEDS)), jobs=args.jobs)
        frame = sb.bench_frame(sb.pass_bench(config))
        fig = reports.pass_chart(frame)
    else:
        frame = ps.uniformity_trend(SWEEP_UNIFORMITY_NS)
        fig = reports.uniformity_figure(frame)
    if args.out:
        reports.write_frame(frame, args.out)
        print(f"✅ Wrote {len(frame)} rows to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(frame.to_csv(index=False))
    if args.plot:
        reports.write_figure(fig, args.plot)


def cmd_verify(args, settings: Settings, parser: argparse.ArgumentParser) -> None:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    scale = args.scale or settings.verify_scale
    records = verify.run_suites(names, settings.seed, scale, args.jobs)
    if settings.output_format == "csv":
        sys.stdout.write(reports.records_to_frame(records).to_csv(index=False))
    else:
        sys.stdout.write(reports.records_to_json(records) + "\n")
    summary = reports.suite_summary(records)
    for row in summary.itertuples(index=False):
        print(f"{row.status} {row.suite}: {row.passed}/{row.checks} checks passed", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(reports.verify_report(records), encoding="utf-8")
    failed = [row.suite for row in summary.itertuples(index=False) if row.passed != row.checks]
    if failed:
        raise CheckFailed(f"Suites with failures: {', '.join(failed)}")


COMMANDS = {
    "gen": cmd_gen,
    "nbp": cmd_nbp,
    "eval": cmd_eval,
    "reduce": cmd_reduce,
    "roundelim": cmd_roundelim,
    "select": cmd_select,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = load_settings(args.config, seed=args.seed, output_format=args.output_format,
                                 log_level=args.log_level)
        configure_logging(settings.log_level)
        logger.info("Running %s with seed %d", args.command, settings.seed)
        COMMANDS[args.command](args, settings, parser)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except CheckFailed as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
