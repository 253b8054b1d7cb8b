# -*- coding: utf-8 -*-

"""
Command line front end.

    python -m lutpim [--config FILE] [--seed N] [--json|--csv] [--verify] [-v]
                     {sizes,build,gemm,plan,bench,selftest} ...

Every report embeds the fully resolved run configuration and a format
version, so a report can be reproduced from itself. Exit codes: 0 on
success, 1 when a verification or self-test fails, 2 when the problem does
not fit the device, 3 on usage and configuration errors.

License: See the LICENSE file.

"""

import argparse
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import os
import sys

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import clevercsv
import numpy as np

from . import __version__
from .config import device_from_config, load_config
from .cost_model import make_plan
from .engine import COUNTERS, Strategy, gemm_reference
from .errors import (
    CapacityExceeded,
    ConfigError,
    DegenerateTile,
    InfeasibleP,
    LutPimError,
)
from .lut_builder import (
    DEFAULT_ENTRY_BYTES,
    KIND_CANONICAL,
    KIND_PACKED,
    KIND_REORDERING,
    LAYOUT_COLUMN,
    LAYOUT_ROW,
    build_canonical_lut,
    build_packed_lut,
    build_reordering_lut,
    compute_sizes,
)
from .lut_io import md5sum, read_header, serialize_lut
from .pim_sim import max_feasible_for, plan_tiling, simulate
from .quantizer import CodeMatrix, CodeTable
from .selftest import CHECKS, run_selftest

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 3

TABLE_MODES = ["unsigned", "symmetric", "file"]

SIZE_COLUMNS = [
    "p",
    "b_w",
    "b_a",
    "b_o",
    "rows",
    "packed_cols",
    "canonical_cols",
    "reordering_cols",
    "reordering_entry_bytes",
    "packed_bytes",
    "canonical_bytes",
    "reordering_bytes",
    "symmetric_packed_bytes",
    "column_reduction",
    "total_reduction",
]

TIME_COLUMNS = [
    "slice_time_s",
    "lookup_time_s",
    "reorder_time_s",
    "dram_lookup_time_s",
    "mac_time_s",
    "modeled_time_s",
    "wall_time_s",
]

BENCH_COLUMNS = (
    ["point", "strategy", "resolved_strategy", "M", "K", "N", "b_w", "b_a", "b_o"]
    + ["p", "k", "num_banks", "status", "message"]
    + list(COUNTERS)
    + TIME_COLUMNS
    + ["output_md5"]
)

SWEEP_KEYS = {
    "M": int,
    "K": int,
    "N": int,
    "b_w": int,
    "b_a": int,
    "b_o": int,
    "p": lambda v: None if v.lower() == "none" else int(v),
    "k": int,
    "num_banks": int,
    "strategy": lambda v: str(Strategy(v)),
}


@dataclass(frozen=True)
class RunConfig:
    M: int = 64
    K: int = 64
    N: int = 64
    b_w: int = 1
    b_a: int = 3
    b_o: int = DEFAULT_ENTRY_BYTES
    strategy: str = "auto"
    p: Optional[int] = None
    k: int = 1
    seed: int = 0
    config_path: Optional[str] = None
    tables: str = "unsigned"
    weight_table: Optional[dict] = None
    act_table: Optional[dict] = None

    def code_tables(self):
        if self.tables == "unsigned":
            return CodeTable.unsigned(self.b_w), CodeTable.unsigned(self.b_a)
        if self.tables == "symmetric":
            return CodeTable.symmetric(self.b_w), CodeTable.symmetric(self.b_a)
        if self.weight_table is None or self.act_table is None:
            raise ConfigError(
                "table mode 'file' needs run.weight_table and run.act_table"
            )
        weight = CodeTable.from_dict(self.weight_table)
        act = CodeTable.from_dict(self.act_table)
        if (weight.bitwidth, act.bitwidth) != (self.b_w, self.b_a):
            raise ConfigError(
                "code tables are W%dA%d but the run is W%dA%d"
                % (weight.bitwidth, act.bitwidth, self.b_w, self.b_a)
            )
        return weight, act

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _add_problem_args(parser):
    parser.add_argument("-M", type=int, help="Rows of W")
    parser.add_argument("-K", type=int, help="Inner dimension")
    parser.add_argument("-N", type=int, help="Columns of A")
    _add_bitwidth_args(parser)
    parser.add_argument("-k", type=int, help="Slices resident in the buffer")
    parser.add_argument("--tables", choices=TABLE_MODES, help="Code table mode")
    parser.add_argument("--num-banks", type=int, help="Override device banks")


def _add_bitwidth_args(parser):
    parser.add_argument("--b-w", dest="b_w", type=int, help="Weight bits")
    parser.add_argument("--b-a", dest="b_a", type=int, help="Activation bits")
    parser.add_argument(
        "--b-o", dest="b_o", type=int, choices=[1, 2, 4, 8], help="Entry bytes"
    )


def parse_args(argv=None):
    parser = ArgumentParser(
        prog="lutpim", description="LUT-based low-bit GEMM on a PIM model"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="Configuration file (json)")
    parser.add_argument("--seed", type=int, help="Seed for random matrices")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    parser.add_argument(
        "--verify", help="Check the output against the reference", action="store_true"
    )
    parser.add_argument("-o", "--output", help="Write the report to this file")
    parser.add_argument(
        "-v", "--verbose", help="Enable verbose mode", action="store_true"
    )
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    sizes = commands.add_parser("sizes", help="Table sizes per packing degree")
    _add_bitwidth_args(sizes)
    sizes.add_argument("--p-max", type=int, default=7, help="Largest p")

    build = commands.add_parser("build", help="Build and write lookup tables")
    _add_bitwidth_args(build)
    build.add_argument("-p", type=int, help="Packing degree")
    build.add_argument("--tables", choices=TABLE_MODES, help="Code table mode")
    build.add_argument(
        "--kind",
        choices=[KIND_PACKED, KIND_CANONICAL, KIND_REORDERING, "all"],
        default="all",
    )
    build.add_argument(
        "--layout", choices=[LAYOUT_ROW, LAYOUT_COLUMN], default=LAYOUT_ROW
    )
    build.add_argument("-d", "--output-dir", default=".", help="Output directory")

    gemm = commands.add_parser("gemm", help="Run one GEMM on the simulator")
    _add_problem_args(gemm)
    gemm.add_argument("-s", "--strategy", choices=[str(s) for s in Strategy])
    gemm.add_argument("-p", type=int, help="Packing degree")
    gemm.add_argument("--jobs", type=int, default=1, help="Concurrent banks")
    gemm.add_argument(
        "--per-bank", action="store_true", help="Include per-bank reports"
    )

    plan = commands.add_parser("plan", help="Cost model plan for a problem")
    _add_problem_args(plan)

    bench = commands.add_parser("bench", help="Sweep parameters into a CSV")
    _add_problem_args(bench)
    bench.add_argument("-s", "--strategy", choices=[str(s) for s in Strategy])
    bench.add_argument("-p", type=int, help="Packing degree")
    bench.add_argument(
        "--sweep",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="Swept parameter, values as a list or a range A..B",
    )
    bench.add_argument("--jobs", type=int, default=1, help="Concurrent points")

    selftest = commands.add_parser("selftest", help="Run the built-in checks")
    selftest.add_argument(
        "--check", action="append", choices=sorted(CHECKS), help="Check to run"
    )
    return parser.parse_args(argv)


def resolve_run_config(args, data=None):
    """Merge defaults, the config file's run section and the flags."""
    values = {}
    values.update((data or {}).get("run", {}))
    for name in ("M", "K", "N", "b_w", "b_a", "b_o", "strategy", "p", "k", "tables"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if args.seed is not None:
        values["seed"] = args.seed
    values["config_path"] = args.config
    try:
        run = RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err))
    if run.k < 1:
        raise ConfigError("k must be at least 1, got %d" % run.k)
    return run


def resolve_device(args, data=None):
    data = dict(data or {})
    if getattr(args, "num_banks", None) is not None:
        data["device"] = dict(data.get("device", {}), num_banks=args.num_banks)
    return device_from_config(data)


def output_md5(output):
    return hashlib.md5(np.ascontiguousarray(output, dtype="<i4").tobytes()).hexdigest()


def _dump_json(obj):
    return json.dumps(obj, indent="\t", sort_keys=False) + "\n"


def _dump_csv(rows, columns):
    fp = io.StringIO()
    writer = clevercsv.DictWriter(fp, fieldnames=columns)
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _csv_value(row.get(c)) for c in columns})
    return fp.getvalue()


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _header(run, device=None):
    out = {"format_version": FORMAT_VERSION, "run": run.to_dict()}
    if device is not None:
        out["device"] = device.to_dict()
        out["latency"] = device.consts.to_dict()
    return out


def cmd_sizes(args, data, log):
    run = resolve_run_config(args, data)
    rows = []
    for p in range(1, args.p_max + 1):
        log("Computing sizes for p=%d" % p)
        rows.append(compute_sizes(run.b_w, run.b_a, p, run.b_o).to_dict())
    if args.fmt == "csv":
        return EXIT_OK, _dump_csv(rows, SIZE_COLUMNS)
    report = _header(run)
    report["rows"] = rows
    return EXIT_OK, _dump_json(report)


def lut_filename(kind, b_w, b_a, p):
    if kind == KIND_REORDERING:
        return "W%d_p%d_%s.lut" % (b_w, p, kind)
    return "W%dA%d_p%d_%s.lut" % (b_w, b_a, p, kind)


def build_tables(run, p, kinds, output_dir, layout=LAYOUT_ROW, log=None):
    """Build and write the requested tables, returns ``{filename: md5}``."""
    log = log or (lambda *a, **kw: None)
    weight_table, act_table = run.code_tables()
    builders = {
        KIND_PACKED: lambda: build_packed_lut(weight_table, act_table, p, run.b_o),
        KIND_CANONICAL: lambda: build_canonical_lut(
            weight_table, act_table, p, run.b_o
        ),
        KIND_REORDERING: lambda: build_reordering_lut(run.b_w, p),
    }
    os.makedirs(output_dir, exist_ok=True)
    checksums = {}
    for kind in kinds:
        fname = lut_filename(kind, run.b_w, run.b_a, p)
        path = os.path.join(output_dir, fname)
        log("Building %s ... " % fname, end="", flush=True)
        serialize_lut(builders[kind](), path, layout=layout)
        checksums[fname] = md5sum(path)
        log("ok", flush=True)
    return checksums


def cmd_build(args, data, log):
    run = resolve_run_config(args, data)
    device = resolve_device(args, data)
    p = run.p
    if p is None:
        p = max_feasible_for(Strategy.CANONICAL_BUFFER, run.b_w, run.b_a, run.b_o, device)
        if p is None:
            raise InfeasibleP("no packing degree fits the local buffer")
    run = run.replace(p=p)
    kinds = [KIND_PACKED, KIND_CANONICAL, KIND_REORDERING]
    if args.kind != "all":
        kinds = [args.kind]
    checksums = build_tables(run, p, kinds, args.output_dir, args.layout, log)
    report = _header(run)
    report["files"] = []
    for fname, md5 in checksums.items():
        header = read_header(os.path.join(args.output_dir, fname))
        report["files"].append({"file": fname, "md5": md5, "header": header.to_dict()})
    return EXIT_OK, _dump_json(report)


def run_point(run, device, jobs=1, verify=False):
    """Simulate one configuration, returns (output, plan, sim, verified)."""
    weight_table, act_table = run.code_tables()
    rng = np.random.default_rng(run.seed)
    W = CodeMatrix.random(run.M, run.K, run.b_w, rng)
    A = CodeMatrix.random(run.K, run.N, run.b_a, rng)
    plan = plan_tiling(
        run.M,
        run.K,
        run.N,
        run.p,
        run.k,
        run.strategy,
        device,
        b_w=run.b_w,
        b_a=run.b_a,
        b_o=run.b_o,
    )
    output, sim = simulate(plan, W, A, weight_table, act_table, device, jobs=jobs)
    verified = None
    if verify:
        verified = bool(
            np.array_equal(output, gemm_reference(W, A, weight_table, act_table))
        )
    return output, plan, sim, verified


def cmd_gemm(args, data, log):
    run = resolve_run_config(args, data)
    device = resolve_device(args, data)
    log("Running %s on %dx%dx%d" % (run.strategy, run.M, run.K, run.N))
    output, plan, sim, verified = run_point(run, device, args.jobs, args.verify)
    run = run.replace(p=plan.p)

    report = _header(run, device)
    report["tiling"] = plan.to_dict()
    if plan.cost_plan is not None:
        report["plan"] = plan.cost_plan.to_dict()
    report["result"] = sim.to_dict(include_banks=args.per_bank)
    report["output"] = {"shape": [run.M, run.N], "md5": output_md5(output)}
    status = EXIT_OK
    if verified is not None:
        report["verify"] = "PASS" if verified else "FAIL"
        log("Verification: %s" % report["verify"])
        if not verified:
            status = EXIT_MISMATCH
    if args.fmt == "csv":
        row = _bench_row(0, run, device, plan, sim, output)
        return status, _dump_csv([row], BENCH_COLUMNS)
    return status, _dump_json(report)


def cmd_plan(args, data, log):
    run = resolve_run_config(args, data)
    device = resolve_device(args, data)
    plan = make_plan(run.M, run.K, run.N, run.b_w, run.b_a, run.b_o, device, k=run.k)
    log("Planned %s with p=%d" % (plan.strategy, plan.p))
    if args.fmt == "csv":
        columns = ["p", "slice_time_s", "objective", "streamable", "buffer_resident"]
        return EXIT_OK, _dump_csv(plan.table, columns)
    report = _header(run.replace(strategy=str(plan.strategy), p=plan.p), device)
    report["plan"] = plan.to_dict()
    return EXIT_OK, _dump_json(report)


def _parse_values(key, text):
    convert = SWEEP_KEYS[key]
    if ".." in text:
        lo, hi = text.split("..", 1)
        return [convert(str(v)) for v in range(int(lo), int(hi) + 1)]
    return [convert(v.strip()) for v in text.split(",") if v.strip()]


def parse_sweep(items):
    """``["p=1..3", "strategy=packed_dram,packed_buffer"]`` to ordered lists."""
    sweep = {}
    for item in items:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or key not in SWEEP_KEYS:
            raise ConfigError(
                "sweep items look like KEY=V1,V2 with KEY in %s, got %r"
                % (", ".join(SWEEP_KEYS), item)
            )
        try:
            sweep[key] = _parse_values(key, text)
        except ValueError as err:
            raise ConfigError("bad values for %s: %s" % (key, err))
    return sweep


def sweep_points(sweep):
    keys = list(sweep)
    for values in itertools.product(*(sweep[k] for k in keys)):
        yield dict(zip(keys, values))


def _bench_row(index, run, device, plan=None, sim=None, output=None):
    row = {
        "point": index,
        "strategy": run.strategy,
        "M": run.M,
        "K": run.K,
        "N": run.N,
        "b_w": run.b_w,
        "b_a": run.b_a,
        "b_o": run.b_o,
        "p": run.p,
        "k": run.k,
        "num_banks": device.num_banks,
        "status": "ok",
        "message": "",
    }
    if plan is not None:
        row["resolved_strategy"] = str(plan.strategy)
        row["p"] = plan.p
    if sim is not None:
        row.update(sim.aggregate.counters())
        row.update(sim.aggregate.breakdown)
        row["modeled_time_s"] = sim.aggregate.modeled_time_s
        row["wall_time_s"] = sim.wall_time_s
    if output is not None:
        row["output_md5"] = output_md5(output)
    return row


def run_bench(base, device, sweep, jobs=1, verify=False):
    """One row per sweep point, in sweep order; failures go to ``status``."""
    points = list(sweep_points(sweep)) if sweep else []

    def run_one(item):
        index, point = item
        point = dict(point)
        num_banks = point.pop("num_banks", None)
        dev = device if num_banks is None else device.replace(num_banks=num_banks)
        run = base.replace(**point)
        try:
            output, plan, sim, verified = run_point(run, dev, verify=verify)
        except LutPimError as err:
            row = _bench_row(index, run, dev)
            row["status"] = type(err).__name__
            row["message"] = str(err)
            return row
        row = _bench_row(index, run, dev, plan, sim, output)
        if verified is False:
            row["status"] = "mismatch"
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_one, enumerate(points)))
    return [run_one(item) for item in enumerate(points)]


def cmd_bench(args, data, log):
    run = resolve_run_config(args, data)
    device = resolve_device(args, data)
    sweep = parse_sweep(args.sweep)
    log("Sweeping %s" % ", ".join("%s=%s" % kv for kv in sweep.items()))
    rows = run_bench(run, device, sweep, jobs=args.jobs, verify=args.verify)
    failed = sum(1 for r in rows if r["status"] != "ok")
    log("%d points, %d failed" % (len(rows), failed))
    status = EXIT_OK
    if any(r["status"] == "mismatch" for r in rows):
        status = EXIT_MISMATCH
    if args.fmt == "json":
        report = _header(run, device)
        report["sweep"] = sweep
        report["columns"] = BENCH_COLUMNS
        report["rows"] = rows
        return status, _dump_json(report)
    return status, _dump_csv(rows, BENCH_COLUMNS)


def cmd_selftest(args, data, log):
    results = run_selftest(args.check)
    status = EXIT_OK if all(r.passed for r in results) else EXIT_MISMATCH
    if args.fmt == "json":
        report = {
            "format_version": FORMAT_VERSION,
            "passed": status == EXIT_OK,
            "checks": [r.to_dict() for r in results],
        }
        return status, _dump_json(report)
    lines = []
    for r in results:
        if r.passed:
            lines.append("PASS %s (%.2fs)" % (r.name, r.seconds))
        else:
            lines.append("FAIL %s: %s" % (r.name, r.message))
    lines.append("All ok." if status == EXIT_OK else "Self-test failed.")
    return status, "\n".join(lines) + "\n"


COMMANDS = {
    "sizes": cmd_sizes,
    "build": cmd_build,
    "gemm": cmd_gemm,
    "plan": cmd_plan,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv=None):
    args = parse_args(argv)

    log = lambda *a, **kw: print(*a, file=sys.stderr, **kw) if args.verbose else None
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )

    try:
        data = load_config(args.config) if args.config else None
        status, text = COMMANDS[args.command](args, data, log)
    except (InfeasibleP, CapacityExceeded, DegenerateTile) as err:
        print("Infeasible: %s" % err, file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LutPimError, ValueError) as err:
        print("Error: %s" % err, file=sys.stderr)
        return EXIT_USAGE

    if args.output:
        with open(args.output, "w") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)
    return status
