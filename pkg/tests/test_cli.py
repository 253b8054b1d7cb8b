# -*- coding: utf-8 -*-

import io
import json
import os

import clevercsv
import numpy as np
import pytest

from lutpim.cli import (
    BENCH_COLUMNS,
    EXIT_INFEASIBLE,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    main,
    parse_sweep,
    sweep_points,
)
from lutpim.errors import ConfigError

SMALL = ["-M", "8", "-K", "12", "-N", "4", "--num-banks", "4"]


def run_main(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def read_csv(text):
    reader = clevercsv.DictReader(
        io.StringIO(text), delimiter=",", quotechar='"', escapechar=""
    )
    return list(reader)


def test_sizes_json(capsys):
    status, out, _ = run_main(capsys, "sizes", "--b-w", "1", "--b-a", "3")
    assert status == EXIT_OK
    report = json.loads(out)
    assert report["format_version"] == 1
    assert [row["p"] for row in report["rows"]] == list(range(1, 8))
    assert report["rows"][3]["canonical_cols"] == 330
    assert report["run"]["b_o"] == 2


def test_sizes_csv(capsys):
    status, out, _ = run_main(capsys, "--csv", "sizes", "--p-max", "4")
    assert status == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 4
    assert rows[3]["packed_bytes"] == "131072"
    assert float(rows[3]["column_reduction"]) == pytest.approx(12.412, abs=0.01)


def test_gemm_verify(capsys):
    status, out, _ = run_main(capsys, "--verify", "gemm", *SMALL)
    assert status == EXIT_OK
    report = json.loads(out)
    assert report["verify"] == "PASS"
    assert report["output"]["shape"] == [8, 4]
    assert report["run"]["strategy"] == "auto"
    assert report["plan"]["strategy"] in ("canonical_buffer", "slice_stream")
    assert report["result"]["banks"] == 4
    assert report["latency"]["l_d_seconds"] == 1.36e-9


def test_gemm_is_reproducible(capsys):
    argv = ["--seed", "7", "gemm", "-s", "slice_stream", "-p", "3"] + SMALL
    _, first, _ = run_main(capsys, *argv)
    _, second, _ = run_main(capsys, *argv)
    assert first == second
    assert json.loads(first)["run"]["seed"] == 7

    _, other, _ = run_main(capsys, "--seed", "8", *argv[2:])
    assert json.loads(other)["output"]["md5"] != json.loads(first)["output"]["md5"]


def test_bench_is_reproducible(capsys):
    argv = ["--seed", "3", "bench", *SMALL, "--sweep", "strategy=naive_mac,slice_stream"]
    _, first, _ = run_main(capsys, *argv)
    _, second, _ = run_main(capsys, *argv)
    assert first == second


def test_gemm_fixed_strategies_agree(capsys):
    digests = set()
    for strategy in ("naive_mac", "packed_buffer", "canonical_runtime", "slice_stream"):
        status, out, _ = run_main(capsys, "gemm", "-s", strategy, "-p", "3", *SMALL)
        assert status == EXIT_OK
        digests.add(json.loads(out)["output"]["md5"])
    assert len(digests) == 1


def test_gemm_mismatch_exits_one(capsys, monkeypatch):
    monkeypatch.setattr(
        "lutpim.cli.gemm_reference",
        lambda W, A, wt, at: np.ones((W.rows, A.cols), dtype=np.int32) * -1,
    )
    status, out, _ = run_main(capsys, "--verify", "gemm", *SMALL)
    assert status == EXIT_MISMATCH
    assert json.loads(out)["verify"] == "FAIL"


def test_gemm_output_file(capsys, tmp_path):
    path = str(tmp_path / "report.json")
    status, out, _ = run_main(capsys, "-o", path, "gemm", *SMALL)
    assert status == EXIT_OK
    assert out == ""
    with open(path) as fp:
        assert json.load(fp)["output"]["shape"] == [8, 4]


def test_plan_w4a4(capsys):
    status, out, _ = run_main(
        capsys, "plan", "-M", "3072", "-K", "768", "-N", "768", "--b-w", "4", "--b-a", "4"
    )
    assert status == EXIT_OK
    plan = json.loads(out)["plan"]
    assert plan["p_star"] == 3
    assert plan["strategy"] == "slice_stream"
    assert json.loads(out)["run"]["p"] == 3


def test_plan_csv(capsys):
    status, out, _ = run_main(capsys, "--csv", "plan", "--b-w", "4", "--b-a", "4")
    assert status == EXIT_OK
    assert [row["p"] for row in read_csv(out)] == ["1", "2", "3"]


def test_infeasible_device(capsys, write_config):
    path = write_config({"device": {"buffer_bytes": 0}})
    status, _, err = run_main(capsys, "--config", path, "gemm", *SMALL)
    assert status == EXIT_INFEASIBLE
    assert "Infeasible" in err


def test_config_run_section(capsys, write_config):
    path = write_config({"run": {"M": 2, "K": 4, "N": 3, "strategy": "naive_mac"}})
    status, out, _ = run_main(capsys, "--config", path, "gemm", "-N", "5")
    assert status == EXIT_OK
    report = json.loads(out)
    assert report["output"]["shape"] == [2, 5]
    assert report["run"]["config_path"] == path


def test_missing_config(capsys, tmp_path):
    status, _, err = run_main(
        capsys, "--config", str(tmp_path / "nope.json"), "gemm", *SMALL
    )
    assert status == EXIT_USAGE
    assert "not found" in err


def test_file_tables_need_tables(capsys):
    status, _, _ = run_main(capsys, "gemm", "--tables", "file", *SMALL)
    assert status == EXIT_USAGE


def test_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["gemm", "--strategy", "fastest"])
    assert excinfo.value.code == EXIT_USAGE


def test_bench_strategies(capsys):
    status, out, _ = run_main(
        capsys,
        "bench",
        "-M", "8", "-K", "8", "-N", "4", "--num-banks", "1",
        "--sweep", "strategy=packed_dram,packed_buffer",
        "--sweep", "p=2",
    )
    assert status == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0].keys()) == BENCH_COLUMNS
    assert [r["strategy"] for r in rows] == ["packed_dram", "packed_buffer"]
    assert all(r["status"] == "ok" for r in rows)
    dram, buffered = (float(r["modeled_time_s"]) for r in rows)
    assert buffered < dram
    assert rows[0]["output_md5"] == rows[1]["output_md5"]


def test_bench_k_limits_p(capsys):
    status, out, _ = run_main(
        capsys,
        "bench",
        "-M", "4", "-K", "6", "-N", "2", "--b-w", "4", "--b-a", "4",
        "-s", "slice_stream",
        "--sweep", "k=1..3",
    )
    assert status == EXIT_OK
    assert [r["p"] for r in read_csv(out)] == ["3", "3", "2"]


def test_bench_failures_are_rows(capsys):
    status, out, _ = run_main(
        capsys, "bench", *SMALL, "-s", "packed_buffer", "--sweep", "p=2,7"
    )
    assert status == EXIT_OK
    rows = read_csv(out)
    assert [r["status"] for r in rows] == ["ok", "CapacityExceeded"]


def test_bench_empty_sweep(capsys):
    status, out, _ = run_main(capsys, "bench")
    assert status == EXIT_OK
    assert out.strip().splitlines() == [",".join(BENCH_COLUMNS)]


def test_bench_bad_sweep(capsys):
    status, _, _ = run_main(capsys, "bench", "--sweep", "colour=red")
    assert status == EXIT_USAGE


def test_parse_sweep():
    sweep = parse_sweep(["p=1..3", "strategy=packed_dram, slice_stream", "p=none,2"])
    assert sweep["p"] == [None, 2]
    assert sweep["strategy"] == ["packed_dram", "slice_stream"]
    assert parse_sweep(["M=4..6"])["M"] == [4, 5, 6]
    with pytest.raises(ConfigError):
        parse_sweep(["M=four"])
    with pytest.raises(ConfigError):
        parse_sweep(["M"])
    points = list(sweep_points({"M": [1, 2], "p": [3, 4]}))
    assert points[1] == {"M": 1, "p": 4}
    assert len(points) == 4


def test_run_config_tables():
    weight, act = RunConfig(tables="symmetric").code_tables()
    assert weight.values == (-1, 1)
    with pytest.raises(ConfigError):
        RunConfig(tables="file").code_tables()


def test_selftest_single_check(capsys):
    status, out, _ = run_main(capsys, "selftest", "--check", "perm_round_trip")
    assert status == EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith("PASS perm_round_trip")
    assert lines[-1] == "All ok."


def test_selftest_json(capsys):
    status, out, _ = run_main(capsys, "--json", "selftest", "--check", "sizes")
    assert status == EXIT_OK
    report = json.loads(out)
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == ["sizes"]


def test_build(capsys, tmp_path):
    outdir = str(tmp_path / "luts")
    status, out, _ = run_main(
        capsys, "build", "--b-w", "1", "--b-a", "3", "-p", "3", "-d", outdir
    )
    assert status == EXIT_OK
    report = json.loads(out)
    names = sorted(f["file"] for f in report["files"])
    assert names == [
        "W1A3_p3_canonical.lut",
        "W1A3_p3_packed.lut",
        "W1_p3_reordering.lut",
    ]
    for name in names:
        assert os.path.exists(os.path.join(outdir, name))


def test_build_default_p(capsys, tmp_path):
    status, out, _ = run_main(
        capsys, "build", "--kind", "canonical", "-d", str(tmp_path)
    )
    assert status == EXIT_OK
    report = json.loads(out)
    assert report["run"]["p"] == 4
    assert report["files"][0]["header"]["kind"] == "canonical"
