import csv
import json
import statistics

import pytest

from dqaoa.cli import main
from dqaoa.experiments import (
    CYCLE_COLUMNS,
    PROFILE_COLUMNS,
    SWEEP_COLUMNS,
    ProblemSpec,
    ReferenceUnavailable,
    resolve_num_sub,
    resolve_reference,
)
from dqaoa.formats import read_problem
from dqaoa.qubo import QuboProblem, brute_force_solve, generate_dense_qubo

QUICK = ["--shots", "32", "--budget", "10"]


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, row)) for row in reader]


def solve(tmp_path, *extra, out="run"):
    argv = ["solve", "--problem", "dense:12:0", "--strategy", "random", "--sub-size", "4", "--num-sub", "3",
            "--trials", "2", "--max-cycles", "8", "--out", str(tmp_path / out), *QUICK, *extra]
    return main(argv)


class TestGenerate:
    def test_dense_full_density(self, tmp_path, capsys):
        assert main(["generate", "dense", "--n", "300", "--seed", "0", "--out", str(tmp_path / "d.qubo")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n"] == 300
        assert summary["density_pct"] == 100.0
        assert read_problem(tmp_path / "d.qubo").n == 300

    def test_maxcut_quarter_density(self, tmp_path, capsys):
        assert main(["generate", "maxcut", "--n", "100", "--out", str(tmp_path / "g.maxcut")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["edges"] == 1237
        assert summary["density_pct"] == pytest.approx(25.0, abs=0.1)

    @pytest.mark.parametrize("kind", ["dense", "maxcut"])
    def test_byte_identical(self, kind, tmp_path):
        for name in ("a", "b"):
            main(["generate", kind, "--n", "40", "--seed", "3", "--out", str(tmp_path / name)])
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_unwritable_path(self, tmp_path):
        assert main(["generate", "dense", "--n", "4", "--out", str(tmp_path / "missing" / "x.qubo")]) == 2


class TestSolve:
    def test_single_row(self, tmp_path):
        assert main(["solve", "--problem", "dense:10", "--strategy", "ifd", "--sub-size", "4", "--num-sub", "2",
                     "--trials", "1", "--max-cycles", "1", "--out", str(tmp_path), *QUICK]) == 0
        header, rows = read_csv(tmp_path / "cycles_ifd.csv")
        assert header == list(CYCLE_COLUMNS)
        assert header == ["trial", "cycle", "energy", "ar_pct", "t_decompose_ms", "t_solve_ms",
                          "t_aggregate_ms", "accepted"]
        assert len(rows) == 1

    def test_summary_recomputable_from_csv(self, tmp_path):
        assert solve(tmp_path, "--trials", "3") == 0
        _, rows = read_csv(tmp_path / "run" / "cycles_random.csv")
        summary = json.loads((tmp_path / "run" / "summary.json").read_text())
        (camp,) = summary["campaigns"]
        finals = {}
        for r in rows:
            finals[int(r["trial"])] = float(r["ar_pct"])
        assert camp["final_ar_pct_mean"] == pytest.approx(statistics.fmean(finals.values()), abs=1e-9)
        assert camp["final_ar_pct_std"] == pytest.approx(statistics.stdev(finals.values()), abs=1e-9)
        for col in ("t_decompose_ms", "t_solve_ms", "t_aggregate_ms"):
            assert camp[f"{col}_mean"] == pytest.approx(statistics.fmean(float(r[col]) for r in rows), abs=1e-9)
        assert camp["converged_trials"] + camp["censored_trials"] == 3
        _, ref = brute_force_solve(generate_dense_qubo(12, 0))
        assert summary["reference_energy"] == pytest.approx(ref)

    def test_reproducible_modulo_timings(self, tmp_path):
        solve(tmp_path, out="a")
        solve(tmp_path, out="b")
        strip = [c for c in CYCLE_COLUMNS if not c.endswith("_ms")]
        a = [[r[c] for c in strip] for r in read_csv(tmp_path / "a" / "cycles_random.csv")[1]]
        b = [[r[c] for c in strip] for r in read_csv(tmp_path / "b" / "cycles_random.csv")[1]]
        assert a == b

    def test_energy_trace_non_increasing(self, tmp_path):
        solve(tmp_path)
        _, rows = read_csv(tmp_path / "run" / "cycles_random.csv")
        for t in {r["trial"] for r in rows}:
            e = [float(r["energy"]) for r in rows if r["trial"] == t]
            assert all(b <= a for a, b in zip(e, e[1:]))

    def test_two_strategies_and_plan(self, tmp_path):
        plan = tmp_path / "plan.json"
        assert solve(tmp_path, "--strategy", "random,pfs", "--trials", "1", "--dump-plan", str(plan)) == 0
        assert (tmp_path / "run" / "cycles_pfs.csv").exists()
        plans = json.loads(plan.read_text())
        assert [p["strategy"] for p in plans] == ["random", "pfs"]
        assert all(len(p["index_sets"]) == 3 for p in plans)

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"problem": "dense:10:1", "strategy": "ifd", "sub_size": 3, "num_sub": 2,
                                   "trials": 1, "max_cycles": 2, "shots": 16, "budget": 5,
                                   "out": str(tmp_path / "fromfile")}))
        assert main(["solve", "--config", str(cfg), "--max-cycles", "1"]) == 0
        _, rows = read_csv(tmp_path / "fromfile" / "cycles_ifd.csv")
        assert len(rows) == 1
        summary = json.loads((tmp_path / "fromfile" / "summary.json").read_text())
        assert summary["settings"]["max_cycles"] == 1
        assert summary["settings"]["sub_size"] == 3

    def test_file_problem(self, tmp_path):
        main(["generate", "maxcut", "--n", "16", "--out", str(tmp_path / "g.maxcut")])
        assert main(["solve", "--problem", str(tmp_path / "g.maxcut"), "--strategy", "bfs", "--sub-size", "4",
                     "--num-sub", "25%", "--trials", "1", "--max-cycles", "2", "--out", str(tmp_path / "o"),
                     *QUICK]) == 0
        plan_rows = read_csv(tmp_path / "o" / "cycles_bfs.csv")[1]
        assert len(plan_rows) == 2

    @pytest.mark.parametrize("argv", [
        ["solve", "--strategy", "ifd"],
        ["solve", "--problem", "dense:10", "--strategy", "magic"],
        ["solve", "--problem", "dense:10", "--sub-size", "20"],
        ["solve", "--problem", "nope.qubo"],
        ["solve", "--problem", "dense:30", "--reference", "brute", "--sub-size", "4", "--num-sub", "2"],
        ["solve", "--problem", "dense:10", "--reference", "5", "--trials", "0"],
    ])
    def test_config_errors_exit_1(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path)]) == 1

    def test_bad_config_file(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        assert main(["solve", "--config", str(tmp_path / "bad.json")]) == 1
        (tmp_path / "keys.json").write_text(json.dumps({"problem": "dense:8", "colour": "red"}))
        assert main(["solve", "--config", str(tmp_path / "keys.json")]) == 1

    def test_output_dir_is_a_file_exits_2(self, tmp_path):
        (tmp_path / "taken").write_text("")
        assert solve(tmp_path, out="taken") == 2


class TestSweepAndProfile:
    def test_sweep_percent_and_skips(self, tmp_path):
        assert main(["sweep", "--problem", "dense:20", "--strategy", "ifd", "--sub-size", "4,16",
                     "--num-sub", "15%,50%", "--workers", "1", "--trials", "1", "--max-cycles", "2",
                     "--out", str(tmp_path), *QUICK]) == 0
        header, rows = read_csv(tmp_path / "sweep.csv")
        assert header == list(SWEEP_COLUMNS)
        # k=16 with m=10 needs 25 ranked variables; only that cell is skipped
        cells = {(r["sub_size"], r["num_sub"]) for r in rows}
        assert cells == {("4", "3"), ("4", "10"), ("16", "3")}
        assert all(len(r) == len(SWEEP_COLUMNS) for r in rows)

    def test_profile(self, tmp_path):
        assert main(["profile", "--problem", "dense:20", "--sizes", "20,40", "--strategy", "ifd",
                     "--sub-size", "4", "--num-sub", "5", "--trials", "1", "--max-cycles", "1",
                     "--reference", "-1", "--out", str(tmp_path), *QUICK]) == 0
        header, rows = read_csv(tmp_path / "profile.csv")
        assert header == list(PROFILE_COLUMNS)
        assert [r["n"] for r in rows] == ["20", "40"]
        for r in rows:
            phases = [float(r[c]) for c in ("t_decompose_ms", "t_solve_ms", "t_aggregate_ms")]
            assert min(phases) >= 0
            assert sum(phases) <= float(r["t_cycle_ms"]) + 1e-6


class TestExperimentHelpers:
    def test_problem_spec(self):
        spec = ProblemSpec.parse("maxcut:30:4")
        assert (spec.kind, spec.n, spec.seed) == ("maxcut", 30, 4)
        assert spec.with_n(50).n == 50
        assert ProblemSpec.parse("dense:8").load().n == 8

    @pytest.mark.parametrize("value, n, expected", [("25%", 100, 25), ("15%", 60, 9), (7, 60, 7), ("50%", 3, 2), ("1%", 3, 1)])
    def test_num_sub(self, value, n, expected):
        assert resolve_num_sub(value, n) == expected

    def test_reference_modes(self):
        q = generate_dense_qubo(10, 0)
        assert resolve_reference(q, "auto").method == "brute"
        assert resolve_reference(q, "auto").energy == brute_force_solve(q)[1]
        assert resolve_reference(q, "-3.5").energy == -3.5
        assert resolve_reference(generate_dense_qubo(30, 0), "auto").method == "sa"
        with pytest.raises(ReferenceUnavailable):
            resolve_reference(generate_dense_qubo(30, 0), "brute")

    def test_non_negative_reference_shift(self):
        ref = resolve_reference(QuboProblem([[1.0]]), "auto")
        assert ref.energy == 0.0
        assert ref.energy - ref.shift < 0


@pytest.mark.slow
def test_sweep_workers_wall_time(tmp_path):
    # timing smoke test: needs at least 8 free cores to hold
    assert main(["sweep", "--problem", "dense:60:0", "--strategy", "ifd", "--sub-size", "12", "--num-sub", "30",
                 "--workers", "1,2,4,8", "--trials", "1", "--max-cycles", "5", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep.csv")
    wall = {int(r["workers"]): float(r["wall_s"]) for r in rows}
    assert sorted(wall) == [1, 2, 4, 8]
    assert wall[8] < wall[1], f"wall time by workers: {wall}"
