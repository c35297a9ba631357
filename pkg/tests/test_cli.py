import csv
import json

import numpy as np
import pytest

import ddae_kit as dk
from ddae_kit.cli import main

from gen import example_advanced, example_neutral, example_slow_smoothing


def write_problem(tmp_path, sys_, name="problem.json"):
    path = tmp_path / name
    dk.dump_problem(sys_, path)
    return str(path)


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestProblemFile:
    def test_round_trip_bit_identical(self, tmp_path):
        sys_ = example_advanced()
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        dk.dump_problem(sys_, p1)
        sys_2 = dk.load_problem(p1)
        dk.dump_problem(sys_2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_complex_round_trip(self, tmp_path):
        f = dk.PiecewisePolynomial.zero(1, 0.0, 1.0, complex_field=True)
        phi = dk.PiecewisePolynomial.constant([1.0 + 2.0j], -1.0, 0.0)
        sys_ = dk.DdaeSystem(E=[[1.0 + 0j]], A=[[-1.0 + 0.5j]], D=[[0.0j]],
                             tau=1.0, horizon_intervals=1, f=f, phi=phi)
        p1 = tmp_path / "c.json"
        dk.dump_problem(sys_, p1)
        data = read_json(p1)
        assert data["field"] == "complex"
        sys_2 = dk.load_problem(p1)
        assert np.allclose(sys_2.A, sys_.A)
        assert np.allclose(sys_2.phi.evaluate(-0.5), [1.0 + 2.0j])

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"dimension": 1}')
        with pytest.raises(dk.MalformedProblem):
            dk.load_problem(str(path))

    def test_shape_mismatch_rejected(self, tmp_path):
        sys_ = example_neutral()
        data = dk.problem_to_dict(sys_)
        data["E"] = [[0.0, 0.0]]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        with pytest.raises(dk.MalformedProblem):
            dk.load_problem(str(path))


class TestAnalyzeCommand:
    def test_neutral_example_report(self, tmp_path):
        problem = write_problem(tmp_path, example_neutral())
        out = str(tmp_path / "report.json")
        assert main(["analyze", problem, out]) == 0
        report = read_json(out)
        assert report["schema"] == "ddae-kit/1"
        assert report["decomposition"]["index"] == 1
        assert report["propagation"]["kind"] == "discontinuity_invariant"
        assert report["legacy"] == "neutral"
        assert report["cross_check"] is True
        assert report["history_checks"]["admissible"] is True

    def test_advanced_example_report(self, tmp_path):
        problem = write_problem(tmp_path, example_advanced())
        out = str(tmp_path / "report.json")
        assert main(["analyze", problem, out]) == 0
        report = read_json(out)
        assert report["decomposition"]["index"] == 2
        assert report["propagation"]["kind"] == "de_smoothing"
        assert report["propagation"]["first_violating_k"] == 1
        assert report["legacy"] == "advanced"

    def test_smoothing_example_report(self, tmp_path):
        problem = write_problem(tmp_path, example_slow_smoothing())
        out = str(tmp_path / "report.json")
        assert main(["analyze", problem, out]) == 0
        report = read_json(out)
        assert report["propagation"]["kind"] == "smoothing"
        assert report["propagation"]["nu_D"] == 1
        assert report["hidden_delays"]["nu_D"] == 1
        assert report["hidden_delays"]["delays"] == [1.0, 2.0]

    def test_exit_code_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        out = str(tmp_path / "report.json")
        assert main(["analyze", str(path), out]) == 4

    def test_exit_code_singular(self, tmp_path):
        sys_ = example_neutral()
        data = dk.problem_to_dict(sys_)
        data["E"] = [[0.0]]
        data["A"] = [[0.0]]
        path = tmp_path / "singular.json"
        path.write_text(json.dumps(data))
        out = str(tmp_path / "report.json")
        assert main(["analyze", str(path), out]) == 3


class TestSolveCommand:
    def test_neutral_solution_csv(self, tmp_path):
        problem = write_problem(tmp_path, example_neutral())
        out_csv = str(tmp_path / "traj.csv")
        out_ledger = str(tmp_path / "ledger.json")
        assert main(["solve", problem, out_csv, out_ledger]) == 0
        with open(out_csv) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["side"] == "R"
        assert rows[-1]["side"] == "L"
        for row in rows:
            t = float(row["t"])
            def oracle(s):
                while s > 0:
                    return -oracle(s - 1) - 1.0
                return s
            assert float(row["x_1"]) == pytest.approx(oracle(t), abs=1e-10)
        ledger = read_json(out_ledger)
        knots = {e["knot_index"]: e for e in ledger["knots"]}
        for i in (1, 2, 3):
            assert knots[i]["first_jump_order"] == 1
            assert knots[i]["jump_norm"] == pytest.approx(2.0, abs=1e-8)

    def test_knots_emitted_twice(self, tmp_path):
        problem = write_problem(tmp_path, example_neutral())
        out_csv = str(tmp_path / "traj.csv")
        out_ledger = str(tmp_path / "ledger.json")
        main(["solve", problem, out_csv, out_ledger])
        with open(out_csv) as fh:
            rows = list(csv.DictReader(fh))
        at_one = [r for r in rows if abs(float(r["t"]) - 1.0) < 1e-12]
        sides = sorted(r["side"] for r in at_one)
        assert sides == ["L", "R"]

    def test_complex_field_csv(self, tmp_path):
        a = -0.4 + 1.1j
        f = dk.PiecewisePolynomial.constant([0.5 + 0.0j], 0.0, 2.0)
        phi = dk.PiecewisePolynomial.constant([1.0 + 0.5j], -1.0, 0.0)
        sys_ = dk.DdaeSystem(E=[[1.0 + 0j]], A=[[a]], D=[[0.0j]], tau=1.0,
                             horizon_intervals=2, f=f, phi=phi)
        problem = write_problem(tmp_path, sys_, "complex.json")
        out_csv = str(tmp_path / "traj.csv")
        out_ledger = str(tmp_path / "ledger.json")
        assert main(["solve", problem, out_csv, out_ledger]) == 0
        with open(out_csv) as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0].keys()) == {"t", "x_1_re", "x_1_im", "side"}
        x0 = 1.0 + 0.5j
        c = 0.5
        for row in rows[:20]:
            t = float(row["t"])
            expected = np.exp(a * t) * (x0 + c / a) - c / a
            assert float(row["x_1_re"]) == pytest.approx(expected.real, abs=1e-10)
            assert float(row["x_1_im"]) == pytest.approx(expected.imag, abs=1e-10)

    def test_on_inconsistent_stop_writes_nothing(self, tmp_path):
        problem = write_problem(tmp_path, example_advanced())
        out_csv = tmp_path / "traj.csv"
        out_ledger = tmp_path / "ledger.json"
        code = main([
            "solve", problem, str(out_csv), str(out_ledger),
            "--on-inconsistent", "stop",
        ])
        assert code == 2
        assert not out_csv.exists()
        assert not out_ledger.exists()

    def test_advanced_exit_code_two(self, tmp_path):
        problem = write_problem(tmp_path, example_advanced())
        out_csv = str(tmp_path / "traj.csv")
        out_ledger = str(tmp_path / "ledger.json")
        assert main(["solve", problem, out_csv, out_ledger]) == 2
        ledger = read_json(out_ledger)
        last = ledger["knots"][-1]
        assert last["inconsistent_restart"] is True
        assert last["time"] == pytest.approx(3.0)
        assert last["jump_norm"] == pytest.approx(2.0, abs=1e-8)
        # partial trajectory still written
        with open(out_csv) as fh:
            rows = list(csv.DictReader(fh))
        assert max(float(r["t"]) for r in rows) == pytest.approx(3.0)


class TestStabilityCommand:
    def test_scalar_retarded(self, tmp_path):
        phi = dk.PiecewisePolynomial.constant([1.0], -1.0, 0.0)
        f = dk.PiecewisePolynomial.zero(1, 0.0, 2.0)
        sys_ = dk.DdaeSystem(E=[[1.0]], A=[[-2.0]], D=[[1.0]], tau=1.0,
                             horizon_intervals=2, f=f, phi=phi)
        problem = write_problem(tmp_path, sys_)
        out = str(tmp_path / "stab.json")
        assert main(["stability", problem, out]) == 0
        report = read_json(out)
        assert report["alpha"] == pytest.approx(-0.4428544010, abs=1e-6)
        assert report["verdict"] == "stable"

    def test_de_smoothing_verdict(self, tmp_path):
        problem = write_problem(tmp_path, example_advanced())
        out = str(tmp_path / "stab.json")
        assert main(["stability", problem, out, "--grid", "40"]) == 0
        report = read_json(out)
        assert report["verdict"] == "inconclusive_de_smoothing"

    def test_custom_box(self, tmp_path):
        problem = write_problem(tmp_path, example_neutral())
        out = str(tmp_path / "stab.json")
        code = main([
            "stability", problem, out,
            "--re-min", "-5", "--re-max", "3", "--im-max", "40", "--grid", "60",
        ])
        assert code == 0
        report = read_json(out)
        assert report["box"]["re_max"] == 3.0
        assert report["alpha"] == pytest.approx(0.0, abs=1e-8)


class TestOtherCommands:
    def test_hidden_delays_smoothing(self, tmp_path):
        problem = write_problem(tmp_path, example_slow_smoothing())
        out = str(tmp_path / "hd.json")
        assert main(["hidden-delays", problem, out]) == 0
        report = read_json(out)
        assert report["applicable"] is True
        assert report["nu_D"] == 1
        assert report["delays"] == [1.0, 2.0]
        assert report["D"] == [[[0.0]], [[1.0]]]

    def test_hidden_delays_not_applicable(self, tmp_path):
        problem = write_problem(tmp_path, example_neutral())
        out = str(tmp_path / "hd.json")
        assert main(["hidden-delays", problem, out]) == 0
        assert read_json(out)["applicable"] is False

    def test_check_history(self, tmp_path):
        problem = write_problem(tmp_path, example_slow_smoothing())
        out = str(tmp_path / "hist.json")
        assert main(["check-history", problem, out]) == 0
        report = read_json(out)
        assert report["admissible"] is True
        assert report["smooth_c1"] is False
        assert report["kappa_observed"] == 0

    def test_probe_writes_history_fragment(self, tmp_path):
        problem = write_problem(tmp_path, example_slow_smoothing())
        out = str(tmp_path / "probe.json")
        assert main([
            "probe", problem, out, "--order", "2", "--side", "slow",
            "--target", "1.0",
        ]) == 0
        report = read_json(out)
        pieces = report["history"]
        assert pieces[0]["start"] == pytest.approx(-1.0)
        assert pieces[-1]["end"] == pytest.approx(0.0)
        # the fragment is itself a valid history: splice it into the problem
        data = read_json(problem)
        data["history"] = pieces
        patched = tmp_path / "patched.json"
        patched.write_text(json.dumps(data))
        out2 = str(tmp_path / "hist2.json")
        assert main(["check-history", str(patched), out2]) == 0
        rep2 = read_json(out2)
        assert rep2["admissible"] is True
        assert rep2["smooth_c1"] is True
