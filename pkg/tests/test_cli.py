import json
from pathlib import Path

from pytest import fixture

import tjpy_sampled_control.cli as mut

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / f"{name}.json")


def printed_value(output: str, key: str) -> float:
    for line in output.splitlines():
        if line.startswith(f"{key} = "):
            return float(line[len(key) + 3:])
    raise AssertionError(f"{key} not printed in {output!r}")


@fixture
def explosive_model(tmp_path) -> str:
    path = tmp_path / "explosive.json"
    path.write_text(json.dumps({"name": "explosive", "n": 1, "A": [[200.0]], "diffusion": [], "B_bar": [[0.0]],
                                "x0": [1.0]}))
    return str(path)


class TestBound:

    def test_generic(self, capsys):
        code = mut.main(["bound", "--generic", "--alpha1", "1", "--alpha2", "0", "--alphat2", "2",
                         "--q", "0.3678794"])
        assert code == mut.EXIT_OK
        assert abs(printed_value(capsys.readouterr().out, "tau_max") - 0.5) < 1e-6

    def test_single_v(self, capsys):
        code = mut.main(["bound", "--single-v", "--alpha", "1", "--alpha-b", "1", "--alpha-f", "1"])
        assert code == mut.EXIT_OK
        output = capsys.readouterr().out
        assert abs(printed_value(output, "tau_max") - 0.0772) < 1e-4
        assert abs(printed_value(output, "b1_star") - 0.6767) < 1e-4

    def test_two_v(self, capsys):
        code = mut.main(["bound", "--two-v", "--alpha", "4.3957", "--alpha-b", "241.9335", "--gamma1", "1.2491",
                         "--gamma2", "60.5024"])
        assert code == mut.EXIT_OK
        assert abs(printed_value(capsys.readouterr().out, "tau_max") - 0.0116) < 1e-4

    def test_dta(self, capsys):
        code = mut.main(["bound", "--dta", "--c-bar", "0.5", "--h", "0.01", "--alpha-u", "1", "--alpha-b", "1",
                         "--alpha-f", "1"])
        assert code == mut.EXIT_OK
        assert printed_value(capsys.readouterr().out, "tau_max") > 0

    def test_constants_file(self, tmp_path, capsys):
        constants = tmp_path / "constants.json"
        constants.write_text(json.dumps({"alpha_bar": 1, "alpha_b": 1, "alpha_f": 1}))
        out = tmp_path / "bound.json"
        assert mut.main(["bound", "--single-v", "--constants", str(constants), "--out", str(out)]) == mut.EXIT_OK
        report = mut.load_report(out)
        assert report.command == "bound"
        assert abs(report.results["bound"]["tau_max"] - 0.0772) < 1e-4
        assert str(constants) in report.inputs
        assert report.argv[0] == "bound"

    def test_flags_override_constants_file(self, tmp_path, capsys):
        constants = tmp_path / "constants.json"
        constants.write_text(json.dumps({"alpha_bar": 5, "alpha_b": 1, "alpha_f": 1}))
        assert mut.main(["bound", "--single-v", "--constants", str(constants), "--alpha", "1"]) == mut.EXIT_OK
        assert abs(printed_value(capsys.readouterr().out, "tau_max") - 0.0772) < 1e-4

    def test_unknown_constant(self, tmp_path, capsys):
        constants = tmp_path / "constants.json"
        constants.write_text(json.dumps({"alpha": 1}))
        assert mut.main(["bound", "--single-v", "--constants", str(constants)]) == mut.EXIT_INPUT
        assert "unknown constant 'alpha'" in capsys.readouterr().err

    def test_missing_constant(self, capsys):
        assert mut.main(["bound", "--single-v", "--alpha", "1"]) == mut.EXIT_INPUT
        assert "--single-v needs --alpha-b, --alpha-f" in capsys.readouterr().err

    def test_without_mode(self, capsys):
        assert mut.main(["bound", "--alpha", "1"]) == mut.EXIT_INPUT

    def test_non_positive_constant(self, capsys):
        assert mut.main(["bound", "--single-v", "--alpha", "-1", "--alpha-b", "1", "--alpha-f", "1"]) \
            == mut.EXIT_INPUT

    def test_condition_violated(self, capsys):
        code = mut.main(["bound", "--generic", "--alpha1", "1", "--alpha2", "1", "--alphat2", "1", "--beta2", "1"])
        assert code == mut.EXIT_INFEASIBLE
        assert "impulse condition fails" in capsys.readouterr().err

    def test_json_format(self, capsys):
        code = mut.main(["bound", "--single-v", "--alpha", "1", "--alpha-b", "1", "--alpha-f", "1", "--format", "json",
                         "--seed", "3", "--tol", "0.1"])
        assert code == mut.EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["command"] == "bound"
        assert abs(report["results"]["bound"]["tau_max"] - 0.0772) < 1e-4


class TestVerify:

    def test_first_subsystem_passes(self, capsys):
        code = mut.main(["verify", "--model", fixture_path("loop_a"), "--cert", fixture_path("loop_a_certificate")])
        assert code == mut.EXIT_OK
        output = capsys.readouterr().out
        assert "PASS" in output.splitlines()
        assert abs(printed_value(output, "tau_max") - 0.0116) < 1e-4

    def test_design_certificate_passes(self, capsys):
        code = mut.main(["verify", "--model", fixture_path("loop_a_control"), "--cert",
                         fixture_path("loop_a_design_certificate")])
        assert code == mut.EXIT_OK
        assert "PASS" in capsys.readouterr().out.splitlines()

    def test_planar_passes(self, capsys):
        code = mut.main(["verify", "--model", fixture_path("planar"), "--cert", fixture_path("planar_certificate")])
        assert code == mut.EXIT_OK
        assert abs(printed_value(capsys.readouterr().out, "tau_max") - 0.0175) < 1e-4

    def test_inflated_decay_rate_fails(self, tmp_path, capsys):
        data = json.loads((FIXTURES / "loop_a_certificate.json").read_text())
        data["alpha_bar"] *= 1.5
        cert = tmp_path / "inflated.json"
        cert.write_text(json.dumps(data))
        code = mut.main(["verify", "--model", fixture_path("loop_a"), "--cert", str(cert)])
        assert code == mut.EXIT_NEGATIVE
        output = capsys.readouterr().out
        assert "FAIL" in output.splitlines()
        assert "tau_max" not in output

    def test_from_report(self, tmp_path, capsys):
        out = tmp_path / "verify.json"
        assert mut.main(["verify", "--model", fixture_path("loop_b"), "--cert", fixture_path("loop_b_certificate"),
                         "--out", str(out)]) == mut.EXIT_OK
        assert mut.main(["verify", "--from-report", str(out)]) == mut.EXIT_OK
        report = mut.load_report(out)
        assert report.results["passed"] is True
        assert [m["name"] for m in report.results["margins"]][0] == "lyapunov-ito"

    def test_missing_certificate(self, capsys):
        assert mut.main(["verify", "--model", fixture_path("loop_a")]) == mut.EXIT_INPUT
        assert "verify needs --model and --cert" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        code = mut.main(["verify", "--model", str(tmp_path / "absent.json"), "--cert",
                         fixture_path("loop_a_certificate")])
        assert code == mut.EXIT_INPUT

    def test_malformed_certificate(self, tmp_path, capsys):
        cert = tmp_path / "broken.json"
        cert.write_text("{not json")
        assert mut.main(["verify", "--model", fixture_path("loop_a"), "--cert", str(cert)]) == mut.EXIT_INPUT


class TestDesign:

    def test_design_then_verify(self, tmp_path, capsys):
        cert = tmp_path / "design_certificate.json"
        out = tmp_path / "design.json"
        code = mut.main(["design", "--model", fixture_path("loop_a_control"), "--first-feasible",
                         "--cert-out", str(cert), "--out", str(out)])
        assert code == mut.EXIT_OK
        assert printed_value(capsys.readouterr().out, "tau_max") > 0
        report = mut.load_report(out)
        assert report.results["model"]["K_hat"] == report.results["gain"]
        assert mut.main(["verify", "--model", fixture_path("loop_a_control"), "--cert", str(cert)]) == mut.EXIT_OK

    def test_free_c_tilde_with_diffusion(self, capsys):
        code = mut.main(["design", "--model", fixture_path("loop_a_control"), "--c-tilde", "free"])
        assert code == mut.EXIT_INPUT
        assert "c_tilde" in capsys.readouterr().err

    def test_malformed_c_tilde(self, capsys):
        for text in ("sweep:", "sweep:1,x", "large"):
            assert mut.main(["design", "--model", fixture_path("loop_a_control"), "--c-tilde", text]) \
                == mut.EXIT_INPUT


class TestSimulate:

    def test_certified_loop(self, tmp_path, capsys):
        trajectories = tmp_path / "trajectories.csv"
        statistics = tmp_path / "statistics.csv"
        out = tmp_path / "simulate.json"
        code = mut.main(["simulate", "--model", fixture_path("loop_a"), "--schedule", "periodic:0.01",
                         "--paths", "20", "--horizon", "1", "--stride", "10", "--seed", "3",
                         "--trajectories", str(trajectories), "--statistics", str(statistics), "--out", str(out)])
        assert code == mut.EXIT_OK
        assert "diverged paths: 0 of 20" in capsys.readouterr().out
        assert trajectories.read_text().startswith("t,path,x1,x2\n")
        assert statistics.read_text().startswith("t,mean_sq_norm,n_alive\n")
        results = mut.load_report(out).results
        assert results["ms_decay"]["rate"] < 0
        assert results["schedule"] == "periodic:0.01"
        assert abs(results["dt_sim"] - 0.001) < 1e-15

    def test_gain_from_certificate(self, tmp_path, capsys):
        code = mut.main(["simulate", "--model", fixture_path("loop_a_control"), "--cert",
                         fixture_path("loop_a_design_certificate"), "--schedule", "periodic:0.01",
                         "--paths", "5", "--horizon", "0.5"])
        assert code == mut.EXIT_OK

    def test_divergence(self, explosive_model, capsys):
        code = mut.main(["simulate", "--model", explosive_model, "--schedule", "periodic:0.1", "--paths", "4",
                         "--horizon", "10"])
        assert code == mut.EXIT_NEGATIVE
        output = capsys.readouterr().out
        assert "diverged paths: 4 of 4" in output
        assert "note: all 4 paths diverged" in output

    def test_design_mode_model_needs_certificate(self, capsys):
        code = mut.main(["simulate", "--model", fixture_path("loop_a_control"), "--schedule", "periodic:0.01"])
        assert code == mut.EXIT_INPUT
        assert "pass --cert" in capsys.readouterr().err

    def test_malformed_schedule(self, capsys):
        assert mut.main(["simulate", "--model", fixture_path("loop_a"), "--schedule", "weekly"]) == mut.EXIT_INPUT

    def test_wrong_initial_state(self, capsys):
        code = mut.main(["simulate", "--model", fixture_path("loop_a"), "--schedule", "periodic:0.01",
                         "--x0", "1,2,3"])
        assert code == mut.EXIT_INPUT
        assert "x0" in capsys.readouterr().err


class TestReport:

    def test_merge(self, tmp_path, capsys):
        bound = tmp_path / "bound.json"
        verify = tmp_path / "verify.json"
        curve = tmp_path / "curve.csv"
        table = tmp_path / "table.csv"
        mut.main(["bound", "--single-v", "--alpha", "1", "--alpha-b", "1", "--alpha-f", "1", "--out", str(bound)])
        mut.main(["verify", "--model", fixture_path("loop_a"), "--cert", fixture_path("loop_a_certificate"),
                  "--out", str(verify)])
        capsys.readouterr()
        code = mut.main(["report", str(bound), str(verify), "--curve", str(curve), "--table", str(table)])
        assert code == mut.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "report,command,model,tau_max,gain_norm,decay_rate"
        assert lines[1].startswith(f"{str(bound)},bound,,0.077")
        assert lines[2].startswith(f"{str(verify)},verify,loop-a,0.011")
        assert table.read_text().splitlines() == lines
        curve_lines = curve.read_text().splitlines()
        assert curve_lines[0] == "report,q,tau"
        assert len(curve_lines) == 201

    def test_json_format(self, tmp_path, capsys):
        bound = tmp_path / "bound.json"
        mut.main(["bound", "--generic", "--alpha1", "1", "--alpha2", "0", "--alphat2", "2", "--q", "0.3678794",
                  "--out", str(bound)])
        capsys.readouterr()
        assert mut.main(["report", str(bound), "--format", "json"]) == mut.EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert rows[0]["command"] == "bound"
        assert abs(rows[0]["tau_max"] - 0.5) < 1e-6

    def test_no_reports(self, capsys):
        assert mut.main(["report"]) == mut.EXIT_INPUT
        assert "at least one run report" in capsys.readouterr().err

    def test_not_a_report(self, tmp_path, capsys):
        path = tmp_path / "other.json"
        path.write_text(json.dumps([1, 2]))
        assert mut.main(["report", str(path)]) == mut.EXIT_INPUT
