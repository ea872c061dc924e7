"""CLI contract: subcommands, exit codes, determinism, file outputs."""

import functools
import json
import math

import numpy as np
import pytest

from obsentropy import bounds, cli, measurement_distance, qmat
from obsentropy.bounds import ConvexStateSet
from obsentropy.qmat import ConvergenceError
from tests.conftest import projective_povm


@pytest.fixture
def files(tmp_path):
    """Standard fixture files for a qutrit instance."""
    gen = qmat.trial_rng(8, 0)
    paths = {}
    rho = qmat.random_density(3, 3, gen)
    sigma = qmat.random_density(3, 2, gen)
    m = qmat.random_povm(3, 4, gen)
    n = qmat.random_povm(3, 2, gen)
    chi = ConvexStateSet.hull([np.eye(3) / 3, qmat.random_density(3, 3, gen)])
    for name, obj in (("rho", qmat.matrix_to_json(rho)),
                      ("sigma", qmat.matrix_to_json(sigma)),
                      ("m", qmat.povm_to_json(m)),
                      ("n", qmat.povm_to_json(n)),
                      ("chi", chi.to_json())):
        p = tmp_path / f"{name}.json"
        qmat.save_json(obj, str(p))
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEntropyCommand:
    def test_prints_breakdown(self, files, capsys):
        code, out, _ = _run(capsys, "entropy", "--state", files["rho"], "--povm", files["m"])
        assert code == 0
        obj = json.loads(out)
        assert {"total", "shannon_term", "boltzmann_term", "probs", "volumes"} <= set(obj)
        assert abs(obj["total"] - (obj["shannon_term"] + obj["boltzmann_term"])) < 1e-9

    def test_log_base_two_rescales(self, files, capsys):
        _, out_e, _ = _run(capsys, "entropy", "--state", files["rho"], "--povm", files["m"])
        _, out_2, _ = _run(capsys, "entropy", "--state", files["rho"], "--povm", files["m"],
                           "--log-base", "2")
        nats = json.loads(out_e)
        bits = json.loads(out_2)
        assert abs(bits["total"] - nats["total"] / math.log(2)) < 1e-9
        assert bits["probs"] == nats["probs"]

    def test_missing_file_exits_two(self, files, capsys):
        code, _, err = _run(capsys, "entropy", "--state", "/nope.json", "--povm", files["m"])
        assert code == 2
        assert "error" in err

    def test_incomplete_povm_exits_two_citing_completeness(self, files, tmp_path, capsys):
        bad = json.load(open(files["m"]))
        bad["elements"][0]["entries"][0][0][0] += 0.3
        badp = tmp_path / "bad.json"
        qmat.save_json(bad, str(badp))
        code, _, err = _run(capsys, "entropy", "--state", files["rho"], "--povm", str(badp))
        assert code == 2
        assert "completeness" in err


class TestCertifyCommand:
    def test_afw_passes(self, files, capsys):
        code, out, _ = _run(capsys, "certify", "--kind", "afw", "--povm", files["m"],
                            "--state", files["rho"], "--sigma", files["sigma"])
        assert code == 0
        obj = json.loads(out)
        assert obj["bound_kind"] == "afw" and obj["status"] == "ok"

    def test_identical_states_slack_equals_rhs(self, files, capsys):
        code, out, _ = _run(capsys, "certify", "--kind", "naive", "--povm", files["m"],
                            "--state", files["rho"], "--sigma", files["rho"])
        assert code == 0
        obj = json.loads(out)
        assert obj["slack"] == obj["bound_rhs"]

    def test_concavity(self, files, capsys):
        code, out, _ = _run(capsys, "certify", "--kind", "concavity", "--povm", files["m"],
                            "--states", files["rho"], files["sigma"],
                            "--weights", "0.4,0.6")
        assert code == 0
        assert json.loads(out)["bound_kind"] == "concavity"

    def test_conditional_needs_dims(self, files, capsys):
        code, _, err = _run(capsys, "certify", "--kind", "conditional",
                            "--povm", files["m"], "--state", files["rho"],
                            "--sigma", files["sigma"])
        assert code == 2
        assert "--dims" in err

    def test_conditional(self, tmp_path, capsys):
        gen = qmat.trial_rng(9, 0)
        ma = tmp_path / "ma.json"
        ra = tmp_path / "ra.json"
        sa = tmp_path / "sa.json"
        qmat.save_json(qmat.povm_to_json(qmat.random_povm(2, 3, gen)), str(ma))
        qmat.save_json(qmat.matrix_to_json(qmat.random_density(4, 4, gen)), str(ra))
        qmat.save_json(qmat.matrix_to_json(qmat.random_density(4, 2, gen)), str(sa))
        code, out, _ = _run(capsys, "certify", "--kind", "conditional", "--povm", str(ma),
                            "--state", str(ra), "--sigma", str(sa), "--dims", "2,2")
        assert code == 0
        obj = json.loads(out)
        assert obj["dim"] == 4
        assert abs(obj["kappa"] - math.log(2)) < 1e-9

    def test_set_distance_and_restricted(self, files, capsys):
        for args in (("--kind", "set_distance", "--povm", files["m"]),
                     ("--kind", "restricted", "--povms", files["m"], files["n"])):
            code, out, _ = _run(capsys, "certify", *args, "--chi", files["chi"],
                                "--state", files["rho"], "--sigma", files["sigma"],
                                "--tolerance", "1e-6")
            assert code == 0, out

    def test_violation_exits_one(self, files, capsys, monkeypatch):
        broken = bounds.BoundReport(quantity_lhs=2.0, bound_rhs=1.0, slack=-1.0,
                                    epsilon=0.5, dim=3, kappa=1.0, bound_kind="afw")
        monkeypatch.setattr(bounds, "certify_oe_continuity", lambda *a, **k: broken)
        code, out, _ = _run(capsys, "certify", "--kind", "afw", "--povm", files["m"],
                            "--state", files["rho"], "--sigma", files["sigma"])
        assert code == 1
        assert json.loads(out)["slack"] == -1.0

    def test_precondition_failure_exits_two(self, tmp_path, capsys):
        # infinite divergence for rho only: not a bound violation, a bad premise
        m = projective_povm(2)
        chi = ConvexStateSet.singleton(np.diag([0.0, 1.0]).astype(complex))
        paths = {}
        for name, obj in (("m", qmat.povm_to_json(m)), ("chi", chi.to_json()),
                          ("rho", qmat.matrix_to_json(np.diag([1.0, 0.0]))),
                          ("sigma", qmat.matrix_to_json(np.diag([0.0, 1.0])))):
            p = tmp_path / f"p_{name}.json"
            qmat.save_json(obj, str(p))
            paths[name] = str(p)
        code, out, err = _run(capsys, "certify", "--kind", "set_distance",
                              "--povm", paths["m"], "--chi", paths["chi"],
                              "--state", paths["rho"], "--sigma", paths["sigma"])
        assert code == 2
        assert json.loads(out)["status"] == "failed_precondition"
        assert "precondition" in err

    def test_log_base_two_scales_entropic_fields(self, files, capsys):
        _, out_e, _ = _run(capsys, "certify", "--kind", "afw", "--povm", files["m"],
                           "--state", files["rho"], "--sigma", files["sigma"])
        _, out_2, _ = _run(capsys, "certify", "--kind", "afw", "--povm", files["m"],
                           "--state", files["rho"], "--sigma", files["sigma"],
                           "--log-base", "2")
        nats, bits = json.loads(out_e), json.loads(out_2)
        assert abs(bits["kappa"] - nats["kappa"] / math.log(2)) < 1e-9
        assert bits["epsilon"] == nats["epsilon"]


class TestFuzzCommand:
    def test_basic_run(self, tmp_path, capsys):
        out_csv = tmp_path / "c.csv"
        code, out, _ = _run(capsys, "fuzz", "--seed", "4", "--trials", "6",
                            "--dims", "2,3", "--kinds", "afw,concavity",
                            "--output", str(out_csv))
        assert code == 0
        obj = json.loads(out)
        assert obj["rows"] == 12 and obj["violations"] == 0
        assert out_csv.read_text().splitlines()[0] == "seed,d,epsilon,lhs,rhs,slack,kind"

    def test_byte_identical_reruns(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, jobs in ((a, "1"), (b, "3")):
            code, _, _ = _run(capsys, "fuzz", "--seed", "21", "--trials", "5",
                              "--dims", "2,3,4", "--kinds", "afw,naive",
                              "--output", str(path), "--jobs", jobs)
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_toml_config_with_flag_override(self, tmp_path, capsys):
        cfgp = tmp_path / "c.toml"
        cfgp.write_text('seed = 13\ntrials = 4\ndims = [2]\n'
                        f'bound_kinds = ["afw"]\noutput_path = "{tmp_path}/t.csv"\n')
        code, out, _ = _run(capsys, "fuzz", "--config", str(cfgp), "--trials", "2")
        assert code == 0
        assert json.loads(out)["rows"] == 2

    def test_env_seed_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("OENTROPY_SEED", "77")
        code, out, _ = _run(capsys, "fuzz", "--trials", "2",
                            "--output", str(tmp_path / "e.csv"))
        assert code == 0
        assert open(tmp_path / "e.csv").read().splitlines()[1].startswith("77,")

    def test_missing_seed_exits_two(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("OENTROPY_SEED", raising=False)
        code, _, err = _run(capsys, "fuzz", "--trials", "2")
        assert code == 2
        assert "seed" in err

    def test_bad_config_exits_two(self, tmp_path, capsys):
        cfgp = tmp_path / "bad.toml"
        cfgp.write_text("seed = 1\nnot_a_field = true\n")
        code, _, err = _run(capsys, "fuzz", "--config", str(cfgp))
        assert code == 2
        assert "not_a_field" in err

    def test_violation_exits_one_and_writes_witness(self, tmp_path, capsys, monkeypatch):
        broken = bounds.BoundReport(quantity_lhs=2.0, bound_rhs=1.0, slack=-1.0,
                                    epsilon=0.5, dim=2, kappa=0.7, bound_kind="afw")
        monkeypatch.setattr(bounds, "certify_oe_continuity", lambda *a, **k: broken)
        out_csv = tmp_path / "v.csv"
        code, out, _ = _run(capsys, "fuzz", "--seed", "2", "--trials", "3",
                            "--kinds", "afw", "--output", str(out_csv))
        assert code == 1
        obj = json.loads(out)
        assert obj["violations"] == 3
        assert obj["witness"].endswith("v_witness.json")
        assert len(json.load(open(obj["witness"]))["violations"]) == 3


class TestExperimentCommand:
    def test_example1(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "example1", "--dims", "2,3",
                            "--lambda-steps", "5", "--out-dir", str(tmp_path))
        assert code == 0
        lines = (tmp_path / "example1.csv").read_text().splitlines()
        assert lines[0].startswith("d,lambda,s_lambda")
        assert len(lines) == 11

    def test_nogo(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "nogo", "--lambda", "0.05",
                            "--max-d", "1000", "--out-dir", str(tmp_path))
        assert code == 0
        obj = json.loads(out)
        assert obj["first_dim_over"] is None
        assert (tmp_path / "nogo.csv").exists()

    def test_pathology(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "pathology", "--iterations", "4",
                            "--out-dir", str(tmp_path))
        assert code == 0
        obj = json.loads(out)
        assert obj["naive_strictly_grows_once_volumes_le_1"] is True
        assert obj["entropy_diff_spread"] < 1e-10

    def test_channel_probe(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "channel-probe", "--dim", "2",
                            "--outcomes", "2", "--s-steps", "5", "--seed", "1",
                            "--out-dir", str(tmp_path))
        assert code == 0
        obj = json.loads(out)
        assert obj["all_never_increase"] is True and obj["monotone"] is True

    def test_gamma_probe(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "gamma-probe", "--lambdas", "0.2",
                            "--seed", "1", "--out-dir", str(tmp_path))
        assert code == 0
        assert (tmp_path / "gamma_probe.csv").read_text().splitlines()[0] == \
            "gamma,d_m,d_n,diff"

    def test_minimax(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "experiment", "minimax", "--out-dir", str(tmp_path))
        assert code == 0
        obj = json.loads(out)
        assert obj["max_gap"] <= 5e-3
        assert set(json.load(open(tmp_path / "minimax.json"))["gaps"]) == set(obj["gaps"])

    def test_unknown_name_exits_two(self, capsys):
        code, _, err = _run(capsys, "experiment", "frobnicate")
        assert code == 2


class TestDistanceCommand:
    def test_diamond_with_diagnostics(self, files, tmp_path, capsys):
        diag = tmp_path / "diag.csv"
        code, out, _ = _run(capsys, "distance", "--povm-a", files["m"],
                            "--povm-b", files["n"], "--metric", "diamond",
                            "--tol", "1e-7", "--diagnostics", str(diag))
        assert code == 0
        obj = json.loads(out)
        assert 0.0 <= obj["diamond"]["value"] <= 1.0
        assert obj["diamond"]["gap"] <= 1e-7
        lines = diag.read_text().splitlines()
        assert lines[0] == "iteration,primal,dual,gap"
        assert len(lines) >= 2

    def test_both_metrics_on_identical(self, files, capsys):
        code, out, _ = _run(capsys, "distance", "--povm-a", files["m"],
                            "--povm-b", files["m"], "--metric", "both")
        assert code == 0
        obj = json.loads(out)
        assert obj["diamond"]["value"] == 0.0
        assert obj["gamma"]["value"] <= 1e-8

    def test_nonconvergence_exits_three(self, files, capsys, monkeypatch):
        capped = functools.partial(measurement_distance._solve_blocks, max_iter=20)
        monkeypatch.setattr(measurement_distance, "_solve_blocks", capped)
        code, _, err = _run(capsys, "distance", "--povm-a", files["m"],
                            "--povm-b", files["n"], "--metric", "diamond",
                            "--tol", "1e-12")
        assert code == 3
        assert "converge" in err

    def test_dimension_mismatch_exits_two(self, files, tmp_path, capsys):
        gen = qmat.trial_rng(1, 1)
        other = tmp_path / "q2.json"
        qmat.save_json(qmat.povm_to_json(qmat.random_povm(2, 2, gen)), str(other))
        code, _, err = _run(capsys, "distance", "--povm-a", files["m"],
                            "--povm-b", str(other))
        assert code == 2


class TestParsing:
    def test_help_exits_zero(self, capsys):
        assert cli.main(["--help"]) == 0

    def test_no_command_exits_two(self, capsys):
        assert cli.main([]) == 2

    def test_unknown_flag_exits_two(self, capsys):
        assert cli.main(["entropy", "--bogus"]) == 2
