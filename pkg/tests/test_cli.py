import json
import subprocess
import sys

import numpy as np
import pytest

from fdiv.cli import main
from fdiv.critic_net import init_network, save_network
from fdiv.distributions import gaussian_1d, save_density
from fdiv.trainer import TrainTrace

TAIL_TABLE = {"KL": (1, 2, False), "RKL": (2, 1, False), "JS4": (1, 1, True), "Jeffreys": (2, 2, False),
           "NeymannChi2": (3, 0, False), "SRKL": (2, 0, False), "IGOG": (2, 0, False)}


def test_tailweights_json(capsys):
    assert main(["tailweights", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["schema_version"] == 1
    assert len(data["rows"]) == 7
    for row in data["rows"]:
        L, R, bounded = TAIL_TABLE[row["name"]]
        assert row["L"] == pytest.approx(L, abs=0.05) and row["R"] == pytest.approx(R, abs=0.05)
        assert row["bounded"] is bounded
        assert (row["m"] is not None) is bounded


def test_tailweights_text(capsys):
    assert main(["tailweights"]) == 0
    out = capsys.readouterr().out
    assert "JS4" in out and "-0.000" not in out
    assert len(out.strip().split("\n")) == 8


def test_sfcurves(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sfcurves", "--divergences", "KL", "JS4", "--points", "5", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "d,s_KL,s_JS4"
    assert len(lines) == 6
    mid = [float(v) for v in lines[3].split(",")]
    assert mid == [0.0, 0.0, 0.0]


def test_estimate_optimal_and_checkpoint(tmp_path, capsys):
    save_density(gaussian_1d(0, 1), tmp_path / "p.json")
    save_density(gaussian_1d(1, 1), tmp_path / "q.json")
    args = ["estimate", "--p", str(tmp_path / "p.json"), "--q", str(tmp_path / "q.json"), "--divergence", "kl",
            "--samples", "20000"]
    assert main(args) == 0
    est = json.loads(capsys.readouterr().out)
    assert est["schema_version"] == 1 and est["divergence"] == "KL"
    assert abs(est["value"] - 0.5) < 4 * est["std_error"]
    save_network(init_network(seed=0), tmp_path / "net.json")
    assert main(args + ["--critic", str(tmp_path / "net.json")]) == 0
    learned = json.loads(capsys.readouterr().out)
    assert learned["critic"] == "learned" and learned["value"] < 0.5


def test_pushforward_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / "pf.csv"
    save_density(gaussian_1d(1, 1), tmp_path / "p.json")
    save_density(gaussian_1d(0, 1), tmp_path / "q.json")
    assert main(["pushforward", "--p", str(tmp_path / "p.json"), "--q", str(tmp_path / "q.json"),
                 "--samples", "5000", "--bins", "20", "--out", str(out)]) == 0
    assert out.read_text().startswith("d_center,p_tilde,q_tilde\n")
    side = json.loads((tmp_path / "pf.json").read_text())
    assert side["schema_version"] == 1
    assert set(side["estimates"]) == {"KL", "RKL", "SRKL", "JS4"}
    assert side["critic"] == "optimal"


def test_contour(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["contour", "--divergence", "srkl", "--p", "bimodal", "--resolution", "6", "5",
                 "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["divergence"] == "SRKL" and summary["failures"] == 0
    rows = out.read_text().strip().split("\n")
    assert rows[0] == "mu,sigma,value" and len(rows) == 31


def test_train_command(tmp_path):
    out, csv_out = tmp_path / "t.json", tmp_path / "t.csv"
    assert main(["train", "--scheme", "js-nonsaturating", "--critic", "analytic", "--seed", "1", "--steps", "20",
                 "--out", str(out), "--csv", str(csv_out)]) == 0
    tr = TrainTrace.from_dict(json.loads(out.read_text()))
    assert len(tr.steps) == 21 and tr.config_echo["seed"] == 1
    assert tr.config_echo["mode"] == "non_saturating" and tr.config_echo["generator_lr"] == 2e-3
    assert csv_out.read_text().startswith("step,mu,sigma,gen_loss,critic_value,div_estimate\n")


def test_train_from_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "rkl", "critic_mode": "analytic", "total_generator_steps": 3,
                               "init_mu": 0.5}))
    out = tmp_path / "t.json"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    tr = json.loads(out.read_text())
    assert tr["config"]["generator_divergence"] == "RKL" and tr["steps"][0]["mu"] == 0.5


def test_diverging_run_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "rkl", "critic_mode": "analytic", "generator_lr": 1e4,
                               "total_generator_steps": 5}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "t.json")]) == 2
    assert "numeric failure" in capsys.readouterr().err
    assert json.loads((tmp_path / "t.json").read_text())["status"] == "diverged"


def test_fit(capsys):
    assert main(["fit", "--p", "correlated-2d", "--objective", "rkl"]) == 0
    fit = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(np.diag(np.array(fit["components"][0]["cov"])), 1 / 0.55, atol=1e-2)


def test_suite_small(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"total_generator_steps": 2, "log_every": 1}))
    assert main(["suite", "--config", str(cfg), "--out-dir", str(tmp_path / "suite"), "--n-seeds", "1"]) == 0
    summary = json.loads((tmp_path / "suite" / "suite.json").read_text())
    assert len(summary["runs"]) == 8
    assert all((tmp_path / "suite" / r["file"]).exists() for r in summary["runs"])


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["tailweights", "--format", "xml"],
    ["train", "--scheme", "wgan"],
    ["estimate", "--p", "nope.json", "--q", "bimodal", "--divergence", "KL"],
    ["estimate", "--p", "bimodal", "--q", "bimodal", "--divergence", "TV"],
    ["contour", "--divergence", "KL", "--p", "correlated-2d"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert _exit_code(argv) == 1
    assert capsys.readouterr().err


def _exit_code(argv):
    # argparse reports usage errors by raising SystemExit
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fdiv", "tailweights", "--divergences", "JS4"],
                         capture_output=True, text=True, timeout=60)
    assert res.returncode == 0 and "JS4" in res.stdout
    res = subprocess.run([sys.executable, "-m", "fdiv", "nosuchcommand"], capture_output=True, text=True, timeout=60)
    assert res.returncode == 1 and "usage" in res.stderr
