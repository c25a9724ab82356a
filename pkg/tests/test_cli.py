import json
import os

import pytest
from click.testing import CliRunner

from wdqlab.cli import main

CONFIG_YAML = """\
theta: {family: normal, params: {mean: 2.0, sd: 1.0}}
x: {family: normal, params: {mean: 1.0, sd: 1.0}}
mu: 1.0
r: 0.0
beta: 0.2
T: 1.0
w0: 0.0
seed: 42
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text(CONFIG_YAML)
    return str(p)


def invoke(runner, args):
    res = runner.invoke(main, args, catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res


def test_simulate_writes_csv(runner, cfg, tmp_path):
    out = tmp_path / "sim.csv"
    invoke(runner, ["simulate", "--config", cfg, "--n", "50", "--reps", "2",
                    "--scaling", "fluid", "--out", str(out)])
    lines = out.read_text().splitlines()
    assert lines[0] == "rep,t,value"
    assert len(lines) == 1 + 2 * 51


def test_simulate_v_process(runner, cfg):
    res = invoke(runner, ["simulate", "--config", cfg, "--n", "20", "--process", "v",
                          "--v0", "-2.0", "--scaling", "fluid"])
    assert res.output.splitlines()[1].endswith("-2.0")


def test_reflect_roundtrip(runner, tmp_path):
    src = tmp_path / "x.csv"
    src.write_text("t,value\n0.0,0.0\n0.5,-1.0\n1.0,0.5\n")
    out = tmp_path / "z.csv"
    reg = tmp_path / "l.csv"
    invoke(runner, ["reflect", "--op", "r", "--in", str(src), "--out", str(out),
                    "--regulator-out", str(reg)])
    assert out.read_text().splitlines()[1:] == ["0.0,0.0", "0.5,0.0", "1.0,1.5"]
    assert reg.read_text().splitlines()[1:] == ["0.0,0.0", "0.5,1.0", "1.0,1.0"]


def test_fluid_classify(runner):
    res = invoke(runner, ["fluid", "--classify", "--mu", "1", "--theta", "2"])
    doc = json.loads(res.output)
    assert doc["stable_point"] == 0.5


def test_fluid_path_reports_hitting_time(runner, tmp_path):
    out = tmp_path / "w.csv"
    res = invoke(runner, ["fluid", "--path", "--mu", "-1", "--theta", "1",
                          "--initial", "2", "--t", "2", "--steps", "100", "--out", str(out)])
    assert "hitting_time=" in res.output  # stderr note
    assert out.read_text().splitlines()[0] == "t,value"


def test_fluid_convergence(runner, cfg):
    res = invoke(runner, ["fluid", "--convergence", "--config", cfg,
                          "--n-ladder", "50,100", "--reps", "5"])
    lines = res.output.splitlines()
    assert lines[0] == "n,reps,mean_sup_error,se,q10,q50,q90"
    assert len(lines) == 3


def test_fluid_requires_a_mode(runner):
    res = CliRunner().invoke(main, ["fluid"])
    assert res.exit_code != 0


def test_rate_command_with_decomposition(runner, tmp_path):
    phi = tmp_path / "phi.csv"
    rows = ["t,value"] + [f"{k / 100},{0.7}" for k in range(101)]
    phi.write_text("\n".join(rows) + "\n")
    prefix = str(tmp_path / "dec")
    res = invoke(runner, ["rate", "--case", "w-pos", "--phi", str(phi),
                          "--mu", "1", "--theta", "2", "--sigma-x", "1",
                          "--sigma-theta", "0.5", "--initial", "0.7",
                          "--decomposition-prefix", prefix])
    doc = json.loads(res.output)
    assert doc["value_closed_form"] == pytest.approx(doc["value_variational"], rel=1e-9)
    assert os.path.exists(prefix + ".psi1.csv")
    assert os.path.exists(prefix + ".psi2.csv")


def test_fclt_command(runner, tmp_path):
    cfg3 = tmp_path / "c3.yaml"
    cfg3.write_text(CONFIG_YAML.replace("mean: 1.0", "mean: -1.0").replace("mu: 1.0", "mu: -1.0"))
    res = invoke(runner, ["fclt", "--case", "iii", "--config", str(cfg3),
                          "--n", "200", "--t", "1.0", "--reps", "40"])
    doc = json.loads(res.output)
    assert doc["case"] == "iii"


def test_mdp_tail_command(runner, tmp_path):
    cfg0 = tmp_path / "c0.yaml"
    cfg0.write_text(
        "theta: {family: two_point, params: {p: 1.0, lo: 0.0, hi: 0.0}}\n"
        "x: {family: normal, params: {mean: 0.0, sd: 1.0}}\n"
        "mu: 0.0\nr: 0.0\nbeta: 0.2\nT: 1.0\nw0: 0.0\nseed: 3\n"
    )
    out = tmp_path / "tail.csv"
    res = invoke(runner, ["mdp-tail", "--config", str(cfg0), "--event", "endpoint:a=0.6",
                          "--n-ladder", "200,400", "--reps", "3000", "--out", str(out)])
    assert out.read_text().splitlines()[0] == "n,b_n,p_hat,se,rate,censored_lower_bound"
    assert "target=" in res.output  # summary note on stderr


def test_mdp_tail_rejects_bad_event(runner, cfg):
    res = CliRunner().invoke(main, ["mdp-tail", "--config", cfg, "--event", "oops",
                                    "--n-ladder", "100", "--reps", "10"])
    assert res.exit_code != 0
    assert "event must look like" in res.output


def test_oracle_command(runner):
    res = invoke(runner, ["oracle", "--cases", "50", "--seed", "2"])
    assert res.output.splitlines()[0] == "suite,cases,failures,passed"
    assert "false" not in res.output
