import warnings

import numpy as np
import pytest

from wdqlab.paths import path_from_csv

pytest.importorskip("fastapi")
with warnings.catch_warnings():
    warnings.filterwarnings("ignore", message="Using `httpx` with")
    from starlette.testclient import TestClient

from wdqlab.service.app import app  # noqa: E402


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


CONFIG = {
    "theta": {"family": "normal", "params": {"mean": 2.0, "sd": 1.0}},
    "x": {"family": "normal", "params": {"mean": 1.0, "sd": 1.0}},
    "mu": 1.0,
    "r": 0.0,
    "beta": 0.2,
    "T": 1.0,
    "w0": 0.0,
    "seed": 42,
}


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_simulate_returns_csv_and_center(client):
    resp = client.post(
        "/simulate", json={"config": CONFIG, "n": 100, "reps": 2, "scaling": "fluid"}
    )
    assert resp.status_code == 200
    body = resp.json()
    lines = body["csv"].splitlines()
    assert lines[0] == "rep,t,value"
    assert len(lines) == 1 + 2 * 101
    assert body["center"] == 0.5


def test_simulate_deterministic_bytes(client):
    req = {"config": CONFIG, "n": 50, "reps": 3, "scaling": "md"}
    a = client.post("/simulate", json=req).json()["csv"]
    b = client.post("/simulate", json=req).json()["csv"]
    assert a == b


def test_simulate_v_process(client):
    resp = client.post(
        "/simulate",
        json={"config": CONFIG, "n": 50, "scaling": "fluid", "process": "v", "v0": -1.0},
    )
    assert resp.status_code == 200
    first_value = resp.json()["csv"].splitlines()[1].split(",")[2]
    assert float(first_value) == -1.0


def test_simulate_rejects_diffusion_view_of_v(client):
    resp = client.post(
        "/simulate", json={"config": CONFIG, "n": 50, "scaling": "diffusion", "process": "v"}
    )
    assert resp.status_code == 422


def test_simulate_rejects_mu_mismatch(client):
    bad = dict(CONFIG, mu=3.0)
    resp = client.post("/simulate", json={"config": bad, "n": 10})
    assert resp.status_code == 422
    assert "does not match" in resp.json()["detail"]


def test_reflect_ops(client):
    csv_in = "t,value\n0.0,0.0\n0.5,-1.0\n1.0,0.5\n"
    r = client.post("/reflect", json={"op": "r", "theta": 0.0, "csv": csv_in}).json()
    z = path_from_csv(r["csv"])
    l = path_from_csv(r["regulator_csv"])
    assert np.array_equal(z.values, [0.0, 0.0, 1.5])
    assert np.array_equal(l.values, [0.0, 1.0, 1.0])
    m = client.post("/reflect", json={"op": "m", "theta": 1.0, "csv": csv_in}).json()
    assert m["regulator_csv"] is None
    bad = client.post("/reflect", json={"op": "r", "theta": 0.0, "csv": "t,value\n0,-1\n1,0\n"})
    assert bad.status_code == 422


def test_classify_endpoint(client):
    resp = client.post("/fluid/classify", json={"mu": 1.0, "theta": 2.0, "process": "w"}).json()
    assert resp["stable_point"] == 0.5
    resp = client.post("/fluid/classify", json={"mu": -1.0, "theta": -2.0, "process": "w"}).json()
    assert resp["initial_condition_dependent"] is True
    assert resp["secondary_fixed_point"] == 0.5


def test_fluid_path_endpoint(client):
    resp = client.post(
        "/fluid/path",
        json={"mu": -1.0, "theta": 1.0, "initial": 2.0, "T": 2.0, "steps": 100, "process": "w"},
    ).json()
    assert resp["hitting_time"] == pytest.approx(np.log(3.0))
    path = path_from_csv(resp["csv"])
    assert path.values[0] == 2.0 and path.values[-1] == 0.0


def test_fluid_convergence_endpoint(client):
    resp = client.post(
        "/fluid/convergence",
        json={"config": CONFIG, "n_ladder": [50, 200], "reps": 10},
    )
    rows = resp.json()["rows"]
    assert [r["n"] for r in rows] == [50, 200]
    assert rows[1]["mean_sup_error"] < rows[0]["mean_sup_error"] + rows[0]["se"]


def _phi_csv(values, horizon=1.0):
    m = len(values) - 1
    lines = ["t,value"] + [f"{horizon * k / m!r},{v!r}" for k, v in enumerate(values)]
    return "\n".join(lines) + "\n"


def test_rate_endpoint_with_decomposition(client):
    phi = _phi_csv([0.7] * 101)
    resp = client.post(
        "/rate",
        json={
            "case": "w-pos",
            "phi_csv": phi,
            "params": {
                "mu": 1.0, "theta": 2.0, "sigma_x": 1.0, "sigma_theta": 0.5,
                "r": 0.0, "initial": 0.7,
            },
        },
    ).json()
    assert resp["value_closed_form"] == pytest.approx(resp["value_variational"], rel=1e-9)
    assert resp["psi1_csv"] and resp["psi2_csv"] and resp["y_csv"] is None


def test_rate_endpoint_infinite_encoded_as_null(client):
    phi = _phi_csv([5.0] + [0.0] * 100)  # wrong starting value
    resp = client.post(
        "/rate",
        json={
            "case": "w-zero",
            "phi_csv": phi,
            "params": {
                "mu": 0.0, "theta": 0.0, "sigma_x": 1.0, "sigma_theta": 0.0,
                "r": 0.0, "initial": 0.0,
            },
        },
    ).json()
    assert resp["value_closed_form"] is None


def test_endpoint_target_route(client):
    resp = client.post(
        "/rate/endpoint-target",
        json={
            "case": "w-zero",
            "params": {
                "mu": 0.0, "theta": 0.0, "sigma_x": 1.0, "sigma_theta": 0.0,
                "r": 0.0, "initial": 0.0,
            },
            "a": 1.0,
            "T": 1.0,
        },
    ).json()
    assert resp["target"] == pytest.approx(0.5, rel=1e-8)
    assert resp["exact_random_walk"] == 0.5


def test_fclt_route_case_iii(client):
    cfg = dict(CONFIG, mu=-1.0, x={"family": "normal", "params": {"mean": -1.0, "sd": 1.0}})
    resp = client.post(
        "/fclt",
        json={"case": "iii", "config": cfg, "eta": 0.0, "n": 200, "t": 1.0, "reps": 50},
    ).json()
    assert resp["moments"] is None
    assert 0.0 <= resp["sup_exceed_md"] <= 1.0


def test_mdp_tail_route_computes_target(client):
    cfg = dict(
        CONFIG,
        mu=0.0,
        x={"family": "normal", "params": {"mean": 0.0, "sd": 1.0}},
        theta={"family": "two_point", "params": {"p": 1.0, "lo": 0.0, "hi": 0.0}},
    )
    resp = client.post(
        "/mdp-tail",
        json={
            "config": cfg,
            "event": {"kind": "endpoint", "a": 0.6},
            "n_ladder": [200, 400],
            "reps": 4000,
        },
    ).json()
    assert resp["target"] == pytest.approx(0.18, rel=1e-6)
    assert resp["csv"].splitlines()[0] == "n,b_n,p_hat,se,rate,censored_lower_bound"
    assert len(resp["p_hats"]) == 2


def test_oracle_route(client):
    resp = client.post("/oracle", json={"seed": 5, "cases": 100}).json()
    assert resp["all_passed"] is True
    assert resp["csv"].splitlines()[0] == "suite,cases,failures,passed"
