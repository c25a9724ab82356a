"""Command-line client for the simulation service.

Each subcommand builds a request model, sends it to the HTTP service and
writes the response. By default the service app runs in-process (no network,
fully reproducible); pass ``--server http://host:port`` to target a running
instance started with ``wdqlab serve``.
"""

from __future__ import annotations

import json
import sys

import click
import yaml

from .service.schemas import ConfigModel

_SCALINGS = ["raw", "fluid", "diffusion", "md"]


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette's in-process client works fine on plain httpx; the nudge
        # toward httpx2 is irrelevant for a loopback transport
        warnings.filterwarnings("ignore", message="Using `httpx` with")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(server: str | None, route: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(route, json=payload)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise click.ClickException(f"{route} failed ({resp.status_code}): {detail}")
        return resp.json()


def _load_config_model(path: str) -> ConfigModel:
    with open(path) as fp:
        doc = yaml.safe_load(fp)
    try:
        return ConfigModel.model_validate(doc)
    except Exception as exc:
        raise click.ClickException(f"bad config {path}: {exc}")


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fp:
            fp.write(text)


@click.group()
def main():
    """Queueing lab: waiting-time dependent single-server queues across scalings."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--n", required=True, type=int, help="scaling level (steps per unit time)")
@click.option("--reps", default=1, type=int, show_default=True)
@click.option("--scaling", type=click.Choice(_SCALINGS), default="raw", show_default=True)
@click.option("--process", type=click.Choice(["w", "v"]), default="w", show_default=True)
@click.option("--v0", default=0.0, type=float, help="initial value for the linear recursion")
@click.option("--md-w0", default=None, type=float, help="start the MD view at this offset")
@click.option("--out", default="-", help="output CSV (rep,t,value); '-' for stdout")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def simulate(config_path, n, reps, scaling, process, v0, md_w0, out, server):
    """Simulate the recursion and emit the chosen scaled view."""
    payload = {
        "config": _load_config_model(config_path).model_dump(),
        "n": n,
        "reps": reps,
        "scaling": scaling,
        "process": process,
        "v0": v0,
        "md_w0": md_w0,
    }
    data = _post(server, "/simulate", payload)
    _write(data["csv"], out)


@main.command()
@click.option("--op", type=click.Choice(["r", "m", "rtheta"]), required=True)
@click.option("--theta", default=0.0, type=float, show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", default="-", help="regulated/mapped path CSV")
@click.option("--regulator-out", default=None, help="optional CSV for the regulator path")
@click.option("--server", default=None)
def reflect(op, theta, in_path, out, regulator_out, server):
    """Apply a reflection/drift operator to a path CSV (header t,value)."""
    with open(in_path) as fp:
        csv_text = fp.read()
    data = _post(server, "/reflect", {"op": op, "theta": theta, "csv": csv_text})
    _write(data["csv"], out)
    if regulator_out and data.get("regulator_csv"):
        _write(data["regulator_csv"], regulator_out)


@main.command()
@click.option("--classify", "do_classify", is_flag=True, help="print the regime classification")
@click.option("--path", "do_path", is_flag=True, help="emit the closed-form fluid path")
@click.option("--convergence", "do_convergence", is_flag=True, help="simulate an n ladder")
@click.option("--mu", type=float, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--initial", type=float, default=0.0, show_default=True)
@click.option("--t", "horizon", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=200, show_default=True)
@click.option("--process", type=click.Choice(["w", "v"]), default="w", show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--n-ladder", default="100,1000,10000", show_default=True)
@click.option("--reps", default=50, type=int, show_default=True)
@click.option("--v0", default=None, type=float)
@click.option("--out", default="-")
@click.option("--server", default=None)
def fluid(do_classify, do_path, do_convergence, mu, theta, initial, horizon, steps,
          process, config_path, n_ladder, reps, v0, out, server):
    """Fluid-limit tools: classification, closed-form paths, convergence ladders."""
    if do_classify:
        if mu is None or theta is None:
            raise click.ClickException("--classify needs --mu and --theta")
        data = _post(server, "/fluid/classify", {"mu": mu, "theta": theta, "process": process})
        _write(json.dumps(data, indent=2, sort_keys=True) + "\n", out)
        return
    if do_path:
        if mu is None or theta is None:
            raise click.ClickException("--path needs --mu and --theta")
        payload = {
            "mu": mu, "theta": theta, "initial": initial, "T": horizon,
            "steps": steps, "process": process,
        }
        data = _post(server, "/fluid/path", payload)
        _write(data["csv"], out)
        if data.get("hitting_time") is not None:
            click.echo(f"hitting_time={data['hitting_time']!r}", err=True)
        return
    if do_convergence:
        if config_path is None:
            raise click.ClickException("--convergence needs --config")
        ladder = [int(x) for x in n_ladder.split(",")]
        payload = {
            "config": _load_config_model(config_path).model_dump(),
            "n_ladder": ladder,
            "reps": reps,
            "process": process,
            "v0": v0,
        }
        data = _post(server, "/fluid/convergence", payload)
        lines = ["n,reps,mean_sup_error,se,q10,q50,q90"]
        for row in data["rows"]:
            lines.append(
                f"{row['n']},{row['reps']},{row['mean_sup_error']!r},{row['se']!r},"
                f"{row['q10']!r},{row['q50']!r},{row['q90']!r}"
            )
        _write("\n".join(lines) + "\n", out)
        return
    raise click.ClickException("pick one of --classify, --path, --convergence")


@main.command()
@click.option("--case", type=click.Choice(["w-pos", "w-zero", "v-pos", "v-zero"]), required=True)
@click.option("--phi", "phi_path", required=True, type=click.Path(exists=True))
@click.option("--mu", required=True, type=float)
@click.option("--theta", required=True, type=float)
@click.option("--sigma-x", required=True, type=float)
@click.option("--sigma-theta", required=True, type=float)
@click.option("--r", default=0.0, type=float, show_default=True)
@click.option("--initial", default=0.0, type=float, show_default=True)
@click.option("--out", default="-", help="report destination (JSON)")
@click.option("--decomposition-prefix", default=None,
              help="write psi1/psi2/y CSVs with this path prefix")
@click.option("--server", default=None)
def rate(case, phi_path, mu, theta, sigma_x, sigma_theta, r, initial, out,
         decomposition_prefix, server):
    """Evaluate the rate functional of a piecewise-linear path, both routes."""
    with open(phi_path) as fp:
        phi_csv = fp.read()
    payload = {
        "case": case,
        "phi_csv": phi_csv,
        "params": {
            "mu": mu, "theta": theta, "sigma_x": sigma_x,
            "sigma_theta": sigma_theta, "r": r, "initial": initial,
        },
    }
    data = _post(server, "/rate", payload)
    report = {
        k: data[k] for k in ("value_closed_form", "value_variational", "gap")
    }
    _write(json.dumps(report, indent=2, sort_keys=True) + "\n", out)
    if decomposition_prefix:
        for key, suffix in (("psi1_csv", "psi1"), ("psi2_csv", "psi2"), ("y_csv", "y")):
            if data.get(key):
                _write(data[key], f"{decomposition_prefix}.{suffix}.csv")


@main.command()
@click.option("--case", type=click.Choice(["i", "ii", "iii"]), required=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--eta", default=0.0, type=float, show_default=True)
@click.option("--n", required=True, type=int)
@click.option("--t", required=True, type=float)
@click.option("--reps", default=500, type=int, show_default=True)
@click.option("--delta", default=0.5, type=float, show_default=True)
@click.option("--stationary", is_flag=True,
              help="case i: compare against closed-form stationary moments")
@click.option("--out", default="-")
@click.option("--server", default=None)
def fclt(case, config_path, eta, n, t, reps, delta, stationary, out, server):
    """Compare the diffusion-scaled queue against its limit process."""
    payload = {
        "case": case,
        "config": _load_config_model(config_path).model_dump(),
        "eta": eta,
        "n": n,
        "t": t,
        "reps": reps,
        "delta": delta,
        "stationary": stationary,
    }
    data = _post(server, "/fclt", payload)
    _write(json.dumps(data, indent=2, sort_keys=True) + "\n", out)


@main.command(name="mdp-tail")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--event", required=True,
              help="endpoint:a=1.0 or sup:a=1.0 (threshold on the MD view)")
@click.option("--n-ladder", required=True, help="comma-separated ascending levels")
@click.option("--reps", required=True, type=int)
@click.option("--beta", default=None, type=float, help="override the config's b_n exponent")
@click.option("--target", default=None, type=float,
              help="rate-function target (computed from the config when omitted)")
@click.option("--out", default="-")
@click.option("--server", default=None)
def mdp_tail(config_path, event, n_ladder, reps, beta, target, out, server):
    """Estimate moderate-deviation decay rates along an n ladder."""
    try:
        kind, spec_str = event.split(":", 1)
        a = float(spec_str.split("=", 1)[1])
    except (ValueError, IndexError):
        raise click.ClickException("event must look like endpoint:a=1.0 or sup:a=1.0")
    config = _load_config_model(config_path)
    if beta is not None:
        config = config.model_copy(update={"beta": beta})
    payload = {
        "config": config.model_dump(),
        "event": {"kind": kind, "a": a},
        "n_ladder": [int(x) for x in n_ladder.split(",")],
        "reps": reps,
        "target": target,
    }
    data = _post(server, "/mdp-tail", payload)
    _write(data["csv"], out)
    click.echo(
        f"target={data['target']!r} trend={data['trend']} within_band={data['within_band']}",
        err=True,
    )
    if data.get("suggested_threshold") is not None:
        click.echo(
            f"note: the event is too rare at the smallest rung; "
            f"a <= {data['suggested_threshold']:.3g} would keep it estimable",
            err=True,
        )


@main.command()
@click.option("--suite", type=click.Choice(["all"]), default="all", show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--cases", default=1000, type=int, show_default=True)
@click.option("--out", default="-")
@click.option("--server", default=None)
def oracle(suite, seed, cases, out, server):
    """Run the brute-force oracle suites and emit a pass/fail table."""
    data = _post(server, "/oracle", {"seed": seed, "cases": cases})
    _write(data["csv"], out)
    if not data["all_passed"]:
        raise click.ClickException("oracle suite reported failures")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
