"""HTTP service exposing the simulation lab.

Every endpoint is a stateless wrapper over the core package; all randomness
is seeded through the request, so responses are reproducible byte for byte.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from .. import diffusion, fluid, oracle, ratefn, recursion, tailprob
from ..paths import Grid, path_from_csv, path_to_csv
from ..reflection import map_m, reflect, reflect_theta
from . import schemas as s

app = FastAPI(title="wdqlab", version="0.1.0")


def _fmt(x: float) -> str:
    return repr(float(x))


def _finite_or_none(x: float) -> float | None:
    return None if math.isinf(x) else x


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    try:
        params = req.config.to_params()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    lines = ["rep,t,value"]
    center = 0.0
    try:
        for rep in range(req.reps):
            seed = req.config.seed
            if req.process == "w":
                out = recursion.simulate_w(params, req.n, seed + rep, md_w0=req.md_w0)
                view = {
                    "raw": out.w_path,
                    "fluid": out.fluid_view,
                    "diffusion": out.diffusion_view,
                    "md": out.md_view,
                }[req.scaling]
                center = out.center
            else:
                if req.scaling == "diffusion":
                    raise HTTPException(
                        status_code=422, detail="the linear recursion exposes raw/fluid/md views"
                    )
                out = recursion.simulate_v(params, req.n, seed + rep, v0=req.v0)
                view = {"raw": out.v_path, "fluid": out.fluid_view, "md": out.md_view}[
                    req.scaling
                ]
                center = out.center
            for t, v in zip(view.grid.times(), view.values):
                lines.append(f"{rep},{_fmt(t)},{_fmt(v)}")
    except (ValueError, recursion.SimulationBlowup) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return s.SimulateResponse(csv="\n".join(lines) + "\n", center=center)


@app.post("/reflect", response_model=s.ReflectResponse)
def reflect_endpoint(req: s.ReflectRequest) -> s.ReflectResponse:
    try:
        x = path_from_csv(req.csv, kind="step")
        if req.op == "m":
            return s.ReflectResponse(csv=path_to_csv(map_m(x, req.theta)))
        pair = reflect(x) if req.op == "r" else reflect_theta(x, req.theta)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return s.ReflectResponse(csv=path_to_csv(pair.z), regulator_csv=path_to_csv(pair.l))


@app.post("/fluid/classify", response_model=s.ClassifyResponse)
def classify(req: s.ClassifyRequest) -> s.ClassifyResponse:
    fn = fluid.classify_w if req.process == "w" else fluid.classify_v
    c = fn(req.mu, req.theta)
    return s.ClassifyResponse(
        load=c.load,
        theta_sign=c.theta_sign,
        stable=c.stable,
        stable_point=c.stable_point,
        initial_condition_dependent=c.initial_condition_dependent,
        secondary_fixed_point=c.secondary_fixed_point,
    )


@app.post("/fluid/path", response_model=s.FluidPathResponse)
def fluid_path(req: s.FluidPathRequest) -> s.FluidPathResponse:
    grid = Grid(req.T, req.steps)
    try:
        if req.process == "w":
            path = fluid.fluid_w(req.mu, req.theta, req.initial, grid)
            t0 = fluid.hitting_time_w(req.mu, req.theta, req.initial)
        else:
            path = fluid.fluid_v(req.mu, req.theta, req.initial, grid)
            t0 = None
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return s.FluidPathResponse(csv=path_to_csv(path), hitting_time=t0)


@app.post("/fluid/convergence", response_model=s.ConvergenceResponse)
def fluid_convergence(req: s.ConvergenceRequest) -> s.ConvergenceResponse:
    try:
        params = req.config.to_params()
        rows = fluid.fluid_convergence_report(
            params, req.n_ladder, req.reps, req.config.seed, process=req.process, v0=req.v0
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return s.ConvergenceResponse(
        rows=[
            s.ConvergenceRow(
                n=r.n, reps=r.reps, mean_sup_error=r.mean_sup_error, se=r.se,
                q10=r.q10, q50=r.q50, q90=r.q90,
            )
            for r in rows
        ]
    )


def _rate_params(m: s.RateParamsModel) -> ratefn.RateParams:
    return ratefn.RateParams(
        mu=m.mu, theta=m.theta, sigma_x=m.sigma_x, sigma_theta=m.sigma_theta,
        r=m.r, initial=m.initial,
    )


@app.post("/rate", response_model=s.RateResponse)
def rate(req: s.RateRequest) -> s.RateResponse:
    try:
        phi = path_from_csv(req.phi_csv, kind="linear")
        report = ratefn.evaluate_report(phi, _rate_params(req.params), req.case)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return s.RateResponse(
        value_closed_form=_finite_or_none(report.value_closed_form),
        value_variational=_finite_or_none(report.value_variational),
        gap=_finite_or_none(report.gap),
        psi1_csv=path_to_csv(report.psi1) if report.psi1 is not None else None,
        psi2_csv=path_to_csv(report.psi2) if report.psi2 is not None else None,
        y_csv=path_to_csv(report.y) if report.y is not None else None,
    )


@app.post("/rate/endpoint-target", response_model=s.EndpointTargetResponse)
def endpoint_target(req: s.EndpointTargetRequest) -> s.EndpointTargetResponse:
    p = _rate_params(req.params)
    try:
        target = tailprob.endpoint_target(p, req.a, req.case, req.T, cells=req.cells)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    exact = None
    if req.case in ("w-zero", "v-zero") and p.theta == 0.0 and p.r == 0.0 and p.initial == 0.0:
        exact = tailprob.endpoint_target_exact_rw(req.a, p.sigma_x, req.T)
    return s.EndpointTargetResponse(target=target, exact_random_walk=exact)


@app.post("/fclt", response_model=s.FcltResponse)
def fclt(req: s.FcltRequest) -> s.FcltResponse:
    try:
        params = req.config.to_params()
        report = diffusion.fclt_check(
            params, req.eta, req.n, req.t, req.reps, req.config.seed, req.case,
            delta=req.delta, compare_to_stationary=req.stationary,
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    moments = None
    if report.moments is not None:
        m = report.moments
        moments = s.MomentReportModel(
            empirical_mean=m.empirical_mean, empirical_var=m.empirical_var,
            target_mean=m.target_mean, target_var=m.target_var,
            z_mean=m.z_mean, z_var=m.z_var, ks_statistic=m.ks_statistic,
        )
    return s.FcltResponse(
        case=report.case, n=report.n, reps=report.reps, t_eval=report.t_eval,
        moments=moments,
        sup_exceed_diffusion=report.sup_exceed_diffusion,
        sup_exceed_md=report.sup_exceed_md,
        regulator_active_fraction=report.regulator_active_fraction,
    )


@app.post("/mdp-tail", response_model=s.MdpTailResponse)
def mdp_tail(req: s.MdpTailRequest) -> s.MdpTailResponse:
    try:
        params = req.config.to_params()
        event = recursion.TailEvent(kind=req.event.kind, a=req.event.a)
        target = req.target
        if target is None:
            case = "w-zero" if params.mu == 0 else "w-pos"
            rp = ratefn.RateParams(
                mu=params.mu, theta=params.theta, sigma_x=params.sigma_x,
                sigma_theta=params.sigma_theta, r=params.r, initial=0.0,
            )
            target = tailprob.endpoint_target(rp, req.event.a, case, params.horizon)
        est = tailprob.estimate_decay(
            params, event, req.n_ladder, req.reps, req.config.seed, target
        )
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    lines = ["n,b_n,p_hat,se,rate,censored_lower_bound"]
    for i, n in enumerate(est.n_ladder):
        se = est.standard_errors[i]
        rate_i = est.rates[i]
        cens = est.censored_rate_lower_bounds[i]
        lines.append(
            ",".join(
                [
                    str(n),
                    _fmt(est.b_values[i]),
                    _fmt(est.p_hats[i]),
                    "insufficient" if se is None else _fmt(se),
                    "" if rate_i is None else _fmt(rate_i),
                    "" if cens is None else _fmt(cens),
                ]
            )
        )
    suggestion = None
    if est.p_hats[0] * req.reps < 10:
        rp_s = ratefn.RateParams(
            mu=params.mu, theta=params.theta, sigma_x=params.sigma_x,
            sigma_theta=params.sigma_theta, r=params.r, initial=0.0,
        )
        suggestion = tailprob.suggest_threshold(
            rp_s, req.n_ladder[0], params.beta, req.reps, params.horizon
        )
    return s.MdpTailResponse(
        n_ladder=est.n_ladder,
        b_values=est.b_values,
        p_hats=est.p_hats,
        standard_errors=est.standard_errors,
        rates=est.rates,
        censored_rate_lower_bounds=est.censored_rate_lower_bounds,
        target=est.target,
        trend=est.trend,
        within_band=est.within_band,
        csv="\n".join(lines) + "\n",
        suggested_threshold=suggestion,
    )


@app.post("/oracle", response_model=s.OracleResponse)
def oracle_endpoint(req: s.OracleRequest) -> s.OracleResponse:
    results = oracle.run_all_suites(seed=req.seed, cases=req.cases)
    lines = ["suite,cases,failures,passed"]
    for r in results:
        lines.append(f"{r.suite},{r.cases},{r.failures},{str(r.passed).lower()}")
    return s.OracleResponse(
        suites=[
            s.SuiteRow(suite=r.suite, cases=r.cases, failures=r.failures, passed=r.passed)
            for r in results
        ],
        all_passed=all(r.passed for r in results),
        csv="\n".join(lines) + "\n",
    )
