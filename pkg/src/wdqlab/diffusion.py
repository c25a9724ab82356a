"""Diffusion limits of the workload and their empirical verification.

In the positive-center regime the diffusion-scaled workload converges to an
Ornstein-Uhlenbeck process dX = (eta - theta X) dt + sigma dB with
sigma^2 = sigma_X^2 + (mu/theta)^2 sigma_Theta^2 and stationary law
N(eta/theta, sigma_X^2/(2 theta) + mu^2 sigma_Theta^2 / (2 theta^3)). In the
zero-center regime the limit is the same SDE reflected at zero (a reflected
Brownian motion when theta = 0), and in the underloaded regime the
diffusion-scaled workload collapses to 0.

Simulation is Euler-Maruyama with per-step positive-part reflection, the
same discrete operator family as the queue simulators, so discretization
bias partially cancels in comparisons. The diffusion time step is matched to
the queue's grid spacing 1/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fluid
from .distributions import ModelParams, rng_for
from .paths import Grid, StepPath
from .recursion import batch_w_endpoints

__all__ = [
    "DiffusionSpec",
    "OUEnsemble",
    "MomentReport",
    "FcltReport",
    "simulate_ou",
    "stationary_moments",
    "fclt_check",
]


@dataclass(frozen=True)
class DiffusionSpec:
    drift_eta: float
    theta: float
    sigma: float
    reflected: bool
    x0: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.reflected and self.x0 < 0:
            raise ValueError("a reflected diffusion needs x0 >= 0")


@dataclass(frozen=True)
class OUEnsemble:
    grid: Grid
    values: np.ndarray  # (reps, steps+1)

    def path(self, rep: int) -> StepPath:
        return StepPath(self.grid, self.values[rep])

    def marginal(self, k: int | None = None) -> np.ndarray:
        return self.values[:, -1 if k is None else k]


def simulate_ou(spec: DiffusionSpec, grid: Grid, reps: int, seed: int) -> OUEnsemble:
    """Euler-Maruyama ensemble: X_{k+1} = X_k + (eta - theta X_k) dt + sigma sqrt(dt) xi.

    When ``spec.reflected`` the positive part is applied each step (the
    discrete reflection scheme consistent with the grid operators).
    Replication ``b`` uses the stream keyed by (seed, b).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if reps * (grid.steps + 1) > 50_000_000:
        raise ValueError("ensemble too large to hold in memory; coarsen the grid or split reps")
    dt = grid.dt
    sqdt = math.sqrt(dt)
    values = np.empty((reps, grid.steps + 1))
    noise = np.empty((reps, grid.steps))
    for b in range(reps):
        noise[b] = rng_for(seed, b).standard_normal(grid.steps)
    x = np.full(reps, float(spec.x0))
    values[:, 0] = x
    for k in range(grid.steps):
        x = x + (spec.drift_eta - spec.theta * x) * dt + spec.sigma * sqdt * noise[:, k]
        if spec.reflected:
            np.maximum(x, 0.0, out=x)
        values[:, k + 1] = x
    return OUEnsemble(grid=grid, values=values)


def stationary_moments(
    mu: float, theta: float, sigma_x: float, sigma_theta: float, eta: float
) -> tuple[float, float]:
    """Stationary mean and variance of the positive-center limit:
    m = eta/theta, s^2 = sigma_X^2/(2 theta) + mu^2 sigma_Theta^2/(2 theta^3)."""
    if theta <= 0:
        raise ValueError("stationary moments need theta > 0")
    m = eta / theta
    s2 = sigma_x**2 / (2.0 * theta) + mu**2 * sigma_theta**2 / (2.0 * theta**3)
    return m, s2


@dataclass(frozen=True)
class MomentReport:
    empirical_mean: float
    empirical_var: float
    target_mean: float
    target_var: float
    z_mean: float
    z_var: float
    ks_statistic: Optional[float]  # descriptive only; no hard threshold


@dataclass(frozen=True)
class FcltReport:
    case: str
    n: int
    reps: int
    t_eval: float
    moments: Optional[MomentReport]
    sup_exceed_diffusion: Optional[float]  # P(sup |diffusion view| > delta)
    sup_exceed_md: Optional[float]  # P(sup md view > delta)
    regulator_active_fraction: Optional[float]


def _two_sample_moment_report(queue: np.ndarray, limit: np.ndarray) -> MomentReport:
    qm, lm = float(np.mean(queue)), float(np.mean(limit))
    qv, lv = float(np.var(queue, ddof=1)), float(np.var(limit, ddof=1))
    nq, nl = len(queue), len(limit)
    se_mean = math.sqrt(qv / nq + lv / nl)
    se_var = math.sqrt(2.0 * qv**2 / (nq - 1) + 2.0 * lv**2 / (nl - 1))
    return MomentReport(
        empirical_mean=qm,
        empirical_var=qv,
        target_mean=lm,
        target_var=lv,
        z_mean=(qm - lm) / se_mean,
        z_var=(qv - lv) / se_var,
        ks_statistic=_ks_two_sample(queue, limit),
    )


def _one_sample_moment_report(queue: np.ndarray, m: float, s2: float) -> MomentReport:
    qm = float(np.mean(queue))
    qv = float(np.var(queue, ddof=1))
    n = len(queue)
    se_mean = math.sqrt(qv / n)
    se_var = qv * math.sqrt(2.0 / (n - 1))
    return MomentReport(
        empirical_mean=qm,
        empirical_var=qv,
        target_mean=m,
        target_var=s2,
        z_mean=(qm - m) / se_mean,
        z_var=(qv - s2) / se_var,
        ks_statistic=None,
    )


def _ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    pooled = np.sort(np.concatenate([a, b]))
    cdf_a = np.searchsorted(np.sort(a), pooled, side="right") / len(a)
    cdf_b = np.searchsorted(np.sort(b), pooled, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def fclt_check(
    params: ModelParams,
    eta: float,
    n: int,
    t_eval: float,
    reps: int,
    seed: int,
    case: str,
    delta: float = 0.5,
    compare_to_stationary: bool = True,
) -> FcltReport:
    """Compare the diffusion-scaled queue against its limit process.

    The queue runs with drift mu_n = mu + eta/sqrt(n) (the central-limit
    drift convention, replacing the moderate-deviation one). Cases:

    * "i"   (mu > 0, theta > 0): the marginal of sqrt(n)(W/n - mu/theta) at
      t_eval against the OU limit -- against its stationary moments when
      ``compare_to_stationary`` (sensible for t_eval >> 1/theta), otherwise
      against a simulated OU ensemble started at the queue's initial value.
    * "ii"  (mu = 0, theta >= 0): two-sample comparison against the simulated
      reflected limit marginal.
    * "iii" (mu < 0): the limit is 0; reports exceedance probabilities of the
      sup of the diffusion and the moderate-deviation views.
    """
    mu, theta = params.mu, params.theta
    if case == "i" and not (mu > 0 and theta > 0):
        raise ValueError("case i needs mu > 0 and theta > 0")
    if case == "ii" and not (mu == 0 and theta >= 0):
        raise ValueError("case ii needs mu = 0 and theta >= 0")
    if case == "iii" and not (mu < 0):
        raise ValueError("case iii needs mu < 0")

    x_shift = eta / math.sqrt(n)
    stats = batch_w_endpoints(
        params, n, reps, seed, seed_prefix=1, x_shift=x_shift, t_eval=t_eval
    )
    center = fluid.classify_w(mu, theta).stable_point or 0.0
    sqn = math.sqrt(n)
    queue_marginal = sqn * (stats["endpoint_raw"] / n - center)
    reg_fraction = float(np.mean(stats["l_final_raw"] > 0.0))

    if case == "i":
        sigma = math.sqrt(params.sigma_x**2 + (mu / theta) ** 2 * params.sigma_theta**2)
        if compare_to_stationary:
            m, s2 = stationary_moments(mu, theta, params.sigma_x, params.sigma_theta, eta)
            bias = abs(sqn * (params.w0 - center) - m) * math.exp(-theta * t_eval)
            if bias > 0.05 * math.sqrt(s2):
                raise ValueError(
                    "t_eval too small for a stationary comparison from this initial value"
                )
            moments = _one_sample_moment_report(queue_marginal, m, s2)
        else:
            spec = DiffusionSpec(
                drift_eta=eta, theta=theta, sigma=sigma, reflected=False,
                x0=sqn * (params.w0 - center),
            )
            grid = Grid.from_level(n, t_eval)
            limit = simulate_ou(spec, grid, reps, seed + 1).marginal()
            moments = _two_sample_moment_report(queue_marginal, limit)
        return FcltReport(case, n, reps, t_eval, moments, None, None, reg_fraction)

    if case == "ii":
        spec = DiffusionSpec(
            drift_eta=eta, theta=theta, sigma=params.sigma_x, reflected=True,
            x0=sqn * params.w0,
        )
        grid = Grid.from_level(n, t_eval)
        limit = simulate_ou(spec, grid, reps, seed + 1).marginal()
        moments = _two_sample_moment_report(queue_marginal, limit)
        return FcltReport(case, n, reps, t_eval, moments, None, None, reg_fraction)

    # case iii: the limit is the zero process
    scale_md = sqn / float(n) ** params.beta
    sup_diff = sqn * (stats["max_raw"] / n - center)
    sup_md = scale_md * (stats["max_raw"] / n - center)
    return FcltReport(
        case,
        n,
        reps,
        t_eval,
        None,
        float(np.mean(sup_diff > delta)),
        float(np.mean(sup_md > delta)),
        reg_fraction,
    )
