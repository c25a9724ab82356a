"""Empirical moderate-deviation decay rates vs rate-function infima.

For an event A on the MD-scaled workload view, the sample-path MDP predicts

    -(1/b_n^2) log P(A)  ->  inf { I(phi) : phi in A },   b_n = n^beta.

``endpoint_target`` computes the infimum over {phi(T) = a} two ways (a
numerical minimization over piecewise-linear paths, and the exact value
a^2/(2 sigma^2 T) in the driftless random-walk case); ``estimate_decay``
estimates the left side by plain Monte Carlo along an n ladder. Plain Monte
Carlo only: importance sampling for the random-coefficient recursion is a
research problem, not plumbing, so feasible events must keep
b_n^2 * rate below roughly 9 (p_hat >= 1e-4 at desk scale). Cells with zero
hits are reported as censored lower bounds, never as failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .distributions import ModelParams, b_n
from .paths import Grid, PiecewiseLinearPath
from .ratefn import RateCase, RateParams, rate_closed_form
from .recursion import TailEstimate, TailEvent, md_tail_sample

__all__ = [
    "DecayEstimate",
    "endpoint_target",
    "endpoint_target_exact_rw",
    "estimate_decay",
    "suggest_threshold",
]


def endpoint_target_exact_rw(a: float, sigma_x: float, horizon: float) -> float:
    """Exact infimum for the driftless random-walk endpoint event: a^2/(2 sigma^2 T).

    The straight line from 0 to a is the minimizer of the quadratic action
    with a fixed endpoint; reflection does not bind since the line stays
    nonnegative.
    """
    return a**2 / (2.0 * sigma_x**2 * horizon)


def _rate_and_grad(nodes: np.ndarray, p: RateParams, case: RateCase, grid: Grid):
    dt = grid.dt
    slopes = np.diff(nodes) / dt
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    f = slopes - p.r + p.theta * mids
    if case in ("w-pos", "v-pos"):
        coef = p.theta**2 / (2.0 * (p.theta**2 * p.sigma_x**2 + p.mu**2 * p.sigma_theta**2))
        weights = np.full_like(f, coef)
    elif case == "v-zero":
        weights = np.full_like(f, 1.0 / (2.0 * p.sigma_x**2))
    else:  # w-zero: indicator weight; the boundary term is constant in the
        # interior nodes wherever the indicator does not flip, so it is
        # omitted from the smooth objective (r <= 0 events keep it zero).
        thresh = 1e-12 * (1.0 + float(np.max(np.abs(nodes))))
        weights = np.where(mids > thresh, 1.0 / (2.0 * p.sigma_x**2), 0.0)
    value = float(np.sum(weights * f**2) * dt)
    # d value / d node_j collects the two cells meeting at node j
    df = 2.0 * dt * weights * f
    grad = np.zeros_like(nodes)
    grad[:-1] += df * (-1.0 / dt + p.theta / 2.0)
    grad[1:] += df * (1.0 / dt + p.theta / 2.0)
    return value, grad


def endpoint_target(
    p: RateParams,
    a: float,
    case: RateCase,
    horizon: float,
    cells: int = 200,
    restarts: int = 3,
) -> float:
    """inf { I(phi) : phi(T) >= a } by numerical minimization.

    When the zero-cost path already ends at or above ``a`` the infimum is 0;
    otherwise the constraint binds and the minimization runs with the
    endpoint pinned at ``a``, over interior nodes of a piecewise-linear path
    with phi(0) = p.initial, L-BFGS-B with exact gradients, multiple starts;
    W cases are box-constrained to phi >= 0.
    """
    if cells > 200:
        raise ValueError("oracle grids are capped at 200 cells")
    grid = Grid(horizon, cells)
    from .ratefn import zero_cost_path

    base = zero_cost_path(p, case, grid).node_values
    if base[-1] >= a:
        return 0.0
    target_end = a

    def objective(free: np.ndarray):
        nodes = np.concatenate(([p.initial], free, [target_end]))
        return _rate_and_grad(nodes, p, case, grid)

    def objective_value_grad(free: np.ndarray):
        v, g = objective(free)
        return v, g[1:-1]

    bounds = None
    if case in ("w-pos", "w-zero"):
        bounds = [(0.0, None)] * (cells - 1)
    best = math.inf
    t = grid.times()
    starts = [
        np.interp(t[1:-1], [0.0, horizon], [p.initial, target_end]),
        base[1:-1] + (target_end - base[-1]) * t[1:-1] / horizon,
    ]
    rng = np.random.default_rng(0)
    for _ in range(max(0, restarts - len(starts))):
        starts.append(
            np.interp(t[1:-1], [0.0, horizon], [p.initial, target_end])
            + 0.1 * (1 + abs(a)) * rng.standard_normal(cells - 1)
        )
    for x0 in starts:
        if bounds is not None:
            x0 = np.maximum(x0, 0.0)
        res = minimize(
            objective_value_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-12},
        )
        if not res.success and not math.isfinite(res.fun):
            raise RuntimeError(f"endpoint minimization did not converge: {res.message}")
        best = min(best, float(res.fun))
    # verify with the production evaluator on the minimizing class
    check_nodes = np.concatenate(([p.initial], starts[0], [target_end]))
    check = rate_closed_form(PiecewiseLinearPath(grid, check_nodes), p, case)
    if math.isfinite(check) and check < best - 1e-12:
        best = check
    return best


def suggest_threshold(
    p: RateParams, n: int, beta: float, reps: int, horizon: float, min_hits: int = 10
) -> float:
    """Largest endpoint deviation keeping the expected hit count above ``min_hits``.

    Uses the Gaussian-tail approximation exp(-b_n^2 a^2/(2 sigma^2 T)) for
    the driftless sanity regime; a planning aid, not a guarantee.
    """
    budget = math.log(reps / min_hits)
    return math.sqrt(max(budget, 0.0) * 2.0 * p.sigma_x**2 * horizon) / b_n(n, beta)


@dataclass(frozen=True)
class DecayEstimate:
    n_ladder: list[int]
    b_values: list[float]
    p_hats: list[float]
    standard_errors: list[Optional[float]]
    rates: list[Optional[float]]  # None where the cell is censored (no hits)
    censored_rate_lower_bounds: list[Optional[float]]  # from the 95% upper CI on p
    target: float
    trend: str  # toward | away | flat | insufficient
    within_band: Optional[bool]  # last uncensored rung within +-30% of target


def estimate_decay(
    params: ModelParams,
    event: TailEvent,
    n_ladder: list[int],
    reps: int,
    seed: int,
    target: float,
    band: float = 0.30,
) -> DecayEstimate:
    """Monte Carlo decay-rate ladder -(1/b_n^2) log p_hat against ``target``.

    One independent seed branch per rung; a fixed master seed reproduces the
    estimate bit for bit. The +-30% default band at the final rung reflects
    unknown subexponential prefactors; the trend across rungs is the stronger
    signal and is reported alongside.
    """
    if list(n_ladder) != sorted(n_ladder):
        raise ValueError("n_ladder must be ascending")
    estimates: list[TailEstimate] = []
    for rung, n in enumerate(n_ladder):
        estimates.append(md_tail_sample(params, n, event, reps, seed, seed_prefix=rung))
    b_values = [b_n(n, params.beta) for n in n_ladder]
    p_hats = [e.p_hat for e in estimates]
    ses = [e.se for e in estimates]
    rates: list[Optional[float]] = []
    censored: list[Optional[float]] = []
    for e, b in zip(estimates, b_values):
        if e.hits > 0:
            rates.append(-math.log(e.p_hat) / b**2)
            censored.append(None)
        else:
            rates.append(None)
            censored.append(-math.log(e.p_upper_95) / b**2)
    usable = [r for r in rates if r is not None]
    if len(usable) >= 2:
        first_gap = abs(usable[0] - target)
        last_gap = abs(usable[-1] - target)
        if math.isclose(first_gap, last_gap, rel_tol=1e-9, abs_tol=1e-12):
            trend = "flat"
        else:
            trend = "toward" if last_gap < first_gap else "away"
    else:
        trend = "insufficient"
    last_rate = rates[-1]
    within = None
    if last_rate is not None and target > 0:
        within = abs(last_rate - target) <= band * target
    return DecayEstimate(
        n_ladder=list(n_ladder),
        b_values=b_values,
        p_hats=p_hats,
        standard_errors=ses,
        rates=rates,
        censored_rate_lower_bounds=censored,
        target=target,
        trend=trend,
        within_band=within,
    )
