"""Moderate-deviation rate functionals and their variational cross-check.

Four explicit evaluators on piecewise-linear paths phi (midpoint quadrature;
slopes and midpoint values per cell; +inf outside the admissible class):

* ``rate_rw``          -- driving random walk: (1/(2 sigma^2)) int |phi'|^2,
                          finite only when phi(0) = 0.
* ``rate_w_positive``  -- reflected workload, positive center mu/theta
                          (mu > 0, theta > 0): requires phi >= 0, phi(0) = w0,
                          density (theta^2 / (2(theta^2 sx^2 + mu^2 st^2)))
                          * (phi' - r + theta*phi)^2.
* ``rate_w_zero``      -- reflected workload, zero center (mu = 0,
                          theta >= 0): the same quadratic density on
                          {phi > 0} at weight 1/(2 sx^2), plus a boundary
                          cost (r^2/(2 sx^2)) * Leb{phi = 0} active only
                          for r > 0.
* ``rate_v``           -- unreflected recursion: as above but without the
                          nonnegativity constraint and with no boundary term.

``variational_oracle`` independently minimizes the underlying two-noise
optimization cell by cell with a numerical one-dimensional solver (and, for
the reflected zero-center case, a projected program in the regulator slope
with a coarse grid-search double check). The closed forms are the exact
infima, so oracle values can only sit above them by solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .paths import Grid, PiecewiseLinearPath

__all__ = [
    "RateParams",
    "RateReport",
    "RateCase",
    "rate_rw",
    "rate_w_positive",
    "rate_w_zero",
    "rate_v",
    "rate_closed_form",
    "optimal_decomposition",
    "variational_oracle",
    "evaluate_report",
    "zero_cost_path",
    "eps_zero",
]

RateCase = Literal["w-pos", "w-zero", "v-pos", "v-zero"]
INF = math.inf


@dataclass(frozen=True)
class RateParams:
    mu: float
    theta: float
    sigma_x: float
    sigma_theta: float
    r: float
    initial: float  # w0 (reflected cases) or v0 (linear cases), at MD scale

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ValueError(f"sigma_x must be > 0, got {self.sigma_x}")
        if self.sigma_theta < 0:
            raise ValueError("sigma_theta must be >= 0")


def _require_case(p: RateParams, case: RateCase) -> None:
    if case == "w-pos":
        if not (p.mu > 0 and p.theta > 0):
            raise ValueError("positive-center workload case needs mu > 0 and theta > 0")
    elif case == "w-zero":
        if not (p.mu == 0 and p.theta >= 0):
            raise ValueError("zero-center workload case needs mu = 0 and theta >= 0")
    elif case == "v-pos":
        if not (p.theta > 0 and p.mu != 0):
            raise ValueError("positive-center linear case needs theta > 0 and mu != 0")
    elif case == "v-zero":
        if not (p.mu == 0 and p.theta >= 0):
            raise ValueError("zero-center linear case needs mu = 0 and theta >= 0")
    else:
        raise ValueError(f"unknown case {case!r}")


def eps_zero(phi: PiecewiseLinearPath) -> float:
    """Threshold below which a midpoint value counts as exactly zero.

    The zero/positive sets are exact in the continuum; on a grid the
    threshold only guards rounding of paths built with exact zero segments.
    """
    return 1e-12 * (1.0 + float(np.max(np.abs(phi.node_values))))


def _cell_data(phi: PiecewiseLinearPath) -> tuple[float, np.ndarray, np.ndarray]:
    return phi.grid.dt, phi.slopes(), phi.midpoints()


def _starts_at(phi: PiecewiseLinearPath, value: float) -> bool:
    return abs(phi.node_values[0] - value) <= eps_zero(phi)


def _pos_center_coef(p: RateParams) -> float:
    denom = p.theta**2 * p.sigma_x**2 + p.mu**2 * p.sigma_theta**2
    return p.theta**2 / (2.0 * denom)


def rate_rw(phi: PiecewiseLinearPath, sigma: float) -> float:
    """Random-walk rate (1/(2 sigma^2)) int |phi'|^2 dt; +inf unless phi(0) = 0."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if not _starts_at(phi, 0.0):
        return INF
    dt, slopes, _ = _cell_data(phi)
    return float(np.sum(slopes**2) * dt / (2.0 * sigma**2))


def rate_w_positive(phi: PiecewiseLinearPath, p: RateParams) -> float:
    _require_case(p, "w-pos")
    if not _starts_at(phi, p.initial):
        return INF
    if np.min(phi.node_values) < -eps_zero(phi):
        return INF
    dt, slopes, mids = _cell_data(phi)
    f = slopes - p.r + p.theta * mids
    return float(_pos_center_coef(p) * np.sum(f**2) * dt)


def rate_w_zero(phi: PiecewiseLinearPath, p: RateParams) -> float:
    _require_case(p, "w-zero")
    if not _starts_at(phi, p.initial):
        return INF
    if np.min(phi.node_values) < -eps_zero(phi):
        return INF
    dt, slopes, mids = _cell_data(phi)
    positive = mids > eps_zero(phi)
    f = slopes - p.r + p.theta * mids
    interior = np.sum(f[positive] ** 2) * dt / (2.0 * p.sigma_x**2)
    boundary = 0.0
    if p.r > 0:
        boundary = p.r**2 / (2.0 * p.sigma_x**2) * dt * float(np.count_nonzero(~positive))
    return float(interior + boundary)


def rate_v(phi: PiecewiseLinearPath, p: RateParams, case: str) -> float:
    """Unreflected-recursion rate; ``case`` is 'pos_center' or 'zero_center'."""
    alias = {"pos_center": "v-pos", "zero_center": "v-zero"}
    _require_case(p, alias[case])
    if not _starts_at(phi, p.initial):
        return INF
    dt, slopes, mids = _cell_data(phi)
    f = slopes - p.r + p.theta * mids
    if case == "pos_center":
        return float(_pos_center_coef(p) * np.sum(f**2) * dt)
    return float(np.sum(f**2) * dt / (2.0 * p.sigma_x**2))


def rate_closed_form(phi: PiecewiseLinearPath, p: RateParams, case: RateCase) -> float:
    if case == "w-pos":
        return rate_w_positive(phi, p)
    if case == "w-zero":
        return rate_w_zero(phi, p)
    if case == "v-pos":
        return rate_v(phi, p, "pos_center")
    if case == "v-zero":
        return rate_v(phi, p, "zero_center")
    raise ValueError(f"unknown case {case!r}")


def zero_cost_path(p: RateParams, case: RateCase, grid: Grid) -> PiecewiseLinearPath:
    """The piecewise-linear path with vanishing cost under midpoint quadrature.

    Solves slope_k = r - theta * midpoint_k exactly per cell:
    phi_{k+1}(1 + theta dt/2) = phi_k(1 - theta dt/2) + r dt. For the
    reflected zero-center case with r <= 0 the zero path is the zero-cost one.
    """
    _require_case(p, case)
    if case == "w-zero" and p.r <= 0:
        return PiecewiseLinearPath(grid, np.zeros(grid.steps + 1))
    dt = grid.dt
    vals = np.empty(grid.steps + 1)
    vals[0] = p.initial
    num, den = 1.0 - p.theta * dt / 2.0, 1.0 + p.theta * dt / 2.0
    for k in range(grid.steps):
        vals[k + 1] = (vals[k] * num + p.r * dt) / den
    return PiecewiseLinearPath(grid, vals)


def optimal_decomposition(
    phi: PiecewiseLinearPath, p: RateParams
) -> tuple[PiecewiseLinearPath, PiecewiseLinearPath]:
    """Minimizing noise perturbations (psi1, psi2) for the positive-center case.

    With f = phi' - r + theta*phi, the inner optimization is solved by
    psi1' = theta^2 sx^2 / (theta^2 sx^2 + mu^2 st^2) * f and
    psi2' = -mu theta st^2 / (theta^2 sx^2 + mu^2 st^2) * f; both paths start
    at zero. Their combined cost reproduces the closed-form rate and phi is
    recovered from them through the linear-drift map.
    """
    if not (p.theta > 0 and p.mu != 0):
        raise ValueError("the decomposition needs the positive-center case")
    dt, slopes, mids = _cell_data(phi)
    f = slopes - p.r + p.theta * mids
    denom = p.theta**2 * p.sigma_x**2 + p.mu**2 * p.sigma_theta**2
    s1 = (p.theta**2 * p.sigma_x**2 / denom) * f
    s2 = (-p.mu * p.theta * p.sigma_theta**2 / denom) * f
    psi1 = np.concatenate(([0.0], np.cumsum(s1 * dt)))
    psi2 = np.concatenate(([0.0], np.cumsum(s2 * dt)))
    return (
        PiecewiseLinearPath(phi.grid, psi1),
        PiecewiseLinearPath(phi.grid, psi2),
    )


# ---------------------------------------------------------------------------
# Variational oracle
# ---------------------------------------------------------------------------


def _minimize_cell_two_noise(f_k: float, kappa: float, sx: float, st: float) -> float:
    """Numerically minimize (f + kappa*q)^2/(2 sx^2) + q^2/(2 st^2) over q.

    The minimizer satisfies |q*| <= |f| * st / (2 sx), so a symmetric bracket
    around zero is guaranteed to contain it.
    """
    if st == 0.0:
        return f_k**2 / (2.0 * sx**2)

    def objective(q: float) -> float:
        return (f_k + kappa * q) ** 2 / (2.0 * sx**2) + q**2 / (2.0 * st**2)

    bound = (1.0 + abs(f_k)) * (1.0 + st / sx)
    res = minimize_scalar(
        objective, method="bounded", bounds=(-bound, bound), options={"xatol": 1e-12}
    )
    return float(res.fun)


def _minimize_cell_regulator(r: float, sx: float, method: str) -> float:
    """Minimize (r + y)^2/(2 sx^2) over regulator slopes y >= 0."""
    hi = 2.0 * abs(r) + 1.0

    def objective(y: float) -> float:
        return (r + y) ** 2 / (2.0 * sx**2)

    if method == "gridsearch":
        ys = np.linspace(0.0, hi, 2001)
        return float(np.min((r + ys) ** 2) / (2.0 * sx**2))
    res = minimize_scalar(objective, method="bounded", bounds=(0.0, hi), options={"xatol": 1e-12})
    return float(min(res.fun, objective(0.0)))


def variational_oracle(
    phi: PiecewiseLinearPath,
    p: RateParams,
    case: RateCase,
    method: str = "projected",
) -> float:
    """Minimize the two-noise cost over perturbations reproducing phi.

    The path constraint pins, cell by cell, the combination
    psi1' - (mu/theta) psi2' (positive center) or psi1' (zero center) to
    f = phi' - r + theta*phi at the midpoint-quadrature convention, leaving at
    most one free scalar per cell; that scalar is optimized numerically.
    ``method='gridsearch'`` switches the zero-center regulator program to a
    coarse grid search (an independent second check).

    Grids beyond 200 cells are refused: the oracle is a verification tool,
    not a production evaluator.
    """
    if phi.grid.steps > 200:
        raise ValueError("oracle grids are capped at 200 cells")
    if method not in ("projected", "gridsearch"):
        raise ValueError(f"unknown method {method!r}")
    _require_case(p, case)
    if not _starts_at(phi, p.initial):
        return INF
    if case in ("w-pos", "w-zero") and np.min(phi.node_values) < -eps_zero(phi):
        return INF
    dt, slopes, mids = _cell_data(phi)
    f = slopes - p.r + p.theta * mids
    total = 0.0
    if case in ("w-pos", "v-pos"):
        kappa = p.mu / p.theta
        for f_k in f:
            total += _minimize_cell_two_noise(float(f_k), kappa, p.sigma_x, p.sigma_theta)
        return total * dt
    if case == "v-zero":
        # the constraint leaves no free variable: psi1' = f cell by cell
        return float(np.sum(f**2) * dt / (2.0 * p.sigma_x**2))
    # w-zero: regulator allocation on the zero set
    positive = mids > eps_zero(phi)
    for k in range(len(f)):
        if positive[k]:
            total += f[k] ** 2 / (2.0 * p.sigma_x**2)
        else:
            total += _minimize_cell_regulator(p.r, p.sigma_x, method)
    return total * dt


@dataclass(frozen=True)
class RateReport:
    value_closed_form: float
    value_variational: float
    gap: float  # relative difference
    psi1: Optional[PiecewiseLinearPath]
    psi2: Optional[PiecewiseLinearPath]
    y: Optional[PiecewiseLinearPath]


def evaluate_report(phi: PiecewiseLinearPath, p: RateParams, case: RateCase) -> RateReport:
    """Closed form vs oracle plus the optimal perturbation paths."""
    closed = rate_closed_form(phi, p, case)
    oracle = variational_oracle(phi, p, case)
    if math.isinf(closed) or math.isinf(oracle):
        gap = 0.0 if closed == oracle else INF
    else:
        gap = abs(closed - oracle) / max(abs(closed), 1e-300)
    psi1 = psi2 = y_path = None
    dt, slopes, mids = _cell_data(phi)
    f = slopes - p.r + p.theta * mids
    if case in ("w-pos", "v-pos") and math.isfinite(closed):
        psi1, psi2 = optimal_decomposition(phi, p)
    elif case == "v-zero" and math.isfinite(closed):
        psi1 = PiecewiseLinearPath(phi.grid, np.concatenate(([0.0], np.cumsum(f * dt))))
    elif case == "w-zero" and math.isfinite(closed):
        positive = mids > eps_zero(phi)
        y_star = -p.r if p.r < 0 else 0.0
        s1 = np.where(positive, f, -(p.r + y_star))
        y_slope = np.where(positive, 0.0, y_star)
        psi1 = PiecewiseLinearPath(phi.grid, np.concatenate(([0.0], np.cumsum(s1 * dt))))
        y_path = PiecewiseLinearPath(phi.grid, np.concatenate(([0.0], np.cumsum(y_slope * dt))))
    return RateReport(
        value_closed_form=closed,
        value_variational=oracle,
        gap=gap,
        psi1=psi1,
        psi2=psi2,
        y=y_path,
    )
