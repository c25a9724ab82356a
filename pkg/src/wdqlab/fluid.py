"""Closed-form fluid limits and stability classification.

The law-of-large-numbers limit of the workload obeys
dW(t) = mu - theta*W(t) + dL(t) with reflection at zero; the unreflected
linear recursion has the same ODE without the regulator. All nine sign
combinations of (mu, theta) are classified analytically, never inferred from
simulation. theta = 0 gets dedicated branches so mu/theta is never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import ModelParams
from .paths import Grid, StepPath

__all__ = [
    "RegimeClassification",
    "classify_w",
    "classify_v",
    "fluid_w",
    "fluid_v",
    "hitting_time_w",
    "fluid_convergence_report",
    "ConvergenceRow",
]


def _sign_label(x: float) -> str:
    return "pos" if x > 0 else ("zero" if x == 0 else "neg")


@dataclass(frozen=True)
class RegimeClassification:
    load: str  # overloaded | critical | underloaded (sign of mu)
    theta_sign: str  # pos | zero | neg
    stable_point: Optional[float]  # None when no stable fixed point exists
    initial_condition_dependent: bool = False
    secondary_fixed_point: Optional[float] = None

    @property
    def stable(self) -> bool:
        return self.stable_point is not None


def classify_w(mu: float, theta: float) -> RegimeClassification:
    """Stable fixed point of the reflected fluid limit.

    Overloaded (mu > 0): mu/theta when theta > 0, otherwise unstable.
    Critical (mu = 0): 0 when theta >= 0, otherwise unstable.
    Underloaded (mu < 0): 0 for every theta; when theta < 0 stability holds
    only for initial values below mu/theta, which is flagged, and mu/theta
    itself is an unstable fixed point reported separately.
    """
    load = {"pos": "overloaded", "zero": "critical", "neg": "underloaded"}[_sign_label(mu)]
    ts = _sign_label(theta)
    if mu > 0:
        point = mu / theta if theta > 0 else None
        return RegimeClassification(load, ts, point)
    if mu == 0:
        return RegimeClassification(load, ts, 0.0 if theta >= 0 else None)
    if theta < 0:
        return RegimeClassification(
            load, ts, 0.0, initial_condition_dependent=True, secondary_fixed_point=mu / theta
        )
    return RegimeClassification(load, ts, 0.0)


def classify_v(mu: float, theta: float) -> RegimeClassification:
    """Stable fixed point of the unreflected fluid limit: mu/theta when
    theta > 0 (including 0 when mu = 0); 0 when mu = 0, theta = 0; else none."""
    load = {"pos": "overloaded", "zero": "critical", "neg": "underloaded"}[_sign_label(mu)]
    ts = _sign_label(theta)
    if theta > 0:
        return RegimeClassification(load, ts, mu / theta)
    if theta == 0 and mu == 0:
        return RegimeClassification(load, ts, 0.0)
    return RegimeClassification(load, ts, None)


def hitting_time_w(mu: float, theta: float, w0: float) -> Optional[float]:
    """Time at which the fluid workload reaches zero, if it does in finite time.

    For mu < 0 with theta != 0 and w0 below mu/theta (automatic when
    theta > 0): t0 = -(1/theta) * log((mu/theta) / (mu/theta - w0)).
    For mu < 0, theta = 0: t0 = -w0/mu. Zero initial value hits immediately.
    """
    if w0 < 0:
        raise ValueError("w0 must be >= 0")
    if mu >= 0:
        return 0.0 if (w0 == 0.0 and mu == 0.0 and theta >= 0) else None
    if w0 == 0.0:
        return 0.0
    if theta == 0.0:
        return -w0 / mu
    fixed = mu / theta
    if theta < 0 and w0 >= fixed:
        return None  # escapes upward (or sits on the unstable fixed point)
    return -(1.0 / theta) * math.log(fixed / (fixed - w0))


def _exp_solution(mu: float, theta: float, y0: float, t: np.ndarray) -> np.ndarray:
    if theta == 0.0:
        return y0 + mu * t
    fixed = mu / theta
    return fixed + (y0 - fixed) * np.exp(-theta * t)


def fluid_w(mu: float, theta: float, w0: float, grid: Grid) -> StepPath:
    """Fluid workload path on the grid, including the reflected-at-zero branch.

    In every regime with w0 >= 0 the unreflected ODE solution stays
    nonnegative until (possibly) crossing zero once with negative drift, after
    which the regulated path is identically zero; clipping at zero therefore
    reproduces the reflected solution exactly.
    """
    if w0 < 0:
        raise ValueError("w0 must be >= 0")
    t = grid.times()
    vals = _exp_solution(mu, theta, w0, t)
    if mu < 0:
        vals = np.maximum(vals, 0.0)
    return StepPath(grid, vals)


def fluid_v(mu: float, theta: float, v0: float, grid: Grid) -> StepPath:
    """Unreflected fluid path mu/theta + (v0 - mu/theta) e^{-theta t}
    (v0 + mu t when theta = 0)."""
    return StepPath(grid, _exp_solution(mu, theta, v0, grid.times()))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    reps: int
    mean_sup_error: float
    se: float
    q10: float
    q50: float
    q90: float


def fluid_convergence_report(
    params: ModelParams,
    n_ladder: list[int],
    reps: int,
    seed: int,
    process: str = "w",
    v0: float | None = None,
) -> list[ConvergenceRow]:
    """Sup-distance of simulated fluid views to the closed form, per ladder rung.

    The mean sup-error should be nonincreasing along an ascending ladder up to
    its own standard error.
    """
    from .recursion import batch_fluid_sup_errors  # local import: recursion imports fluid

    if list(n_ladder) != sorted(n_ladder):
        raise ValueError("n_ladder must be ascending")
    rows = []
    for rung, n in enumerate(n_ladder):
        grid = Grid.from_level(n, params.horizon)
        if process == "w":
            reference = fluid_w(params.mu, params.theta, params.w0, grid)
        elif process == "v":
            if v0 is None:
                raise ValueError("v0 required for the unreflected process")
            reference = fluid_v(params.mu, params.theta, v0, grid)
        else:
            raise ValueError(f"unknown process {process!r}")
        errors = batch_fluid_sup_errors(
            params, n, reps, seed, rung, reference, process=process, v0=v0
        )
        rows.append(
            ConvergenceRow(
                n=n,
                reps=reps,
                mean_sup_error=float(np.mean(errors)),
                se=float(np.std(errors, ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan"),
                q10=float(np.quantile(errors, 0.1)),
                q50=float(np.quantile(errors, 0.5)),
                q90=float(np.quantile(errors, 0.9)),
            )
        )
    return rows
