"""Exact simulation of the reflected and unreflected recursions.

Raw dynamics at level n, driven by i.i.d. draws Theta_i (weights) and X_i
(increments) with C_i = 1 - Theta_i/n:

* reflected workload:   W_{i+1} = (C_i W_i + X_i)^+  with regulator
  L_i = sum_{j<=i} Psi_j, Psi_j the clipped amounts;
* linear recursion:     V_{i+1} = C_i V_i + X_i  (no reflection);
* envelope Upsilon:     running max over the suffix product-sums, an upper
  bound for W pathwise on the coupled noise stream.

Each simulation call produces one raw path and derives the three scaled
views from it (fluid W/n, diffusion sqrt(n)(W/n - center), moderate-deviation
(sqrt(n)/b_n)(W/n - center)) so the views are consistent by construction.

Replications are independent jobs keyed by (seed, replication index); inside
one replication the recursion is strictly sequential. Batch helpers stream
blocks of replications through vectorized updates without changing any
per-replication draw sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import fluid
from .distributions import ModelParams, b_n, rng_for, x_mean_at
from .paths import Grid, StepPath

__all__ = [
    "SimOutput",
    "LinearSimOutput",
    "BoundingSystems",
    "TailEvent",
    "TailEstimate",
    "SimulationBlowup",
    "simulate_w",
    "simulate_v",
    "simulate_bounding_systems",
    "md_tail_sample",
    "iterate_w",
    "iterate_v",
    "iterate_bounding",
    "batch_fluid_sup_errors",
    "batch_w_endpoints",
    "batch_hitting_times",
]

_GUARD_INTERVAL = 1 << 16


class SimulationBlowup(RuntimeError):
    """Raised when an iterate leaves the finite floats (parameter blow-up)."""


# ---------------------------------------------------------------------------
# Pure kernels on explicit draw sequences
# ---------------------------------------------------------------------------


def iterate_w(
    theta_draws: np.ndarray,
    x_draws: np.ndarray,
    n: int,
    w0_raw: float,
    theta_center: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the reflected recursion; returns (w, l, xi) node arrays.

    w[k] = W_k, l[k] = L_{k-1} (regulator up to, not including, step k; l[0]=0)
    and xi is the fluid-scale driving input
    xi[k] = W_0/n + (1/n) sum_{i<k} X_i - (1/n) sum_{i<k} (Theta_i - c) W_i/n
    with c = theta_center, for which (w/n, l/n) is the linearly generalized
    reflection pair exactly on the grid.
    """
    steps = len(x_draws)
    if len(theta_draws) != steps:
        raise ValueError("draw sequences must have equal length")
    w = np.empty(steps + 1)
    l = np.empty(steps + 1)
    xi = np.empty(steps + 1)
    w[0] = w0_raw
    l[0] = 0.0
    xi[0] = w0_raw / n
    wk = float(w0_raw)
    lk = 0.0
    xik = w0_raw / n
    inv_n = 1.0 / n
    for i in range(steps):
        th = theta_draws[i]
        xik += x_draws[i] * inv_n - (th - theta_center) * (wk * inv_n) * inv_n
        cand = (1.0 - th * inv_n) * wk + x_draws[i]
        if cand >= 0.0:
            wk = cand
        else:
            lk -= cand
            wk = 0.0
        w[i + 1] = wk
        l[i + 1] = lk
        xi[i + 1] = xik
        if (i & (_GUARD_INTERVAL - 1)) == 0 and not math.isfinite(wk):
            raise SimulationBlowup(f"workload not finite at step {i + 1}")
    if not math.isfinite(wk):
        raise SimulationBlowup("workload not finite at the final step")
    return w, l, xi


def iterate_v(
    theta_draws: np.ndarray, x_draws: np.ndarray, n: int, v0_raw: float
) -> np.ndarray:
    """Run the unreflected linear recursion; returns the node array v[k] = V_k."""
    steps = len(x_draws)
    if len(theta_draws) != steps:
        raise ValueError("draw sequences must have equal length")
    v = np.empty(steps + 1)
    v[0] = v0_raw
    vk = float(v0_raw)
    inv_n = 1.0 / n
    for i in range(steps):
        vk = (1.0 - theta_draws[i] * inv_n) * vk + x_draws[i]
        v[i + 1] = vk
        if (i & (_GUARD_INTERVAL - 1)) == 0 and not math.isfinite(vk):
            raise SimulationBlowup(f"iterate not finite at step {i + 1}")
    if not math.isfinite(vk):
        raise SimulationBlowup("iterate not finite at the final step")
    return v


def iterate_bounding(
    theta_draws: np.ndarray, x_draws: np.ndarray, n: int, w0_raw: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coupled (w, upsilon, v, u_runmax) from one draw stream.

    Upsilon's candidate set evolves as S_{i+1} = {0} union (X_i + C_i * S_i)
    with S_0 = {W_0}; tracking the set's max and min gives the envelope in
    O(1) per step for either sign of C_i. The runs satisfy 0 <= W <= Upsilon
    pathwise; the comparison with V and the running max of U holds in
    distribution (the defining expansions reverse the draw order).
    """
    steps = len(x_draws)
    w = np.empty(steps + 1)
    ups = np.empty(steps + 1)
    v = np.empty(steps + 1)
    urm = np.empty(steps + 1)
    w[0] = ups[0] = v[0] = w0_raw
    urm[0] = 0.0
    wk = vk = float(w0_raw)
    hi = lo = float(w0_raw)  # max/min of the candidate set
    uk = 0.0
    urm_k = 0.0
    inv_n = 1.0 / n
    for i in range(steps):
        c = 1.0 - theta_draws[i] * inv_n
        x = x_draws[i]
        cand = c * wk + x
        wk = cand if cand >= 0.0 else 0.0
        if c >= 0.0:
            new_hi = x + c * hi
            new_lo = x + c * lo
        else:
            new_hi = x + c * lo
            new_lo = x + c * hi
        hi = new_hi if new_hi >= 0.0 else 0.0
        lo = new_lo if new_lo <= 0.0 else 0.0
        vk = c * vk + x
        uk = c * uk + x
        if uk > urm_k:
            urm_k = uk
        w[i + 1] = wk
        ups[i + 1] = hi
        v[i + 1] = vk
        urm[i + 1] = urm_k
    return w, ups, v, urm


# ---------------------------------------------------------------------------
# Sampling plumbing
# ---------------------------------------------------------------------------


def _draw_pair(
    params: ModelParams, n: int, steps: int, rng: np.random.Generator, x_shift: float
) -> tuple[np.ndarray, np.ndarray]:
    """One replication's draws: the Theta sequence first, then the X sequence."""
    theta_draws = params.theta_law.sample(rng, steps)
    x_draws = params.x_law_base.sample(rng, steps)
    if x_shift != 0.0:
        x_draws = x_draws + x_shift
    return theta_draws, x_draws


def _md_shift(params: ModelParams, n: int) -> float:
    return x_mean_at(params, n) - params.mu


def _center_w(params: ModelParams) -> float:
    cls = fluid.classify_w(params.mu, params.theta)
    return cls.stable_point if cls.stable_point is not None else 0.0


def _center_v(params: ModelParams) -> float:
    cls = fluid.classify_v(params.mu, params.theta)
    return cls.stable_point if cls.stable_point is not None else 0.0


# ---------------------------------------------------------------------------
# Single-replication simulators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimOutput:
    n: int
    w_path: StepPath  # raw W_{floor(nt)}
    l_path: StepPath  # raw regulator, node k holds L_{k-1}
    xi_path: StepPath  # fluid-scale driving input reconstructed during the run
    fluid_view: StepPath
    diffusion_view: StepPath
    md_view: StepPath
    center: float


@dataclass(frozen=True)
class LinearSimOutput:
    n: int
    v_path: StepPath
    fluid_view: StepPath
    md_view: StepPath
    center: float


@dataclass(frozen=True)
class BoundingSystems:
    n: int
    w: StepPath
    upsilon: StepPath
    v: StepPath
    u_runmax: StepPath


def simulate_w(
    params: ModelParams, n: int, seed: int, md_w0: float | None = None
) -> SimOutput:
    """Simulate the reflected workload for floor(n*T) steps.

    The default initial value is W_0 = n*w0, so the fluid view starts at w0
    and the moderate-deviation view starts at 0. Passing ``md_w0`` instead
    starts at W_0 = n*center + b_n*sqrt(n)*md_w0, which places the
    MD view at md_w0 (requires a regime with a stable fixed point).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = Grid.from_level(n, params.horizon)
    center = _center_w(params)
    if md_w0 is None:
        w0_raw = n * params.w0
    else:
        cls = fluid.classify_w(params.mu, params.theta)
        if not cls.stable:
            raise ValueError("md_w0 needs a regime with a stable fixed point")
        w0_raw = n * center + b_n(n, params.beta) * math.sqrt(n) * md_w0
        if w0_raw < 0:
            raise ValueError("md_w0 places the initial workload below zero")
    rng = rng_for(seed)
    theta_draws, x_draws = _draw_pair(params, n, grid.steps, rng, _md_shift(params, n))
    w, l, xi = iterate_w(theta_draws, x_draws, n, w0_raw, theta_center=params.theta)
    fluid_vals = w / n
    scale_md = math.sqrt(n) / b_n(n, params.beta)
    return SimOutput(
        n=n,
        w_path=StepPath(grid, w),
        l_path=StepPath(grid, l),
        xi_path=StepPath(grid, xi),
        fluid_view=StepPath(grid, fluid_vals),
        diffusion_view=StepPath(grid, math.sqrt(n) * (fluid_vals - center)),
        md_view=StepPath(grid, scale_md * (fluid_vals - center)),
        center=center,
    )


def simulate_v(params: ModelParams, n: int, seed: int, v0: float) -> LinearSimOutput:
    """Simulate the unreflected linear recursion with fluid initial value v0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = Grid.from_level(n, params.horizon)
    center = _center_v(params)
    rng = rng_for(seed)
    theta_draws, x_draws = _draw_pair(params, n, grid.steps, rng, _md_shift(params, n))
    v = iterate_v(theta_draws, x_draws, n, n * v0)
    fluid_vals = v / n
    scale_md = math.sqrt(n) / b_n(n, params.beta)
    return LinearSimOutput(
        n=n,
        v_path=StepPath(grid, v),
        fluid_view=StepPath(grid, fluid_vals),
        md_view=StepPath(grid, scale_md * (fluid_vals - center)),
        center=center,
    )


def simulate_bounding_systems(params: ModelParams, n: int, seed: int) -> BoundingSystems:
    """Coupled raw paths (W, Upsilon, V, running max of U) from one noise stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = Grid.from_level(n, params.horizon)
    rng = rng_for(seed)
    theta_draws, x_draws = _draw_pair(params, n, grid.steps, rng, _md_shift(params, n))
    w, ups, v, urm = iterate_bounding(theta_draws, x_draws, n, n * params.w0)
    return BoundingSystems(
        n=n,
        w=StepPath(grid, w),
        upsilon=StepPath(grid, ups),
        v=StepPath(grid, v),
        u_runmax=StepPath(grid, urm),
    )


# ---------------------------------------------------------------------------
# Batched replication kernels
# ---------------------------------------------------------------------------

_BLOCK_BUDGET = 4_000_000  # floats per draw array in one block


def _block_size(steps: int, reps: int) -> int:
    return max(1, min(reps, _BLOCK_BUDGET // max(steps, 1)))


def _is_driftless_weights(params: ModelParams) -> bool:
    law = params.theta_law
    return law.var == 0.0 and law.mean == 0.0


def _iter_blocks(
    params: ModelParams,
    n: int,
    steps: int,
    reps: int,
    seed: int,
    seed_prefix: tuple[int, ...],
    x_shift: float,
):
    """Yield (rep_offset, theta_block, x_block); each row keeps its own stream."""
    block = _block_size(steps, reps)
    for start in range(0, reps, block):
        size = min(block, reps - start)
        theta_block = np.empty((size, steps))
        x_block = np.empty((size, steps))
        for b in range(size):
            rng = rng_for(seed, *seed_prefix, start + b)
            th, xs = _draw_pair(params, n, steps, rng, x_shift)
            theta_block[b] = th
            x_block[b] = xs
        yield start, theta_block, x_block


def _run_w_block(
    theta_block: np.ndarray,
    x_block: np.ndarray,
    n: int,
    w0_raw: float,
    reference_vals: np.ndarray | None = None,
    track_hit: bool = False,
) -> dict:
    """Vectorized-in-replications run of the reflected recursion.

    Per-replication results are identical to iterate_w on the same draws
    (each row's update uses only that row's values).
    """
    size, steps = x_block.shape
    inv_n = 1.0 / n
    w = np.full(size, float(w0_raw))
    l = np.zeros(size)
    maxw = w.copy()
    sup_err = None
    if reference_vals is not None:
        sup_err = np.abs(w * inv_n - reference_vals[0])
    hit = None
    if track_hit:
        hit = np.full(size, np.nan)
        if w0_raw == 0.0:
            hit[:] = 0.0
    for i in range(steps):
        cand = (1.0 - theta_block[:, i] * inv_n) * w + x_block[:, i]
        neg = cand < 0.0
        l -= np.where(neg, cand, 0.0)
        w = np.where(neg, 0.0, cand)
        np.maximum(maxw, w, out=maxw)
        if sup_err is not None:
            np.maximum(sup_err, np.abs(w * inv_n - reference_vals[i + 1]), out=sup_err)
        if hit is not None:
            newly = np.isnan(hit) & (w == 0.0)
            if newly.any():
                hit[newly] = (i + 1) * inv_n
    if not np.all(np.isfinite(w)):
        raise SimulationBlowup("workload not finite in batched run")
    return {"endpoint": w, "max": maxw, "l_final": l, "sup_err": sup_err, "hit": hit}


def _run_w_block_driftless(
    x_block: np.ndarray, w0_raw: float
) -> dict:
    """Reflected random walk (all C = 1) via cumulative sums.

    W_k = max(W_0 + S_k, S_k - min_{1<=j<=k} S_j); same law and same
    per-replication draws as the step loop, evaluated without the time loop.
    """
    s = np.cumsum(x_block, axis=1)
    runmin = np.minimum.accumulate(s, axis=1)
    w_nodes = np.maximum(w0_raw + s, s - runmin)
    endpoint = w_nodes[:, -1]
    maxw = np.maximum(float(w0_raw), w_nodes.max(axis=1))
    return {"endpoint": endpoint, "max": maxw, "l_final": None, "sup_err": None, "hit": None}


def batch_fluid_sup_errors(
    params: ModelParams,
    n: int,
    reps: int,
    seed: int,
    seed_prefix: int,
    reference: StepPath,
    process: str = "w",
    v0: float | None = None,
) -> np.ndarray:
    """Sup-distance of each replication's fluid view to a reference path."""
    steps = reference.grid.steps
    shift = _md_shift(params, n)
    out = np.empty(reps)
    for start, theta_block, x_block in _iter_blocks(
        params, n, steps, reps, seed, (seed_prefix,), shift
    ):
        size = x_block.shape[0]
        if process == "w":
            res = _run_w_block(
                theta_block, x_block, n, n * params.w0, reference_vals=reference.values
            )
            out[start : start + size] = res["sup_err"]
        else:
            inv_n = 1.0 / n
            v = np.full(size, float(n * v0))
            sup_err = np.abs(v * inv_n - reference.values[0])
            for i in range(steps):
                v = (1.0 - theta_block[:, i] * inv_n) * v + x_block[:, i]
                np.maximum(sup_err, np.abs(v * inv_n - reference.values[i + 1]), out=sup_err)
            out[start : start + size] = sup_err
    return out


def batch_w_endpoints(
    params: ModelParams,
    n: int,
    reps: int,
    seed: int,
    seed_prefix: int = 0,
    x_shift: float | None = None,
    t_eval: float | None = None,
) -> dict:
    """Raw endpoint, path max and regulator statistics across replications.

    ``x_shift`` overrides the drift perturbation (the moderate-deviation
    convention r*b_n/sqrt(n) is the default; central-limit experiments pass
    eta/sqrt(n)). ``t_eval`` truncates the run at floor(n*t_eval) steps.
    """
    horizon = params.horizon if t_eval is None else t_eval
    steps = Grid.from_level(n, horizon).steps
    shift = _md_shift(params, n) if x_shift is None else x_shift
    endpoint = np.empty(reps)
    maxw = np.empty(reps)
    l_final = np.zeros(reps)
    for start, theta_block, x_block in _iter_blocks(
        params, n, steps, reps, seed, (seed_prefix,), shift
    ):
        size = x_block.shape[0]
        res = _run_w_block(theta_block, x_block, n, n * params.w0)
        endpoint[start : start + size] = res["endpoint"]
        maxw[start : start + size] = res["max"]
        l_final[start : start + size] = res["l_final"]
    return {"endpoint_raw": endpoint, "max_raw": maxw, "l_final_raw": l_final, "steps": steps}


def batch_hitting_times(
    params: ModelParams, n: int, reps: int, seed: int, seed_prefix: int = 0
) -> np.ndarray:
    """First grid time at which each replication's workload reaches 0 (NaN if never)."""
    steps = Grid.from_level(n, params.horizon).steps
    shift = _md_shift(params, n)
    out = np.empty(reps)
    for start, theta_block, x_block in _iter_blocks(
        params, n, steps, reps, seed, (seed_prefix,), shift
    ):
        size = x_block.shape[0]
        res = _run_w_block(theta_block, x_block, n, n * params.w0, track_hit=True)
        out[start : start + size] = res["hit"]
    return out


# ---------------------------------------------------------------------------
# Moderate-deviation tail sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailEvent:
    kind: Literal["endpoint", "sup"]
    a: float

    def __post_init__(self):
        if self.kind not in ("endpoint", "sup"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.a < 0:
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    se: Optional[float]  # None means "insufficient" (fewer than 2 replications)
    reps: int
    hits: int
    p_upper_95: float  # one-sided bound; informative when p_hat = 0

    @property
    def se_label(self) -> str:
        return "insufficient" if self.se is None else repr(self.se)


def md_tail_sample(
    params: ModelParams, n: int, event: TailEvent, reps: int, seed: int, seed_prefix: int = 0
) -> TailEstimate:
    """Plain Monte Carlo estimate of P(MD view of W satisfies the event).

    The event is {md_view(T) > a} (endpoint) or {sup_t md_view(t) > a} (sup).
    Replications use streams keyed by (seed, seed_prefix, replication), so a
    fixed seed gives common random numbers across thresholds and re-runs.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cls = fluid.classify_w(params.mu, params.theta)
    if not cls.stable:
        raise ValueError("tail sampling needs a regime with a stable fixed point")
    center = cls.stable_point
    steps = Grid.from_level(n, params.horizon).steps
    scale = math.sqrt(n) / b_n(n, params.beta)
    inv_n = 1.0 / n
    shift = _md_shift(params, n)
    hits = 0
    driftless = _is_driftless_weights(params)
    for start, theta_block, x_block in _iter_blocks(
        params, n, steps, reps, seed, (seed_prefix,), shift
    ):
        if driftless:
            res = _run_w_block_driftless(x_block, n * params.w0)
        else:
            res = _run_w_block(theta_block, x_block, n, n * params.w0)
        raw = res["endpoint"] if event.kind == "endpoint" else res["max"]
        md_vals = scale * (raw * inv_n - center)
        hits += int(np.count_nonzero(md_vals > event.a))
    p_hat = hits / reps
    se = math.sqrt(p_hat * (1.0 - p_hat) / reps) if reps >= 2 else None
    p_upper = 1.0 - 0.05 ** (1.0 / reps)
    return TailEstimate(p_hat=p_hat, se=se, reps=reps, hits=hits, p_upper_95=p_upper)
