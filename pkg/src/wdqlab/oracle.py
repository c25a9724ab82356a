"""Brute-force oracles on small instances: the anti-regression bedrock.

Every oracle here re-derives its quantity from first principles (explicit
product-sum expansions, exhaustive candidate enumeration, direct iteration)
without touching the production kernels, so agreement between the two is a
genuine cross-check rather than a tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec, rng_for

__all__ = [
    "SmallInstance",
    "expand_v",
    "expand_u",
    "expand_upsilon",
    "upsilon_reversed_max_identity",
    "gronwall_check",
    "fwlln_check",
    "FwllnRow",
    "random_instance",
    "run_all_suites",
    "SuiteResult",
]

MAX_LENGTH = 12


@dataclass(frozen=True)
class SmallInstance:
    """Explicit draw sequences short enough for exhaustive expansion."""

    theta_draws: tuple[float, ...]
    x_draws: tuple[float, ...]
    n: int
    initial: float

    def __post_init__(self):
        if len(self.theta_draws) != len(self.x_draws):
            raise ValueError("draw sequences must have equal length")
        if len(self.x_draws) > MAX_LENGTH:
            raise ValueError(f"instances are capped at length {MAX_LENGTH}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def length(self) -> int:
        return len(self.x_draws)

    def coefficients(self) -> list[float]:
        return [1.0 - th / self.n for th in self.theta_draws]


def _product(factors) -> float:
    out = 1.0
    for c in factors:
        out *= c
    return out


def expand_v(inst: SmallInstance, i: int | None = None) -> float:
    """V_i by the explicit expansion
    V_i = X_{i-1} + C_{i-1} X_{i-2} + ... + C_{i-1}...C_1 X_0 + C_{i-1}...C_0 V_0."""
    i = inst.length if i is None else i
    c = inst.coefficients()
    total = 0.0
    for j in range(i):  # term carrying X_j has coefficients C_{i-1}..C_{j+1}
        total += _product(c[j + 1 : i]) * inst.x_draws[j]
    total += _product(c[0:i]) * inst.initial
    return total


def expand_u(inst: SmallInstance, i: int | None = None) -> float:
    """U_i: the same expansion started from 0."""
    i = inst.length if i is None else i
    c = inst.coefficients()
    return sum(_product(c[j + 1 : i]) * inst.x_draws[j] for j in range(i))


def expand_upsilon(inst: SmallInstance, i: int | None = None) -> float:
    """Upsilon_i by direct enumeration of the defining max.

    Candidates for index i >= 1: zero, every suffix sum
    X_{i-1} + C_{i-1} X_{i-2} + ... + C_{i-1}...C_{j+1} X_j for j from i-1
    down to 1, and the full term ending in C_{i-1}...C_0 * initial.
    """
    i = inst.length if i is None else i
    if i == 0:
        return inst.initial
    c = inst.coefficients()
    candidates = [0.0]
    for j in range(i - 1, 0, -1):
        candidates.append(
            sum(_product(c[k + 1 : i]) * inst.x_draws[k] for k in range(j, i))
        )
    candidates.append(expand_v(inst, i))
    return max(candidates)


def upsilon_reversed_max_identity(inst: SmallInstance) -> tuple[bool, float, float]:
    """Check the max-expansion identity on the reversed-order construction.

    With draws consumed in reversed order (primed systems), the envelope is
    exactly the max of the running linear iterates:
    Upsilon'_i = max(U'_0, ..., U'_{i-1}, V'_i), for any coefficient signs.
    Returns (holds, lhs, rhs) at the instance's final index.
    """
    i = inst.length
    c = inst.coefficients()
    x = inst.x_draws

    def u_rev(k: int) -> float:  # U'_k = x_0 + c_0 x_1 + ... + c_0..c_{k-2} x_{k-1}
        return sum(_product(c[0:j]) * x[j] for j in range(k))

    def v_rev(k: int) -> float:
        return u_rev(k) + _product(c[0:k]) * inst.initial

    def upsilon_rev(k: int) -> float:
        if k == 0:
            return inst.initial
        cands = [0.0] + [u_rev(j) for j in range(1, k)] + [v_rev(k)]
        return max(cands)

    lhs = upsilon_rev(i)
    rhs = max([u_rev(j) for j in range(i)] + [v_rev(i)])
    return math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12), lhs, rhs


def gronwall_check(u0: float, alpha: float, b_seq: list[float]) -> bool:
    """Saturate u_{k+1} = (1+alpha) u_k + b_k at equality and verify
    u_k <= e^{k alpha} (u_0 + sum_{j<k} b_j) at every k."""
    if alpha < 0 or any(b < 0 for b in b_seq):
        raise ValueError("the bound needs alpha >= 0 and b_k >= 0")
    u = float(u0)
    partial = 0.0
    for k, b in enumerate(b_seq, start=1):
        u = (1.0 + alpha) * u + b
        partial += b
        bound = math.exp(k * alpha) * (u0 + partial)
        if u > bound * (1.0 + 1e-12) + 1e-300:
            return False
    return True


@dataclass(frozen=True)
class FwllnRow:
    n: int
    reps: int
    median_sup_error: float
    mean_sup_error: float


def fwlln_check(
    x_law: DistributionSpec,
    n_ladder: list[int],
    reps: int,
    seed: int,
    mean_shift_exponent: float | None = None,
) -> list[FwllnRow]:
    """Sup-distance of the scaled partial sums (1/n) sum_{i<=floor(nt)} X_i to mu*t.

    Implemented directly with cumulative sums, independent of the simulator
    kernels. ``mean_shift_exponent`` gamma adds a triangular-array drift
    n^gamma to each draw (the limit is still mu*t when gamma < 0).
    """
    if list(n_ladder) != sorted(n_ladder):
        raise ValueError("n_ladder must be ascending")
    mu = x_law.mean
    rows = []
    for rung, n in enumerate(n_ladder):
        errs = np.empty(reps)
        shift = float(n) ** mean_shift_exponent if mean_shift_exponent is not None else 0.0
        for rep in range(reps):
            rng = rng_for(seed, rung, rep)
            draws = x_law.sample(rng, n) + shift
            partial = np.concatenate(([0.0], np.cumsum(draws))) / n
            target = mu * np.arange(n + 1) / n
            errs[rep] = np.max(np.abs(partial - target))
        rows.append(
            FwllnRow(
                n=n,
                reps=reps,
                median_sup_error=float(np.median(errs)),
                mean_sup_error=float(np.mean(errs)),
            )
        )
    return rows


def random_instance(rng: np.random.Generator, max_length: int = MAX_LENGTH) -> SmallInstance:
    length = int(rng.integers(1, max_length + 1))
    n = int(rng.integers(1, 50))
    # widths chosen so negative coefficients C = 1 - theta/n occur regularly
    theta = rng.uniform(-2.0 * n, 2.0 * n, size=length)
    x = rng.normal(0.0, 2.0, size=length)
    initial = float(abs(rng.normal(0.0, 3.0)))
    return SmallInstance(tuple(theta), tuple(x), n, initial)


@dataclass
class SuiteResult:
    suite: str
    cases: int
    failures: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def run_all_suites(seed: int = 0, cases: int = 1000) -> list[SuiteResult]:
    """Run every oracle suite; returns one pass/fail row per suite."""
    from .recursion import iterate_bounding, iterate_v

    rng = rng_for(seed, 99)
    res_v = SuiteResult("expand_v", cases)
    res_ups = SuiteResult("expand_upsilon", cases)
    res_sandwich = SuiteResult("sandwich_w_upsilon", cases)
    res_rev = SuiteResult("reversed_max_identity", cases)
    for _ in range(cases):
        inst = random_instance(rng)
        th = np.asarray(inst.theta_draws)
        xs = np.asarray(inst.x_draws)
        v_iter = iterate_v(th, xs, inst.n, inst.initial)
        v_exp = expand_v(inst)
        scale = max(1.0, abs(v_exp))
        if abs(v_iter[-1] - v_exp) > 1e-12 * scale:
            res_v.failures += 1
            res_v.notes.append(f"expansion {v_exp} vs iteration {v_iter[-1]}")
        w, ups, _, _ = iterate_bounding(th, xs, inst.n, inst.initial)
        ups_exp = expand_upsilon(inst)
        if abs(ups[-1] - ups_exp) > 1e-12 * max(1.0, abs(ups_exp)):
            res_ups.failures += 1
            res_ups.notes.append(f"enumeration {ups_exp} vs recursion {ups[-1]}")
        if np.any(w > ups + 1e-12 * np.maximum(1.0, np.abs(ups))) or np.any(w < 0):
            res_sandwich.failures += 1
        ok, lhs, rhs = upsilon_reversed_max_identity(inst)
        if not ok:
            res_rev.failures += 1
            res_rev.notes.append(f"{lhs} vs {rhs}")

    res_gronwall = SuiteResult("gronwall", cases)
    grng = rng_for(seed, 100)
    for _ in range(cases):
        k = int(grng.integers(1, 30))
        alpha = float(grng.uniform(0.0, 0.5))
        b_seq = list(grng.uniform(0.0, 2.0, size=k))
        u0 = float(grng.uniform(0.0, 5.0))
        if not gronwall_check(u0, alpha, b_seq):
            res_gronwall.failures += 1

    res_fwlln = SuiteResult("fwlln", 3)
    rows = fwlln_check(DistributionSpec.normal(1.0, 1.0), [100, 1000, 10000], 50, seed)
    meds = [r.median_sup_error for r in rows]
    if not (meds[0] > meds[1] > meds[2]):
        res_fwlln.failures += 1
        res_fwlln.notes.append(f"medians not decreasing: {meds}")

    return [res_v, res_ups, res_sandwich, res_rev, res_gronwall, res_fwlln]
