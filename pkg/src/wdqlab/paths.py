"""Grid-based path representations shared by every module.

Two flavors are used throughout:

* ``StepPath`` -- right-continuous step paths, constant on each grid cell.
  This is what the discrete-time simulators produce after re-indexing by
  ``floor(n*t)``.
* ``PiecewiseLinearPath`` -- continuous paths, linear between grid nodes,
  with an a.e. derivative. Rate functionals consume these.

All quadrature is left-endpoint: ``integral(p)(t_k) = dt * sum(p_0..p_{k-1})``.
This matches the discrete sums of the simulators cell by cell, so operator
identities hold exactly on the grid rather than only approximately.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "StepPath",
    "PiecewiseLinearPath",
    "sup_norm",
    "running_sup",
    "integrate",
    "write_csv",
    "read_csv",
    "path_to_csv",
    "path_from_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, horizon] with ``steps`` cells of width dt."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"grid needs at least one cell, got steps={self.steps}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be a positive finite real, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @classmethod
    def from_level(cls, n: int, horizon: float) -> "Grid":
        """Grid used by a simulation at level n: one cell per recursion step.

        Cell width is 1/n and there are floor(n*horizon) cells, so the
        effective horizon is floor(n*horizon)/n (at most one cell short).
        """
        if n < 1:
            raise ValueError(f"level n must be >= 1, got {n}")
        steps = int(math.floor(n * horizon + 1e-12))
        if steps < 1:
            raise ValueError(f"horizon {horizon} too short for level n={n}")
        return cls(horizon=steps / n, steps=steps)

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


def _as_values(grid: Grid, values, kind: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != grid.steps + 1:
        raise ValueError(
            f"{kind} needs {grid.steps + 1} values on this grid, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{kind} values must be finite reals")
    return arr


@dataclass(frozen=True)
class StepPath:
    """Cadlag step path: value at node k holds on [k*dt, (k+1)*dt)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.grid, self.values, "StepPath"))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "StepPath":
        return cls(grid, np.full(grid.steps + 1, float(c)))

    @classmethod
    def zero(cls, grid: Grid) -> "StepPath":
        return cls.constant(grid, 0.0)

    @classmethod
    def identity(cls, grid: Grid) -> "StepPath":
        return cls(grid, grid.times())

    def is_nonnegative(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= -tol))

    def __add__(self, other):
        if isinstance(other, StepPath):
            self._check_same_grid(other)
            return StepPath(self.grid, self.values + other.values)
        return StepPath(self.grid, self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, StepPath):
            self._check_same_grid(other)
            return StepPath(self.grid, self.values - other.values)
        return StepPath(self.grid, self.values - float(other))

    def __mul__(self, scalar: float) -> "StepPath":
        return StepPath(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def _check_same_grid(self, other: "StepPath"):
        if other.grid != self.grid:
            raise ValueError("paths live on different grids")


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Continuous path, linear between grid nodes."""

    grid: Grid
    node_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "node_values", _as_values(self.grid, self.node_values, "PiecewiseLinearPath")
        )

    def slopes(self) -> np.ndarray:
        """A.e. derivative: one value per cell."""
        return np.diff(self.node_values) / self.grid.dt

    def midpoints(self) -> np.ndarray:
        """Path value at each cell midpoint (where quadrature samples it)."""
        return 0.5 * (self.node_values[:-1] + self.node_values[1:])

    def refine(self, factor: int = 2) -> "PiecewiseLinearPath":
        """Split every cell into ``factor`` equal subcells; the path is unchanged."""
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        m = self.grid.steps
        fine = np.empty(m * factor + 1)
        for j in range(factor):
            w = j / factor
            fine[j : m * factor : factor] = (1 - w) * self.node_values[:-1] + w * self.node_values[1:]
        fine[-1] = self.node_values[-1]
        return PiecewiseLinearPath(Grid(self.grid.horizon, m * factor), fine)

    def as_step(self) -> StepPath:
        return StepPath(self.grid, self.node_values.copy())


def sup_norm(p: StepPath | PiecewiseLinearPath) -> float:
    """Uniform norm sup_t |p(t)|, attained at a grid node for both path flavors."""
    vals = p.values if isinstance(p, StepPath) else p.node_values
    return float(np.max(np.abs(vals)))


def running_sup(p: StepPath) -> StepPath:
    """t -> sup_{u <= t} p(u); nondecreasing, idempotent."""
    return StepPath(p.grid, np.maximum.accumulate(p.values))


def integrate(p: StepPath) -> StepPath:
    """t -> integral of p over [0, t], left-endpoint rule.

    Exact for step paths constant on cells; out[k] = dt * (p_0 + ... + p_{k-1}).
    """
    out = np.empty(p.grid.steps + 1)
    out[0] = 0.0
    np.cumsum(p.values[:-1] * p.grid.dt, out=out[1:])
    return StepPath(p.grid, out)


# --- CSV interface: header "t,value", one row per grid node, full precision ---


def write_csv(p: StepPath | PiecewiseLinearPath, fp) -> None:
    fp.write(path_to_csv(p))


def path_to_csv(p: StepPath | PiecewiseLinearPath) -> str:
    vals = p.values if isinstance(p, StepPath) else p.node_values
    lines = ["t,value"]
    for t, v in zip(p.grid.times(), vals):
        lines.append(f"{float(t)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def path_from_csv(text: str, kind: str = "step") -> StepPath | PiecewiseLinearPath:
    return read_csv(io.StringIO(text), kind=kind)


def read_csv(fp, kind: str = "step") -> StepPath | PiecewiseLinearPath:
    header = fp.readline().strip()
    if header != "t,value":
        raise ValueError(f"expected header 't,value', got {header!r}")
    ts, vs = [], []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        t_str, v_str = line.split(",")
        ts.append(float(t_str))
        vs.append(float(v_str))
    if len(ts) < 2:
        raise ValueError("path CSV needs at least two grid nodes")
    grid = Grid(horizon=ts[-1], steps=len(ts) - 1)
    if kind == "step":
        return StepPath(grid, np.asarray(vs))
    if kind == "linear":
        return PiecewiseLinearPath(grid, np.asarray(vs))
    raise ValueError(f"unknown path kind {kind!r}")
