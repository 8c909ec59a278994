"""Problem types and calculus on uniform periodic grids.

A T-periodic function is stored by its values at the N nodes
``t_j = j T / N``; node ``t_N`` is identified with ``t_0`` so periodicity
holds by construction.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .errors import LambdaOutOfDomain, NonZeroMeanInput
from .phi import PhiOperator

MIN_NODES = 8
DEFAULT_NODES = 128
ZERO_MEAN_RTOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemField:
    """Right-hand side F of (phi(x'))' = F(lambda, t, x, x').

    ``rhs(lam, t, x, y)`` and ``f0(x, y)`` are vectorized: ``x`` and ``y``
    have shape ``(..., N, n)``, ``t`` has shape ``(N,)`` and the result has
    the shape of ``x``.  Both callbacks must be pure.
    """

    dim: int
    period: float
    rhs: Callable[..., np.ndarray]
    f0: Callable[..., np.ndarray]
    lambda_interval: tuple[float, float] = (-np.inf, np.inf)
    name: str = ""
    params: Any = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")
        lo, hi = self.lambda_interval
        if not lo < 0 < hi:
            raise ValueError("lambda interval must be open and contain 0")

    def contains(self, lam: float) -> bool:
        lo, hi = self.lambda_interval
        return lo < lam < hi

    def check_lambda(self, lam: float) -> None:
        if not self.contains(lam):
            raise LambdaOutOfDomain(lam, self.lambda_interval)

    def f0_slice(self, x):
        """x -> f0(x, 0), vectorized over leading axes."""
        x = np.asarray(x, dtype=float)
        return np.asarray(self.f0(x, np.zeros_like(x)), dtype=float)


@dataclass(frozen=True)
class PeriodicGrid:
    n_nodes: int
    period: float

    def __post_init__(self):
        if self.n_nodes < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {self.n_nodes}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def dt(self) -> float:
        return self.period / self.n_nodes

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dt


@dataclass(frozen=True)
class GridFunction:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_nodes:
            raise ValueError(f"values shape {v.shape} does not match grid of {self.grid.n_nodes} nodes")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, j: int) -> np.ndarray:
        return self.values[j % self.grid.n_nodes]

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.grid, values)

    @classmethod
    def constant(cls, grid: PeriodicGrid, c) -> GridFunction:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(grid, np.broadcast_to(c, (grid.n_nodes, c.size)))

    @classmethod
    def from_callable(cls, grid: PeriodicGrid, fn) -> GridFunction:
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))


@dataclass(frozen=True)
class StatePair:
    """First-order state: x1 = x and x2 = phi(x')."""

    x1: GridFunction
    x2: GridFunction

    def __post_init__(self):
        if self.x1.grid != self.x2.grid:
            raise ValueError("x1 and x2 live on different grids")
        if self.x1.dim != self.x2.dim:
            raise ValueError("x1 and x2 have different dimensions")

    @property
    def grid(self) -> PeriodicGrid:
        return self.x1.grid

    @property
    def dim(self) -> int:
        return self.x1.dim

    @classmethod
    def zeros(cls, grid: PeriodicGrid, dim: int) -> StatePair:
        z = np.zeros((grid.n_nodes, dim))
        return cls(GridFunction(grid, z), GridFunction(grid, z))

    @classmethod
    def constant(cls, grid: PeriodicGrid, xbar) -> StatePair:
        x1 = GridFunction.constant(grid, xbar)
        return cls(x1, GridFunction(grid, np.zeros_like(x1.values)))

    @classmethod
    def from_arrays(cls, grid: PeriodicGrid, x1, x2) -> StatePair:
        return cls(GridFunction(grid, x1), GridFunction(grid, x2))

    @classmethod
    def from_position(cls, grid: PeriodicGrid, x1, xprime, phi: PhiOperator) -> StatePair:
        """Build the state from samples of x and x'."""
        return cls.from_arrays(grid, x1, phi.forward(np.asarray(xprime, dtype=float)))

    def scaled(self, alpha: float) -> StatePair:
        return StatePair(self.x1.with_values(alpha * self.x1.values), self.x2.with_values(alpha * self.x2.values))


@dataclass(frozen=True)
class SolutionPair:
    lam: float
    state: StatePair
    residual_sup: float
    c1_norm: float
    diagnostics: dict = field(default_factory=dict, compare=False)


class Norms(NamedTuple):
    sup_x: float
    sup_xprime: float
    c1: float
    l1_xprime: float


def mean(u: GridFunction) -> np.ndarray:
    """Rectangle-rule mean over one period."""
    return u.values.mean(axis=0)


def _sup(values) -> float:
    values = np.asarray(values)
    if values.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(values, axis=-1)))


def periodic_antiderivative(values, dt: float) -> np.ndarray:
    """Trapezoid cumulative sum along axis -2, shifted to zero mean.

    Unchecked kernel behind :func:`cumulative_integral_zero_mean`; works on
    stacked arrays of shape ``(..., N, n)``.
    """
    u = np.asarray(values, dtype=float)
    increments = 0.5 * dt * (u + np.roll(u, -1, axis=-2))
    v = np.cumsum(increments, axis=-2)
    v = np.roll(v, 1, axis=-2)
    v[..., 0, :] = 0.0
    return v - v.mean(axis=-2, keepdims=True)


def cumulative_integral_zero_mean(u: GridFunction) -> GridFunction:
    """Periodic antiderivative with zero mean of a zero-mean grid function."""
    m = mean(u)
    if np.linalg.norm(m) > ZERO_MEAN_RTOL * (1.0 + _sup(u.values)):
        raise NonZeroMeanInput(f"input mean {m} is not zero")
    return u.with_values(periodic_antiderivative(u.values, u.grid.dt))


def centered_difference(values, dt: float) -> np.ndarray:
    u = np.asarray(values, dtype=float)
    return (np.roll(u, -1, axis=-2) - np.roll(u, 1, axis=-2)) / (2.0 * dt)


def discrete_derivative(u: GridFunction) -> GridFunction:
    return u.with_values(centered_difference(u.values, u.grid.dt))


def norms(s: StatePair, phi: PhiOperator) -> Norms:
    xprime = phi.inverse(s.x2.values)
    sup_x = _sup(s.x1.values)
    speeds = np.linalg.norm(xprime, axis=-1)
    sup_xprime = float(speeds.max())
    return Norms(sup_x, sup_xprime, sup_x + sup_xprime, float(s.grid.dt * speeds.sum()))
