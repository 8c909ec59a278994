"""Radial homeomorphisms of R^n used as phi-Laplacian operators.

All functions act on the last axis, so a whole grid of vectors of shape
``(..., n)`` is mapped in one call.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import UnsupportedOperator

# below this norm phi_inverse returns exactly zero (hard cutoff)
INVERSE_ZERO_CUTOFF = 1e-300


class PhiKind(enum.Enum):
    POWER_RADIAL = "power_radial"
    IDENTITY = "identity"


@dataclass(frozen=True)
class PhiOperator:
    """phi(xi) = A(xi) xi with A(xi) = |xi|^q (or A = 1 for the identity).

    ``PowerRadial(2)`` is the vector 3-Laplacian ``|xi|^2 xi``.
    """

    kind: PhiKind
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind is PhiKind.POWER_RADIAL and not self.exponent >= 0:
            raise ValueError(f"exponent must be >= 0, got {self.exponent}")

    @classmethod
    def power_radial(cls, q: float) -> PhiOperator:
        return cls(PhiKind.POWER_RADIAL, float(q))

    @classmethod
    def identity(cls) -> PhiOperator:
        return cls(PhiKind.IDENTITY, 0.0)

    @property
    def q(self) -> float:
        return self.exponent if self.kind is PhiKind.POWER_RADIAL else 0.0

    def forward(self, xi):
        return phi_forward(self, xi)

    def inverse(self, eta):
        return phi_inverse(self, eta)

    @property
    def gamma(self) -> float:
        return coercivity_gamma(self)

    def radial(self, r):
        """Norm of phi(xi) as a function of r = |xi|."""
        r = np.asarray(r, dtype=float)
        return r ** (self.q + 1.0)

    def radial_inverse(self, s):
        """Inverse of :meth:`radial`: the r with |phi(xi)| = s."""
        s = np.asarray(s, dtype=float)
        return s ** (1.0 / (self.q + 1.0))

    def __str__(self):
        if self.kind is PhiKind.IDENTITY:
            return "Identity"
        return f"PowerRadial({self.exponent:g})"


def phi_forward(op: PhiOperator, xi):
    xi = np.asarray(xi, dtype=float)
    if op.kind is PhiKind.IDENTITY or op.exponent == 0.0:
        return xi.copy()
    r = np.linalg.norm(xi, axis=-1, keepdims=True)
    return r**op.exponent * xi


def phi_inverse(op: PhiOperator, eta):
    eta = np.asarray(eta, dtype=float)
    if op.kind is PhiKind.IDENTITY or op.exponent == 0.0:
        return eta.copy()
    q = op.exponent
    s = np.linalg.norm(eta, axis=-1, keepdims=True)
    small = s < INVERSE_ZERO_CUTOFF
    scale = np.where(small, 0.0, np.where(small, 1.0, s) ** (-q / (q + 1.0)))
    return scale * eta


@functools.lru_cache(maxsize=None)
def _gamma_power(q: float) -> float:
    # sup_{r >= 0} (r - r^(q+2)); the supremum is attained in [0, 1]
    res = minimize_scalar(
        lambda r: -(r - r ** (q + 2.0)),
        bracket=(0.0, 0.5, 1.0),
        method="golden",
        tol=1e-12,
    )
    return max(0.0, float(-res.fun))


def coercivity_gamma(op: PhiOperator) -> float:
    """Smallest gamma >= 0 with <phi(xi), xi> >= |xi| - gamma for all xi."""
    if op.kind is PhiKind.IDENTITY:
        return _gamma_power(0.0)
    if op.kind is PhiKind.POWER_RADIAL:
        return _gamma_power(op.exponent)
    raise UnsupportedOperator(f"no radial profile for {op!r}")
