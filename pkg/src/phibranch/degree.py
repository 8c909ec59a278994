"""Brouwer degree on boxes in R^1 and R^2.

Maps are vectorized callables: a 1D map takes an array of points and
returns an array of the same shape; a planar map takes points of shape
``(..., 2)`` and returns values of shape ``(..., 2)``.
"""

from __future__ import annotations

import enum
from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BoundaryZero, NoAngleConvergence, SuspectDegenerate, ZeroOnCutLine
from .phi import PhiOperator

BOUNDARY_RTOL_2D = 1e-9
BOUNDARY_RTOL_1D = 1e-12
MAX_SEGMENTS = 2**20
ROUNDING_REJECT = 0.25


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError(f"empty box: lower={lo}, upper={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, radius: float, dim: int) -> Box:
        return cls(-radius * np.ones(dim), radius * np.ones(dim))

    @classmethod
    def from_bounds(cls, bounds) -> Box:
        """From ``(lo1, hi1, lo2, hi2, ...)``."""
        b = np.asarray(bounds, dtype=float)
        if b.size % 2 or b.size == 0:
            raise ValueError("bounds must come in (lower, upper) pairs")
        return cls(b[0::2], b[1::2])

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def is_symmetric(self, rtol=1e-12) -> bool:
        return bool(np.allclose(self.lower, -self.upper, rtol=rtol, atol=0.0))

    def contains(self, p, margin=0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all((p > self.lower + margin) & (p < self.upper - margin), axis=-1)

    def split(self, axis: int, at: float) -> tuple[Box, Box]:
        if not self.lower[axis] < at < self.upper[axis]:
            raise ValueError("cut outside the box")
        hi = self.upper.copy()
        hi[axis] = at
        lo = self.lower.copy()
        lo[axis] = at
        return Box(self.lower, hi), Box(lo, self.upper)

    def boundary_points(self, s) -> np.ndarray:
        """Counterclockwise boundary of a planar box, parametrized by s in [0, 4]."""
        s = np.asarray(s, dtype=float)
        (x0, y0), (x1, y1) = self.lower, self.upper
        corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])
        edge = np.clip(np.floor(s).astype(int), 0, 3)
        frac = (s - edge)[..., None]
        return corners[edge] * (1.0 - frac) + corners[edge + 1] * frac

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(float(v) for pair in zip(self.lower, self.upper) for v in pair)


class DegreeResult(NamedTuple):
    degree: int
    boundary_min_norm: float
    evaluations: int


def _interval(box) -> tuple[float, float]:
    if isinstance(box, Box):
        if box.dim != 1:
            raise ValueError("expected a 1D box")
        return float(box.lower[0]), float(box.upper[0])
    a, b = box
    return float(a), float(b)


def degree_1d(f: Callable, box) -> DegreeResult:
    a, b = _interval(box)
    fa, fb = (float(np.squeeze(v)) for v in np.asarray(f(np.array([a, b])), dtype=float))
    scale = max(abs(fa), abs(fb))
    if not np.isfinite(scale) or min(abs(fa), abs(fb)) <= BOUNDARY_RTOL_1D * scale or scale == 0.0:
        raise BoundaryZero(f"f vanishes at an endpoint of [{a}, {b}]: f(a)={fa}, f(b)={fb}")
    return DegreeResult(int((np.sign(fb) - np.sign(fa)) // 2), min(abs(fa), abs(fb)), 2)


def _planar(f, pts):
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != pts.shape:
        vals = np.broadcast_to(vals, pts.shape)
    return vals


def degree_2d_winding(f: Callable, box: Box, initial_per_edge: int = 16) -> DegreeResult:
    """Degree of a planar map on a box from the winding of f along the boundary.

    The boundary is refined until consecutive image vectors turn by less than
    a right angle; the degree is the total turning divided by 2 pi.
    """
    if box.dim != 2:
        raise ValueError("degree_2d_winding needs a planar box")
    s = np.linspace(0.0, 4.0, 4 * initial_per_edge + 1)
    vals = _planar(f, box.boundary_points(s))
    evaluations = s.size
    min_ds = 4.0 * 1e-15
    while True:
        mags = np.linalg.norm(vals, axis=-1)
        if not np.all(np.isfinite(mags)):
            raise BoundaryZero("non-finite map values on the boundary")
        scale = mags.max()
        if scale == 0.0 or mags.min() <= BOUNDARY_RTOL_2D * scale:
            raise BoundaryZero(f"|f| <= {BOUNDARY_RTOL_2D:g} * scale on the boundary")
        a, b = vals[:-1], vals[1:]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = np.einsum("ij,ij->i", a, b)
        angles = np.arctan2(cross, dot)
        bad = np.abs(angles) >= 0.5 * np.pi
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        if np.min(s[idx + 1] - s[idx]) < min_ds:
            raise BoundaryZero("image turns sharply on an unresolvable boundary segment")
        if s.size + idx.size > MAX_SEGMENTS:
            raise NoAngleConvergence(f"boundary subdivision exceeded {MAX_SEGMENTS} segments")
        mids = 0.5 * (s[idx] + s[idx + 1])
        mid_vals = _planar(f, box.boundary_points(mids))
        evaluations += mids.size
        s = np.insert(s, idx + 1, mids)
        vals = np.insert(vals, idx + 1, mid_vals, axis=0)
    total = angles.sum() / (2.0 * np.pi)
    degree = int(round(total))
    if abs(total - degree) > ROUNDING_REJECT:
        raise NoAngleConvergence(f"winding {total:.4f} is not close to an integer")
    return DegreeResult(degree, float(mags.min()), evaluations)


def degree(f: Callable, box: Box) -> DegreeResult:
    """Dispatch on dimension: sign change in 1D, boundary winding in 2D."""
    if box.dim == 1:
        return degree_1d(lambda x: np.asarray(f(np.asarray(x)[:, None]), dtype=float).reshape(-1), box)
    if box.dim == 2:
        return degree_2d_winding(f, box)
    raise ValueError("exact degree only for dimensions 1 and 2")


def _central_jacobian(g, pts, h):
    """2x2 Jacobians of a planar map at each point by central differences."""
    jac = np.empty(pts.shape[:-1] + (2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        jac[..., :, k] = (g(pts + e) - g(pts - e)) / (2.0 * h)
    return jac


def degree_oracle_preimage(
    f: Callable, box: Box, regular_value, grid: int = 400, polish_iters: int = 40
) -> int:
    """Signed count of preimages of a regular value (independent of winding).

    A grid scan marks cells where both components of ``f - value`` change
    sign; Newton polishes each candidate and the signs of the Jacobian
    determinants at the distinct preimages are summed.
    """
    if box.dim != 2:
        raise ValueError("the preimage oracle is planar")
    value = np.asarray(regular_value, dtype=float)

    def g(p):
        return _planar(f, p) - value

    xs = np.linspace(box.lower[0], box.upper[0], grid + 1)
    ys = np.linspace(box.lower[1], box.upper[1], grid + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    G = g(np.stack([X, Y], axis=-1))
    flagged = np.ones((grid, grid), dtype=bool)
    for k in range(2):
        c = np.stack([G[:-1, :-1, k], G[1:, :-1, k], G[:-1, 1:, k], G[1:, 1:, k]])
        flagged &= (c.min(axis=0) <= 0.0) & (c.max(axis=0) >= 0.0)
    i, j = np.nonzero(flagged)
    fscale = float(np.linalg.norm(G + value, axis=-1).max()) or 1.0
    h = 1e-6 * box.diameter
    det_scale = (fscale / box.diameter) ** 2
    if i.size == 0:
        return 0
    pts = np.stack([0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])], axis=-1)
    with np.errstate(all="ignore"):
        for _ in range(polish_iters):
            jac = _central_jacobian(g, pts, h)
            jac = np.where(np.isfinite(jac), jac, 0.0)
            det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
            rhs = g(pts)
            # explicit 2x2 inverse; singular points simply stop moving
            step = np.stack(
                [jac[..., 1, 1] * rhs[..., 0] - jac[..., 0, 1] * rhs[..., 1],
                 jac[..., 0, 0] * rhs[..., 1] - jac[..., 1, 0] * rhs[..., 0]],
                axis=-1,
            ) / det[..., None]
            step = np.where(np.isfinite(step), step, 0.0)
            pts = pts - step
        res = np.linalg.norm(g(pts), axis=-1)
    ok = np.isfinite(res) & (res <= 1e-10 * fscale)
    pts = pts[ok]
    inside = box.contains(pts)
    pts = pts[inside]
    near = ~box.contains(pts, margin=1e-6)
    if near.any():
        raise BoundaryZero("a preimage lies within 1e-6 of the boundary")
    roots: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - r) > 1e-7 * box.diameter for r in roots):
            roots.append(p)
    total = 0
    for r in roots:
        d = float(np.linalg.det(_central_jacobian(g, r[None, :], h)[0]))
        if abs(d) < 1e-8 * det_scale:
            raise SuspectDegenerate(f"preimage {r} has |det J| = {abs(d):.2e}")
        total += 1 if d > 0 else -1
    return total


class OddCheck(enum.Enum):
    ODD_HENCE_NONZERO = "OddHenceNonzero"
    NOT_VERIFIED_ODD = "NotVerifiedOdd"


def _boundary_samples(box: Box, samples: int) -> np.ndarray:
    if box.dim == 1:
        return np.array([[box.lower[0]], [box.upper[0]]])
    if box.dim == 2:
        return box.boundary_points(np.linspace(0.0, 4.0, samples, endpoint=False))
    # higher dimensions: random points pushed onto a face
    rng = np.random.default_rng(0)
    p = rng.uniform(box.lower, box.upper, size=(samples, box.dim))
    axis = rng.integers(box.dim, size=samples)
    side = rng.integers(2, size=samples)
    p[np.arange(samples), axis] = np.where(side == 1, box.upper[axis], box.lower[axis])
    return p


def degree_odd_shortcut(f: Callable, box: Box, samples: int = 512, mode: str = "odd") -> OddCheck:
    """Borsuk-type certificate that the degree on a symmetric box is nonzero.

    ``mode="odd"`` checks f(-p) = -f(p) on the boundary (the degree is then
    odd).  ``mode="a8"`` checks the weaker condition that f(-p) is never
    mu * f(p) with mu >= 1.  Works in any dimension.
    """
    if not box.is_symmetric():
        raise ValueError("box must be symmetric about the origin")
    p = _boundary_samples(box, samples)
    fp = np.asarray(f(p), dtype=float).reshape(p.shape)
    fm = np.asarray(f(-p), dtype=float).reshape(p.shape)
    mags = np.linalg.norm(fp, axis=-1)
    scale = float(mags.max())
    if scale == 0.0 or not np.isfinite(scale) or mags.min() <= BOUNDARY_RTOL_2D * scale:
        raise BoundaryZero("map vanishes on the boundary")
    if mode == "odd":
        ok = np.all(np.linalg.norm(fm + fp, axis=-1) <= 1e-9 * scale)
    elif mode == "a8":
        # f(-p) = mu f(p), mu >= 1, means f(-p) is parallel to f(p), same
        # direction, and at least as long
        cos = np.einsum("ij,ij->i", fm, fp) / (np.linalg.norm(fm, axis=-1) * mags + 1e-300)
        longer = np.linalg.norm(fm, axis=-1) >= mags * (1.0 - 1e-9)
        ok = not np.any((cos >= 1.0 - 1e-9) & longer)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return OddCheck.ODD_HENCE_NONZERO if ok else OddCheck.NOT_VERIFIED_ODD


class Zero(NamedTuple):
    point: np.ndarray
    local_degree: int


def box_degree(f, box: Box) -> int:
    """Integer degree of a map on points of shape ``(..., n)``, n in {1, 2}."""
    return degree(f, box).degree


def _newton_polish(f, x0, box: Box, iters=30):
    x = np.array(x0, dtype=float)
    h = 1e-7 * max(box.diameter, 1e-300)
    n = x.size
    with np.errstate(all="ignore"):
        for _ in range(iters):
            fx = np.asarray(f(x[None, :]), dtype=float).reshape(n)
            jac = np.empty((n, n))
            for k in range(n):
                e = np.zeros(n)
                e[k] = h
                jac[:, k] = (
                    np.asarray(f((x + e)[None, :]), dtype=float).reshape(n)
                    - np.asarray(f((x - e)[None, :]), dtype=float).reshape(n)
                ) / (2 * h)
            try:
                step = np.linalg.solve(jac, fx)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            x = x - step
            if np.linalg.norm(step) <= 1e-15 * (1 + np.linalg.norm(x)):
                break
    return x


CUT_OFFSETS = (1e-4, 1e-3, 1e-2, 3e-2, 1e-1)


def locate_zeros_f0(
    f0_slice: Callable,
    box: Box,
    min_diameter: float = 1e-6,
    initial_levels: int = 3,
    seed: int = 0,
) -> list[Zero]:
    """Zeros of x -> f0(x, 0) in a box (dimension 1 or 2) by degree bisection.

    ``f0_slice`` takes points of shape ``(..., n)``.  The box is first cut
    uniformly ``initial_levels`` times; below that only sub-boxes of
    nonzero degree are refined.  A cut through a zero is moved by a seeded
    random offset of growing size (1e-4 up to 1e-1 of the width).
    """
    if box.dim not in (1, 2):
        raise ValueError("zero location implemented for dimensions 1 and 2")
    rng = np.random.default_rng(seed)
    box_degree(f0_slice, box)  # precondition: no zero on the outer boundary

    def children(b: Box):
        for attempt in range(len(CUT_OFFSETS) + 1):
            cut = b.center.copy()
            if attempt:
                cut += CUT_OFFSETS[attempt - 1] * b.widths * rng.uniform(-1, 1, size=b.dim)
            parts = [b]
            for axis in range(b.dim):
                parts = [q for part in parts for q in part.split(axis, cut[axis])]
            try:
                return [(q, box_degree(f0_slice, q)) for q in parts]
            except BoundaryZero:
                continue
        raise ZeroOnCutLine(f"could not cut {b} away from zeros of f0")

    zeros: list[Zero] = []
    stack = [(box, 0)]
    while stack:
        b, level = stack.pop()
        for child, deg in children(b):
            if level + 1 < initial_levels or deg != 0:
                if child.diameter < min_diameter:
                    zeros.append(Zero(_polished(f0_slice, child), deg))
                else:
                    stack.append((child, level + 1))
    zeros.sort(key=lambda z: tuple(z.point))
    return zeros


def _polished(f, b: Box) -> np.ndarray:
    x = _newton_polish(f, b.center, b)
    # keep the Newton result only if it stays near the small box
    if np.all(np.isfinite(x)) and np.all(np.abs(x - b.center) <= 10 * b.widths):
        return x
    return b.center.copy()


def product_map(f1: Callable, f2: Callable) -> Callable:
    """(x1, x2) -> (f1(x2), f2(x1)) for scalar f1, f2."""

    def f(p):
        p = np.asarray(p, dtype=float)
        return np.stack([f1(p[..., 1]), f2(p[..., 0])], axis=-1)

    return f


class ReductionCheck(NamedTuple):
    lhs: int
    rhs: int

    def agrees(self, mode: str = "exact") -> bool:
        """``mode="abs"`` compares |lhs| and |rhs| (orientation-free)."""
        if mode == "abs":
            return abs(self.lhs) == abs(self.rhs)
        return self.lhs == self.rhs


def reduction_check(phi: PhiOperator, f0: Callable, box1: Box, box2: Box) -> ReductionCheck:
    """Degree of (x1, x2) -> (phi^{-1}(x2), f0(x1, phi^{-1}(x2))) against the product formula.

    Scalar case: ``f0(x, y)`` takes arrays of shape ``(..., 1)``.  The left
    side is the planar winding degree on box1 x box2, the right side is
    ``-deg(phi^{-1}, box2) * deg(f0(., 0), box1)``.
    """
    if box1.dim != 1 or box2.dim != 1:
        raise ValueError("reduction_check is implemented for n = 1")

    def reduced(p):
        p = np.asarray(p, dtype=float)
        y = phi.inverse(p[..., 1:2])
        return np.concatenate([y, np.asarray(f0(p[..., 0:1], y), dtype=float)], axis=-1)

    product = Box(np.r_[box1.lower, box2.lower], np.r_[box1.upper, box2.upper])
    lhs = degree_2d_winding(reduced, product).degree
    d_phi = degree_1d(lambda y: phi.inverse(np.asarray(y)[..., None])[..., 0], box2).degree
    d_f0 = degree_1d(
        lambda x: np.asarray(f0(np.asarray(x)[..., None], np.zeros((np.size(x), 1))), dtype=float)[..., 0],
        box1,
    ).degree
    # sign (-1)^n of the product formula, n = 1
    return ReductionCheck(lhs, -d_phi * d_f0)


__all__ = [
    "Box",
    "DegreeResult",
    "OddCheck",
    "ReductionCheck",
    "Zero",
    "degree",
    "degree_1d",
    "degree_2d_winding",
    "degree_odd_shortcut",
    "degree_oracle_preimage",
    "locate_zeros_f0",
    "product_map",
    "reduction_check",
]
