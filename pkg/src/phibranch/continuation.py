"""Pseudo-arclength tracing of branches of solution pairs from trivial pairs.

A branch starts at a trivial pair (0, xbar), where xbar is a zero of
f0(., 0) with nonzero local degree, and is followed in both directions
until it leaves the lambda window, exceeds the C1 ceiling, approaches an
endpoint of the lambda interval, comes back to lambda = 0 elsewhere, or
the step control gives up.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .degree import Box, Zero, box_degree, locate_zeros_f0
from .errors import InitialTangentFailure, NoConvergence, PhiBranchError
from .model import DEFAULT_NODES, PeriodicGrid, ProblemField, SolutionPair, StatePair, norms
from .phi import PhiOperator
from .solver import Discretization, SolverConfig, newton_iterate, newton_solve

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_WINDOW = (-20.0, 20.0)
DEFAULT_C1_CEILING = 50.0
# gap kept between the lambda window and a finite endpoint of the lambda interval
DEFAULT_BOUNDARY_MARGIN = 0.02
ISOLATION_RADIUS = 1e-3


@dataclass(frozen=True)
class DomainSpec:
    """Computable region: lambda window x {C1 norm < ceiling}, plus the box of trivial pairs."""

    lambda_range: tuple[float, float]
    c1_ceiling: float
    start_box: Box
    boundary_margin: float = DEFAULT_BOUNDARY_MARGIN

    def __post_init__(self):
        lo, hi = self.lambda_range
        if not lo <= 0.0 <= hi or not lo < hi:
            raise ValueError(f"lambda_range {self.lambda_range} must contain 0")
        if not self.c1_ceiling > self.start_box.diameter:
            raise ValueError("c1_ceiling must exceed the diameter of start_box")

    @classmethod
    def for_problem(
        cls,
        problem: ProblemField,
        start_box: Box | None = None,
        window: tuple[float, float] = DEFAULT_LAMBDA_WINDOW,
        c1_ceiling: float = DEFAULT_C1_CEILING,
        boundary_margin: float = DEFAULT_BOUNDARY_MARGIN,
    ) -> DomainSpec:
        """Window intersected with the lambda interval, pulled in by the margin at finite ends."""
        lo_i, hi_i = problem.lambda_interval
        lo = max(window[0], lo_i + boundary_margin) if np.isfinite(lo_i) else window[0]
        hi = min(window[1], hi_i - boundary_margin) if np.isfinite(hi_i) else window[1]
        box = start_box if start_box is not None else Box.cube(1.0, problem.dim)
        return cls((float(lo), float(hi)), float(c1_ceiling), box, boundary_margin)

    def touches_domain_edge(self, problem: ProblemField, side: int) -> bool:
        """Whether the window edge on ``side`` sits at the margin of a finite interval end."""
        edge = self.lambda_range[1] if side > 0 else self.lambda_range[0]
        end = problem.lambda_interval[1] if side > 0 else problem.lambda_interval[0]
        return bool(np.isfinite(end) and abs(end - edge) <= self.boundary_margin * (1 + 1e-9))


class Quantity(enum.Enum):
    SUP_X = "sup_x"
    SUP_XPRIME = "sup_xprime"
    C1 = "c1"
    L1_XPRIME = "l1_xprime"
    ABS_LAMBDA = "abs_lambda"


@dataclass(frozen=True)
class BoundMonitor:
    """A priori bound ``quantity <= bound_fn(lambda)`` checked along a branch."""

    name: str
    bound_fn: Callable[[float], float]
    quantity: Quantity

    def value(self, pair: SolutionPair, phi: PhiOperator) -> float:
        if self.quantity is Quantity.ABS_LAMBDA:
            return abs(pair.lam)
        nrm = norms(pair.state, phi)
        return {
            Quantity.SUP_X: nrm.sup_x,
            Quantity.SUP_XPRIME: nrm.sup_xprime,
            Quantity.C1: nrm.c1,
            Quantity.L1_XPRIME: nrm.l1_xprime,
        }[self.quantity]

    def bound(self, lam: float) -> float:
        return float(self.bound_fn(lam))

    def violated(self, pair: SolutionPair, phi: PhiOperator) -> bool:
        return self.value(pair, phi) > self.bound(pair.lam)


@dataclass(frozen=True)
class StepConfig:
    h0: float = 1e-3
    initial_step: float = 0.05
    min_step: float = 1e-4
    max_step: float = 0.5
    growth: float = 1.3
    grow_after: int = 3
    max_halvings: int = 12
    corrector_iters: int = 20
    max_jump: float = 1.5
    max_points: int = 4000
    return_lambda_tol: float = 1e-4
    return_distance: float = 1e-2
    return_min_arclength: float = 0.1

    def __post_init__(self):
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("need 0 < min_step <= initial_step <= max_step")


class TerminationKind(enum.Enum):
    LAMBDA_RANGE_EXIT = "LambdaRangeExit"
    NORM_CEILING = "NormCeiling"
    LAMBDA_DOMAIN_BOUNDARY = "LambdaDomainBoundary"
    RETURNED_TO_LAMBDA_ZERO = "ReturnedToLambdaZero"
    STEP_FAILURE = "StepFailure"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    side: int = 0
    detail: str = ""
    point: np.ndarray | None = field(default=None, compare=False)

    def __str__(self):
        if self.kind is TerminationKind.LAMBDA_DOMAIN_BOUNDARY:
            return f"{self.kind.value}({'+' if self.side > 0 else '-'})"
        return self.kind.value


@dataclass(frozen=True)
class Branch:
    """Solution pairs ordered along the curve.

    ``points[start_index]`` is the trivial start pair; points before it
    come from the backward direction.  ``arclengths`` are signed distances
    from the start along the polyline.  ``termination`` belongs to the
    forward end, ``backward_termination`` to the other one.
    """

    points: tuple[SolutionPair, ...]
    start_index: int
    arclengths: tuple[float, ...]
    flags: tuple[tuple[str, ...], ...]
    termination: Termination
    backward_termination: Termination
    monitors: tuple[BoundMonitor, ...] = ()
    lambda_interval: tuple[float, float] = (-np.inf, np.inf)
    phi: PhiOperator | None = None

    @property
    def start(self) -> SolutionPair:
        return self.points[self.start_index]

    @property
    def arclength(self) -> float:
        return float(self.arclengths[-1] - self.arclengths[0]) if self.points else 0.0

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def c1_norms(self) -> np.ndarray:
        return np.array([p.c1_norm for p in self.points])

    @property
    def ends(self) -> tuple[Termination, Termination]:
        return self.backward_termination, self.termination

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class TrivialStarts:
    points: list[Zero]
    total_degree: int
    warnings: list[str]
    isolated: list[bool]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def trivial_start_points(problem: ProblemField, spec: DomainSpec, seed: int = 0) -> TrivialStarts:
    """Zeros of f0(., 0) in the start box with their local degrees."""
    total = box_degree(problem.f0_slice, spec.start_box)
    zeros = locate_zeros_f0(problem.f0_slice, spec.start_box, seed=seed)
    warnings = []
    if total == 0:
        warnings.append("total degree of f0(., 0) on the start box is 0: no branch is guaranteed")
    # heuristic only: no other zero within ISOLATION_RADIUS
    isolated = [
        all(np.linalg.norm(z.point - w.point) > ISOLATION_RADIUS for w in zeros if w is not z) for z in zeros
    ]
    for msg in warnings:
        log.warning(msg)
    return TrivialStarts(zeros, total, warnings, isolated)


def start_pair(
    problem: ProblemField,
    phi: PhiOperator,
    xbar,
    grid: PeriodicGrid | None = None,
    solver: SolverConfig | None = None,
) -> SolutionPair:
    grid = grid or PeriodicGrid(DEFAULT_NODES, problem.period)
    return newton_solve(problem, phi, 0.0, StatePair.constant(grid, xbar), solver)


def is_nonconstant(pair: SolutionPair, tol: float = 1e-6) -> bool:
    x = pair.state.x1.values
    return bool(np.linalg.norm(x - x.mean(axis=0), axis=-1).max() > tol)


def _c1_distance(a: SolutionPair, b: SolutionPair, phi: PhiOperator) -> float:
    dx = a.state.x1.values - b.state.x1.values
    dv = phi.inverse(a.state.x2.values) - phi.inverse(b.state.x2.values)
    return float(np.linalg.norm(dx, axis=-1).max() + np.linalg.norm(dv, axis=-1).max())


class _Tracer:
    """One direction of pseudo-arclength continuation on y = (lambda, z)."""

    def __init__(self, problem, phi, disc: Discretization, spec, monitors, step: StepConfig, solver: SolverConfig):
        self.problem = problem
        self.phi = phi
        self.disc = disc
        self.spec = spec
        self.monitors = tuple(monitors)
        self.step = step
        self.solver = solver
        self.weights = np.concatenate([[1.0], np.full(disc.size, 1.0 / disc.N)])
        self.corrector_cfg = replace(solver, max_newton_iters=step.corrector_iters)

    def wnorm(self, y) -> float:
        return float(np.sqrt(np.sum(self.weights * y * y)))

    def flags(self, pair: SolutionPair) -> tuple[str, ...]:
        return tuple(m.name for m in self.monitors if m.violated(pair, self.phi))

    def correct(self, y_pred, y_prev, tangent, h):
        """Newton on [R(lambda, z); <y - y_prev, tangent>_w - h] = 0."""
        disc, fd = self.disc, self.solver.fd_step
        wt = self.weights * tangent

        def residual_fn(y):
            lam = y[0]
            if not self.problem.contains(lam):
                return np.full(disc.size + 1, np.inf), np.inf
            with np.errstate(all="ignore"):
                r = disc.residual_vector(lam, y[1:])
            arc = float(np.dot(wt, y - y_prev) - h)
            return np.concatenate([r, [arc]]), max(disc.sup_of(r), abs(arc))

        def jacobian_fn(y, r):
            lam, z = y[0], y[1:]
            with np.errstate(all="ignore"):
                jz = disc.jacobian(lam, z, fd, r[:-1])
                jl = disc.lambda_derivative(lam, z, fd, r[:-1])
            jac = np.empty((disc.size + 1, disc.size + 1))
            jac[:-1, 0] = jl
            jac[:-1, 1:] = jz
            jac[-1] = wt
            return jac

        y, sup, iters, _ = newton_iterate(residual_fn, jacobian_fn, y_pred, self.corrector_cfg)
        return y, iters

    def terminate(self, pair: SolutionPair, start: SolutionPair, travelled: float) -> Termination | None:
        lam = pair.lam
        if pair.c1_norm > self.spec.c1_ceiling:
            return Termination(TerminationKind.NORM_CEILING, detail=f"c1={pair.c1_norm:.6g}")
        lo, hi = self.spec.lambda_range
        if lam > hi or lam < lo:
            side = 1 if lam > hi else -1
            if self.spec.touches_domain_edge(self.problem, side):
                return Termination(TerminationKind.LAMBDA_DOMAIN_BOUNDARY, side, f"lambda={lam:.6g}")
            return Termination(TerminationKind.LAMBDA_RANGE_EXIT, side, f"lambda={lam:.6g}")
        st = self.step
        if (
            travelled > st.return_min_arclength
            and abs(lam) < st.return_lambda_tol
            and _c1_distance(pair, start, self.phi) > st.return_distance
        ):
            return Termination(
                TerminationKind.RETURNED_TO_LAMBDA_ZERO, detail=f"lambda={lam:.3g}", point=pair.state.x1.values.mean(axis=0)
            )
        return None

    def run(self, start: SolutionPair, first: SolutionPair | None, tangent0):
        """Trace from ``start``; ``first`` is the solved point at lambda = +-h0 if any."""
        disc, st = self.disc, self.step
        y_start = np.concatenate([[start.lam], disc.pack(start.state)])
        points: list[SolutionPair] = []
        flags: list[tuple[str, ...]] = []
        dists: list[float] = []
        travelled = 0.0
        if first is not None:
            y_prev = np.concatenate([[first.lam], disc.pack(first.state)])
            tangent = y_prev - y_start
            d = self.wnorm(tangent)
            tangent /= d
            points.append(first)
            flags.append(self.flags(first))
            dists.append(d)
            travelled = d
            end = self.terminate(first, start, travelled)
            if end is not None:
                return points, flags, dists, end
        else:
            y_prev = y_start
            tangent = tangent0 / self.wnorm(tangent0)
        h = st.initial_step
        successes = 0
        halvings = 0
        prev_pair = points[-1] if points else start
        while len(points) < st.max_points:
            y_pred = y_prev + h * tangent
            try:
                y_new, _ = self.correct(y_pred, y_prev, tangent, h)
                pair = disc.solution_pair(y_new[0], y_new[1:])
                jump = abs(pair.lam - prev_pair.lam) + _c1_distance(pair, prev_pair, self.phi)
                if jump > st.max_jump:
                    raise NoConvergence(0, 0.0, f"jump {jump:.3g} exceeds max_jump")
            except PhiBranchError as exc:
                halvings += 1
                successes = 0
                h *= 0.5
                if halvings > st.max_halvings or h < st.min_step:
                    return points, flags, dists, Termination(
                        TerminationKind.STEP_FAILURE, detail=f"{halvings} halvings, h={h:.3g}: {exc}"
                    )
                continue
            d = self.wnorm(y_new - y_prev)
            secant = (y_new - y_prev) / d
            tangent = secant
            y_prev = y_new
            prev_pair = pair
            travelled += d
            points.append(pair)
            flags.append(self.flags(pair))
            dists.append(d)
            halvings = 0
            successes += 1
            if successes >= st.grow_after:
                h = min(h * st.growth, st.max_step)
                successes = 0
            end = self.terminate(pair, start, travelled)
            if end is not None:
                return points, flags, dists, end
        return points, flags, dists, Termination(TerminationKind.STEP_FAILURE, detail="point budget exhausted")


def _first_point(problem, phi, start: SolutionPair, lam, solver, rng):
    """Solve at lambda = +-h0, retrying from seeded perturbations of the start."""
    try:
        return newton_solve(problem, phi, lam, start.state, solver)
    except PhiBranchError:
        pass
    grid, n = start.state.grid, start.state.dim
    x0 = start.state.x1.values
    for rho in (1e-2, 1e-1, 3e-1):
        for _ in range(2):
            offset = rho * rng.normal(size=n)
            guess = StatePair.from_arrays(grid, x0 + offset, start.state.x2.values)
            try:
                return newton_solve(problem, phi, lam, guess, solver)
            except PhiBranchError:
                continue
    return None


def trace_branch(
    problem: ProblemField,
    phi: PhiOperator,
    start: SolutionPair,
    spec: DomainSpec,
    monitors: Sequence[BoundMonitor] = (),
    step: StepConfig | None = None,
    solver: SolverConfig | None = None,
    seed: int = 0,
) -> Branch:
    """Follow the branch through the trivial pair ``start`` in both directions."""
    step = step or StepConfig()
    solver = solver or SolverConfig()
    rng = np.random.default_rng(seed)
    disc = Discretization(problem, phi, start.state.grid)
    tracer = _Tracer(problem, phi, disc, spec, monitors, step, solver)

    firsts = {sign: _first_point(problem, phi, start, sign * step.h0, solver, rng) for sign in (1, -1)}
    if firsts[1] is None and firsts[-1] is None:
        raise InitialTangentFailure(f"no converged solution at lambda = +-{step.h0:g}")
    y_start = np.concatenate([[start.lam], disc.pack(start.state)])
    halves = {}
    for sign in (1, -1):
        first = firsts[sign]
        fallback = None
        if first is None:
            other = firsts[-sign]
            fallback = -(np.concatenate([[other.lam], disc.pack(other.state)]) - y_start)
        halves[sign] = tracer.run(start, first, fallback)
        log.info("direction %+d: %d points, %s", sign, len(halves[sign][0]), halves[sign][3])

    fwd_pts, fwd_flags, fwd_d, fwd_end = halves[1]
    bwd_pts, bwd_flags, bwd_d, bwd_end = halves[-1]
    points = tuple(reversed(bwd_pts)) + (start,) + tuple(fwd_pts)
    flags = tuple(reversed(bwd_flags)) + (tracer.flags(start),) + tuple(fwd_flags)
    arcs = tuple(-a for a in reversed(np.cumsum(bwd_d))) + (0.0,) + tuple(np.cumsum(fwd_d))
    return Branch(
        points=points,
        start_index=len(bwd_pts),
        arclengths=tuple(float(a) for a in arcs),
        flags=flags,
        termination=fwd_end,
        backward_termination=bwd_end,
        monitors=tuple(monitors),
        lambda_interval=problem.lambda_interval,
        phi=phi,
    )


def trace_all(
    problem: ProblemField,
    phi: PhiOperator,
    spec: DomainSpec,
    monitors: Sequence[BoundMonitor] = (),
    grid: PeriodicGrid | None = None,
    step: StepConfig | None = None,
    solver: SolverConfig | None = None,
    seed: int = 0,
) -> tuple[TrivialStarts, list[Branch]]:
    """Certify the trivial pairs in ``spec.start_box`` and trace a branch from each."""
    starts = trivial_start_points(problem, spec, seed=seed)
    grid = grid or PeriodicGrid(DEFAULT_NODES, problem.period)
    branches = []
    for zero in starts:
        pair = start_pair(problem, phi, zero.point, grid, solver)
        branches.append(trace_branch(problem, phi, pair, spec, monitors, step, solver, seed))
    return starts, branches


class Scenario(enum.Enum):
    UNBOUNDED_IN_LAMBDA = "UnboundedInLambda"
    UNBOUNDED_IN_X_BOUNDED_LAMBDA = "UnboundedInX_BoundedLambda"
    APPROACHES_LAMBDA_DOMAIN_BOUNDARY = "ApproachesLambdaDomainBoundary"
    CLOSED_LOOP_RETURN = "ClosedLoopReturn"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class TerminationReport:
    scenario: Scenario
    max_abs_lambda: float
    max_c1: float
    flagged_points: int
    ends: tuple[Termination, Termination]
    notes: tuple[str, ...] = ()


def classify_termination(branch: Branch, spec: DomainSpec) -> TerminationReport:
    """Map the two end reasons of a branch to one qualitative scenario.

    Close calls are not adjudicated: the raw maxima and end reasons are
    returned alongside the label.
    """
    if not branch.points:
        raise ValueError("empty branch")
    kinds = {end.kind for end in branch.ends}
    max_lam = float(np.max(np.abs(branch.lambdas)))
    max_c1 = float(np.max(branch.c1_norms))
    flagged = sum(1 for f in branch.flags if f)
    notes = []
    if TerminationKind.RETURNED_TO_LAMBDA_ZERO in kinds:
        scenario = Scenario.CLOSED_LOOP_RETURN
        nonconstant = [i for i, p in enumerate(branch.points) if abs(p.lam) < 1e-4 and is_nonconstant(p)]
        if nonconstant:
            notes.append(f"pairs (0, x) with x nonconstant at indices {nonconstant}")
    elif TerminationKind.LAMBDA_DOMAIN_BOUNDARY in kinds:
        scenario = Scenario.APPROACHES_LAMBDA_DOMAIN_BOUNDARY
    elif TerminationKind.LAMBDA_RANGE_EXIT in kinds:
        scenario = Scenario.UNBOUNDED_IN_LAMBDA
    elif TerminationKind.NORM_CEILING in kinds:
        scenario = Scenario.UNBOUNDED_IN_X_BOUNDED_LAMBDA
        caps = [m.bound(0.0) for m in branch.monitors if m.quantity is Quantity.ABS_LAMBDA]
        if caps and max_lam >= min(caps):
            notes.append(f"max |lambda| {max_lam:.6g} reaches the lambda bound {min(caps):.6g}")
    else:
        scenario = Scenario.INCONCLUSIVE
    if TerminationKind.STEP_FAILURE in kinds:
        notes.append("one end stopped on step failure")
    if flagged:
        notes.append(f"{flagged} points violate a priori bound monitors")
    return TerminationReport(scenario, max_lam, max_c1, flagged, branch.ends, tuple(notes))


__all__ = [
    "BoundMonitor",
    "Branch",
    "DomainSpec",
    "Quantity",
    "Scenario",
    "StepConfig",
    "Termination",
    "TerminationKind",
    "TerminationReport",
    "TrivialStarts",
    "classify_termination",
    "is_nonconstant",
    "start_pair",
    "trace_all",
    "trace_branch",
    "trivial_start_points",
]
