"""Fixed-point form of the periodic problem and its Newton solver.

The first-order system ``x1' = phi^{-1}(x2)``, ``x2' = F(lam, t, x1, phi^{-1}(x2))``
is written as ``s = Phi(lam, s)`` with

    Phi(s) = P s + Q N(s) + K_P (I - Q) N(s)

where ``P`` and ``Q`` take grid means, ``K_P`` is the zero-mean periodic
antiderivative and ``N`` the Nemitskii operator.  Newton iterates on the
residual ``s - Phi(s)``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, solve_triangular

from .errors import NoConvergence, SingularJacobian
from .model import (
    GridFunction,
    PeriodicGrid,
    ProblemField,
    SolutionPair,
    StatePair,
    centered_difference,
    norms,
    periodic_antiderivative,
)
from .phi import PhiOperator

log = logging.getLogger(__name__)

# nodes with |x2_j| below this make the solver switch to damped Newton
NEAR_ZERO_X2 = 1e-8
PIVOT_RTOL = 1e-14
# under the minimum-norm policy, pivots below this relative size already
# trigger the least-squares solve: LU on a nearly rank-deficient matrix
# returns steps dominated by rounding in the null direction
NEAR_SINGULAR_RTOL = 1e-10
# a residual that shrinks by less than this factor counts as stalled
STALL_RATIO = 0.5
# a minimum-norm step whose linear residual equals the right-hand side to this
# relative tolerance makes no progress; it is replaced by the SVD step
NO_PROGRESS_RTOL = 1e-6


class Damping(enum.Enum):
    NONE = "none"
    LINE_SEARCH = "linesearch"


class SingularPolicy(enum.Enum):
    """What Newton does when LU reports a tiny pivot.

    With power operators the Jacobian at a constant state is rank deficient:
    the velocity block vanishes and the trapezoid antiderivative annihilates
    the alternating grid mode.  ``MIN_NORM`` takes the minimum-norm
    least-squares step instead, which leaves that mode untouched.
    """

    MIN_NORM = "minnorm"
    RAISE = "raise"


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-10
    max_newton_iters: int = 50
    fd_step: float = 1e-7
    damping: Damping = Damping.NONE
    max_halvings: int = 30
    step_tol: float = 1e-8
    singular: SingularPolicy = SingularPolicy.MIN_NORM

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if not 0 <= self.max_halvings <= 30:
            raise ValueError("max_halvings must be in [0, 30]")


class Discretization:
    """Problem, operator and grid bundled with vectorized residual kernels.

    Newton unknowns are ``z = (x1, v)`` flattened, with ``v = phi^{-1}(x2)``
    the velocity; ``x2 = phi(v)`` is recovered exactly.  In these
    coordinates the residual is as smooth as ``phi`` and ``F``, whereas
    ``phi^{-1}`` has an infinite derivative at 0 for power operators.
    """

    def __init__(self, problem: ProblemField, phi: PhiOperator, grid: PeriodicGrid):
        if abs(grid.period - problem.period) > 1e-12 * problem.period:
            raise ValueError("grid period differs from problem period")
        self.problem = problem
        self.phi = phi
        self.grid = grid
        self.n = problem.dim
        self.N = grid.n_nodes
        self.t = grid.nodes
        self.size = 2 * self.n * self.N
        eye = np.eye(self.N)
        centred = eye - 1.0 / self.N
        # L = Q + K_P (I - Q) as an N x N matrix acting on nodal values
        self._mean_free = centred
        self._lift = 1.0 / self.N + periodic_antiderivative(centred[:, :, None], grid.dt)[:, :, 0].T
        self._top_left = np.kron(centred, np.eye(self.n))
        self._top_right = -np.kron(self._lift, np.eye(self.n))

    # packing

    def pack(self, s: StatePair) -> np.ndarray:
        return np.concatenate([s.x1.values.ravel(), self.phi.inverse(s.x2.values).ravel()])

    def split(self, z):
        z = np.asarray(z, dtype=float)
        lead = z.shape[:-1]
        half = self.n * self.N
        x1 = z[..., :half].reshape(*lead, self.N, self.n)
        v = z[..., half:].reshape(*lead, self.N, self.n)
        return x1, v

    def unpack(self, z) -> StatePair:
        x1, v = self.split(z)
        return StatePair.from_arrays(self.grid, x1, self.phi.forward(v))

    # kernels on arrays of shape (..., N, n)

    def fixed_point_map(self, lam, x1, x2, v=None):
        """Phi applied to stacked states; ``v`` overrides phi^{-1}(x2)."""
        if v is None:
            v = self.phi.inverse(x2)
        w2 = np.asarray(self.problem.rhs(lam, self.t, x1, v), dtype=float)
        w2 = np.broadcast_to(w2, x1.shape)
        out = []
        for x, w in ((x1, v), (x2, w2)):
            wm = w.mean(axis=-2, keepdims=True)
            out.append(
                x.mean(axis=-2, keepdims=True) + wm + periodic_antiderivative(w - wm, self.grid.dt)
            )
        return out[0], out[1]

    def residual_arrays(self, lam, z):
        x1, v = self.split(z)
        x2 = self.phi.forward(v)
        p1, p2 = self.fixed_point_map(lam, x1, x2, v)
        return x1 - p1, x2 - p2

    def residual_vector(self, lam, z) -> np.ndarray:
        r1, r2 = self.residual_arrays(lam, z)
        lead = r1.shape[:-2]
        return np.concatenate([r1.reshape(*lead, -1), r2.reshape(*lead, -1)], axis=-1)

    def residual_sup(self, lam, z) -> float:
        return self.sup_of(self.residual_vector(lam, z))

    def sup_of(self, r) -> float:
        """Largest nodal vector norm of a residual vector (inf if not finite)."""
        r = np.asarray(r)
        if not np.all(np.isfinite(r)):
            return np.inf
        return float(np.linalg.norm(r.reshape(2 * self.N, self.n), axis=-1).max())

    def jacobian(self, lam, z, fd_step, r0=None) -> np.ndarray:
        """Forward-difference Jacobian dR/dz exploiting that F and phi act node by node.

        With ``R = ((I - Q) x1 - L v, (I - Q) phi(v) - L F)`` and ``L`` linear,
        the difference quotient of column ``(j, k)`` only involves the local
        quotients of ``phi`` and ``F`` at node ``j``.  Those are obtained for
        all nodes at once by perturbing component ``k`` at every node, with
        the same steps ``fd_step * (1 + |z|)`` as the column-by-column form
        :meth:`jacobian_dense`.  ``r0`` is accepted for interface symmetry.
        """
        x1, v = self.split(z)
        n, N = self.n, self.N
        steps = fd_step * (1.0 + np.abs(np.stack([x1, v])))  # (2, N, n)
        xs = np.broadcast_to(x1, (2, n, N, n)).copy()
        vs = np.broadcast_to(v, (2, n, N, n)).copy()
        for k in range(n):
            xs[0, k, :, k] += steps[0, :, k]
            vs[1, k, :, k] += steps[1, :, k]
        f0 = np.broadcast_to(np.asarray(self.problem.rhs(lam, self.t, x1, v), dtype=float), x1.shape)
        fs = np.broadcast_to(np.asarray(self.problem.rhs(lam, self.t, xs, vs), dtype=float), xs.shape)
        p0 = self.phi.forward(v)
        ps = self.phi.forward(vs[1])
        # local blocks indexed [node, output component, input component]
        h = np.moveaxis(steps, -1, 1)[..., None]  # (2, n, N, 1)
        dF = np.moveaxis((fs - f0) / h, 1, -1)  # (2, N, n, n)
        dphi = np.moveaxis((ps - p0) / h[1], 0, -1)
        jac = np.empty((self.size, self.size))
        half = n * N
        jac[:half, :half] = self._top_left
        jac[:half, half:] = self._top_right
        jac[half:, :half] = -_left_blocks(self._lift, dF[0])
        jac[half:, half:] = _left_blocks(self._mean_free, dphi) - _left_blocks(self._lift, dF[1])
        return jac

    def jacobian_dense(self, lam, z, fd_step, r0=None) -> np.ndarray:
        """Forward-difference Jacobian dR/dz, all columns in one batched call."""
        z = np.asarray(z, dtype=float)
        if r0 is None:
            r0 = self.residual_vector(lam, z)
        steps = fd_step * (1.0 + np.abs(z))
        perturbed = np.tile(z, (z.size, 1))
        perturbed[np.diag_indices(z.size)] += steps
        rows = self.residual_vector(lam, perturbed)
        return ((rows - r0) / steps[:, None]).T

    def lambda_derivative(self, lam, z, fd_step, r0=None) -> np.ndarray:
        if r0 is None:
            r0 = self.residual_vector(lam, z)
        h = fd_step * (1.0 + abs(lam))
        lo, hi = self.problem.lambda_interval
        if lam + h >= hi:
            h = -h
        return (self.residual_vector(lam + h, z) - r0) / h

    def solution_pair(self, lam, z, diagnostics=None) -> SolutionPair:
        s = self.unpack(z)
        return SolutionPair(
            lam=float(lam),
            state=s,
            residual_sup=self.residual_sup(lam, z),
            c1_norm=norms(s, self.phi).c1,
            diagnostics=dict(diagnostics or {}),
        )


def _left_blocks(A, blocks):
    """Matrix of ``A[j, m] * blocks[m]`` in the node-major (node, component) ordering."""
    N, n = blocks.shape[0], blocks.shape[1]
    return np.einsum("jm,mik->jimk", A, blocks).reshape(N * n, N * n)


def _lu(matrix):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(matrix, check_finite=False)
    pivots = np.abs(np.diag(lu))
    usable = pivots.size > 0 and bool(np.all(np.isfinite(lu))) and pivots.max() > 0.0
    ratio = float(pivots.min() / pivots.max()) if usable else 0.0
    return (lu, piv), ratio, float(pivots.min()) if pivots.size else 0.0, usable


def factor(matrix, iterations=0, residual=np.inf):
    """LU with partial pivoting; raises SingularJacobian on a tiny pivot."""
    lu, ratio, pivot, _ = _lu(matrix)
    if ratio < PIVOT_RTOL:
        raise SingularJacobian(iterations, residual, pivot)
    return lu


def linear_step(matrix, rhs, policy: SingularPolicy = SingularPolicy.MIN_NORM, iterations=0, residual=np.inf):
    """Solve ``matrix @ x = rhs``: LU, or the minimum-norm solution if nearly singular and allowed.

    Returns ``(x, rank_deficient)``.
    """
    # row equilibration: at degenerate zeros whole blocks of rows are tiny,
    # which is a scaling effect rather than rank deficiency
    matrix = np.asarray(matrix, dtype=float)
    rowmax = np.max(np.abs(matrix), axis=1)
    scale = np.where(rowmax > 0.0, 1.0 / np.where(rowmax > 0.0, rowmax, 1.0), 1.0)
    matrix = matrix * scale[:, None]
    rhs = np.asarray(rhs, dtype=float) * scale
    lu, ratio, pivot, usable = _lu(matrix)
    threshold = PIVOT_RTOL if policy is SingularPolicy.RAISE else NEAR_SINGULAR_RTOL
    if ratio >= threshold:
        return lu_solve(lu, rhs, check_finite=False), False
    if policy is SingularPolicy.RAISE or not usable:
        raise SingularJacobian(iterations, residual, pivot)
    x = _min_norm_solve(lu, rhs, NEAR_SINGULAR_RTOL)
    # partial pivoting is not rank revealing: if the LU-based step makes no
    # progress at all, fall back to the SVD least-squares solution
    rhs_norm = np.linalg.norm(rhs)
    miss = np.linalg.norm(matrix @ x - rhs) / max(rhs_norm, 1e-300)
    if rhs_norm > 0.0 and abs(miss - 1.0) <= NO_PROGRESS_RTOL:
        x = np.linalg.lstsq(matrix, rhs, rcond=NEAR_SINGULAR_RTOL)[0]
    return x, True


def _min_norm_solve(lu_piv, rhs, rtol):
    """Minimum-norm solution of a consistent system from a rank-revealing LU.

    Unknowns at tiny pivots are treated as free: a particular solution sets
    them to 0, null vectors set one of them to 1, and the particular
    solution is then projected orthogonally to the null space.
    """
    lu, piv = lu_piv
    n = lu.shape[0]
    y = np.array(rhs, dtype=float)
    for i, p in enumerate(piv):
        if p != i:
            y[i], y[p] = y[p], y[i]
    y = solve_triangular(lu, y, lower=True, unit_diagonal=True, check_finite=False)
    diag = np.abs(np.diag(lu))
    free = np.nonzero(diag < rtol * diag.max())[0]
    upper = np.triu(lu)
    upper[free, :] = 0.0
    upper[:, free] = 0.0
    upper[free, free] = 1.0
    cols = np.zeros((n, free.size + 1))
    cols[:, 0] = y
    for m, k in enumerate(free):
        cols[:k, m + 1] = -lu[:k, k]
    cols[free, :] = 0.0
    sol = solve_triangular(upper, cols, lower=False, check_finite=False)
    x, null = sol[:, 0], sol[:, 1:]
    null[free, np.arange(free.size)] = 1.0
    coef = np.linalg.lstsq(null, x, rcond=None)[0]
    return x - null @ coef


def nemitskii(problem: ProblemField, phi: PhiOperator, lam: float, s: StatePair) -> StatePair:
    problem.check_lambda(lam)
    v = phi.inverse(s.x2.values)
    w2 = np.broadcast_to(np.asarray(problem.rhs(lam, s.grid.nodes, s.x1.values, v), dtype=float), v.shape)
    return StatePair.from_arrays(s.grid, v, w2)


def phi_map(problem: ProblemField, phi: PhiOperator, lam: float, s: StatePair) -> StatePair:
    problem.check_lambda(lam)
    disc = Discretization(problem, phi, s.grid)
    p1, p2 = disc.fixed_point_map(lam, s.x1.values, s.x2.values)
    return StatePair.from_arrays(s.grid, p1, p2)


def residual(problem: ProblemField, phi: PhiOperator, lam: float, s: StatePair) -> tuple[StatePair, float]:
    image = phi_map(problem, phi, lam, s)
    r1 = s.x1.values - image.x1.values
    r2 = s.x2.values - image.x2.values
    sup = float(max(np.linalg.norm(r1, axis=-1).max(), np.linalg.norm(r2, axis=-1).max()))
    return StatePair.from_arrays(s.grid, r1, r2), sup


def newton_iterate(residual_fn, jacobian_fn, z, cfg: SolverConfig, damped=False):
    """Generic (optionally damped) Newton loop on a square system.

    ``residual_fn(z)`` returns ``(vector, sup_norm)``.  Convergence needs the
    residual below tolerance and either a small last step or a stalled
    residual.  The step test keeps Newton going at degenerate zeros, where
    the residual is cubic in the error; the stall test stops it once
    rounding dominates.  An initial guess already within tolerance is
    returned untouched.
    Returns ``(z, sup_norm, iterations, halvings)``.
    """
    r, sup = residual_fn(z)
    if not np.isfinite(sup):
        raise NoConvergence(0, sup, "non-finite residual at the initial guess")
    if sup <= cfg.residual_tol:
        return z, sup, 0, 0
    halvings_total = 0
    for it in range(1, cfg.max_newton_iters + 1):
        try:
            dz, _ = linear_step(jacobian_fn(z, r), -r, cfg.singular, it, sup)
        except SingularJacobian:
            if sup <= cfg.residual_tol:
                # degenerate solution (e.g. a cubic zero) already within tolerance
                return z, sup, it, halvings_total
            raise
        alpha = 1.0
        z_new = z + dz
        r_new, sup_new = residual_fn(z_new)
        if damped:
            base = np.linalg.norm(r)
            k = 0
            while not (np.isfinite(sup_new) and np.linalg.norm(r_new) < base) and k < cfg.max_halvings:
                alpha *= 0.5
                k += 1
                z_new = z + alpha * dz
                r_new, sup_new = residual_fn(z_new)
            if not (np.isfinite(sup_new) and np.linalg.norm(r_new) < base):
                # no decrease found: fall back to the full step
                alpha = 1.0
                z_new = z + dz
                r_new, sup_new = residual_fn(z_new)
            halvings_total += k
        if not np.isfinite(sup_new):
            raise NoConvergence(it, sup_new, "residual became non-finite")
        step = alpha * np.max(np.abs(dz))
        stalled = sup_new > STALL_RATIO * sup
        z, r, sup = z_new, r_new, sup_new
        if sup <= cfg.residual_tol and (stalled or step <= cfg.step_tol * (1.0 + np.max(np.abs(z)))):
            return z, sup, it, halvings_total
    raise NoConvergence(cfg.max_newton_iters, sup)


def newton_solve(
    problem: ProblemField,
    phi: PhiOperator,
    lam: float,
    initial: StatePair,
    cfg: SolverConfig | None = None,
) -> SolutionPair:
    """Solve ``s = Phi(lam, s)`` by Newton's method from ``initial``."""
    cfg = cfg or SolverConfig()
    problem.check_lambda(lam)
    disc = Discretization(problem, phi, initial.grid)
    z0 = disc.pack(initial)

    near_zero = bool(np.any(np.linalg.norm(initial.x2.values, axis=-1) < NEAR_ZERO_X2))
    damped = cfg.damping is Damping.LINE_SEARCH or (near_zero and phi.q > 0)

    def residual_fn(z):
        with np.errstate(all="ignore"):
            r = disc.residual_vector(lam, z)
        return r, disc.sup_of(r)

    def jacobian_fn(z, r):
        with np.errstate(all="ignore"):
            return disc.jacobian(lam, z, cfg.fd_step, r)

    z, sup, iters, halvings = newton_iterate(residual_fn, jacobian_fn, z0, cfg, damped)
    log.debug("newton converged at lambda=%g in %d iterations (residual %.2e)", lam, iters, sup)
    return disc.solution_pair(
        lam,
        z,
        {"iterations": iters, "damped": damped, "auto_damped": damped and cfg.damping is Damping.NONE,
         "halvings": halvings},
    )


def ode_residual_check(pair: SolutionPair, problem: ProblemField, phi: PhiOperator) -> float:
    """Defect of the ODE itself under centered differences (independent of Phi)."""
    s = pair.state
    dt = s.grid.dt
    xprime = phi.inverse(s.x2.values)
    forcing = np.broadcast_to(
        np.asarray(problem.rhs(pair.lam, s.grid.nodes, s.x1.values, xprime), dtype=float), xprime.shape
    )
    d2 = centered_difference(s.x2.values, dt) - forcing
    d1 = centered_difference(s.x1.values, dt) - xprime
    return float(np.linalg.norm(d2, axis=-1).max() + np.linalg.norm(d1, axis=-1).max())


def initial_state(grid: PeriodicGrid, dim: int, xbar=None) -> StatePair:
    if xbar is None:
        return StatePair.zeros(grid, dim)
    return StatePair.constant(grid, xbar)


def random_state(grid: PeriodicGrid, dim: int, phi: PhiOperator, c1_norm: float, rng, modes: int = 3) -> StatePair:
    """Smooth random periodic state whose C1 norm equals ``c1_norm``."""
    t = grid.nodes
    w = 2.0 * np.pi / grid.period
    x = np.tile(rng.normal(size=dim), (grid.n_nodes, 1))
    xp = np.zeros_like(x)
    for k in range(1, modes + 1):
        a, b = rng.normal(size=(2, dim)) / k
        x += np.outer(np.cos(k * w * t), a) + np.outer(np.sin(k * w * t), b)
        xp += k * w * (-np.outer(np.sin(k * w * t), a) + np.outer(np.cos(k * w * t), b))
    c1 = np.linalg.norm(x, axis=-1).max() + np.linalg.norm(xp, axis=-1).max()
    scale = c1_norm / c1
    return StatePair.from_position(grid, scale * x, scale * xp, phi)


__all__ = [
    "Damping",
    "Discretization",
    "GridFunction",
    "SingularPolicy",
    "SolverConfig",
    "initial_state",
    "nemitskii",
    "newton_solve",
    "ode_residual_check",
    "phi_map",
    "random_state",
    "residual",
]
