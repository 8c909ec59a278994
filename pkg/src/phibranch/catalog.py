"""Ready-made problems: the three planar applications and a linear check.

All three applications use phi(xi) = |xi|^2 xi and the sign convention
(phi(x'))' = F(lambda, t, x, x').  Each displayed system already has that
form, so F is read off the right-hand side without a sign change.

ids: ``ex51`` (branch unbounded in lambda), ``ex52`` (unbounded in x,
bounded in lambda), ``ex53`` (bounded branch reaching the ends of
I = (-1, 1)), ``linval`` (linear problem with a closed-form solution).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from .continuation import BoundMonitor, Quantity
from .errors import InvalidParams, ZeroIntegral
from .model import ProblemField
from .phi import PhiOperator

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TimeFunction:
    """Scalar function of t: ``const:c``, ``sin:a,omega,phase`` or ``poly:c0,c1,...``."""

    kind: str
    coeffs: tuple[float, ...]

    def __post_init__(self):
        arity = {"const": (1, 1), "sin": (3, 3), "poly": (1, 64)}
        if self.kind not in arity:
            raise ValueError(f"unknown function kind {self.kind!r}")
        lo, hi = arity[self.kind]
        if not lo <= len(self.coeffs) <= hi:
            raise ValueError(f"{self.kind} takes {lo}..{hi} coefficients, got {len(self.coeffs)}")

    @classmethod
    def const(cls, c: float) -> TimeFunction:
        return cls("const", (float(c),))

    @classmethod
    def parse(cls, text: str) -> TimeFunction:
        kind, _, rest = text.strip().partition(":")
        if not rest:
            raise ValueError(f"expected kind:coefficients, got {text!r}")
        return cls(kind.strip(), tuple(float(v) for v in rest.split(",")))

    def __str__(self):
        return f"{self.kind}:" + ",".join(repr(c) for c in self.coeffs)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return np.full_like(t, self.coeffs[0])
        if self.kind == "sin":
            a, w, ph = self.coeffs
            return a * np.sin(w * t + ph)
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def integral(self, T: float) -> float:
        """Exact integral over [0, T]."""
        if self.kind == "const":
            return self.coeffs[0] * T
        if self.kind == "sin":
            a, w, ph = self.coeffs
            if w == 0.0:
                return a * np.sin(ph) * T
            return a * (np.cos(ph) - np.cos(w * T + ph)) / w
        return float(sum(c * T ** (k + 1) / (k + 1) for k, c in enumerate(self.coeffs)))

    def sup_abs(self, T: float, samples: int = 8193) -> float:
        if self.kind == "const":
            return abs(self.coeffs[0])
        return float(np.abs(self(np.linspace(0.0, T, samples))).max())

    def min_value(self, T: float, samples: int = 8193) -> float:
        if self.kind == "const":
            return self.coeffs[0]
        return float(self(np.linspace(0.0, T, samples)).min())


def _constant_coefficient(c: float) -> Callable:
    def a(x):
        return np.full(np.shape(x)[:-1], float(c))

    a.sup_on_ball = lambda radius, c=c: abs(float(c))
    return a


def recip_abs_first(x):
    """a(x1, x2) = 1 / (|x1| + 1)."""
    return 1.0 / (np.abs(np.asarray(x)[..., 0]) + 1.0)


@dataclass(frozen=True)
class ExampleParams:
    """Parameters shared by the catalog; each constructor reads what it needs.

    ``a1``/``a2`` are positive coefficient functions of x (shape ``(..., 2)``
    to ``(...)``); ``e1``/``e2`` are functions of t.  ``ell`` is the
    coupling of the Lienard term in ex51 and ``G`` selects its potential:
    ``"none"`` or ``"quadratic"`` (G(x) = |x|^2 / 2).
    """

    T: float = TWO_PI
    e1: TimeFunction = TimeFunction.const(1.0)
    e2: TimeFunction = TimeFunction.const(1.0)
    a1: Callable | None = None
    a2: Callable | None = None
    ell: Callable[[float], float] = abs
    G: str = "none"
    K0: Callable[[float], float] = lambda lam: 0.0  # noqa: E731
    R: float = 1.0
    C0: float = 1.0
    sigma: float = 2.0
    R0: float = 1.0
    delta: float = 1.0
    p: tuple[float, float] = (0.0, 0.0)
    sup_h1: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def e_vector(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([self.e1(t), self.e2(t)], axis=-1)

    def e_sup(self, samples: int = 8193) -> float:
        """sup_t |e(t)| with the Euclidean norm on R^2."""
        t = np.linspace(0.0, self.T, samples)
        return float(np.linalg.norm(self.e_vector(t), axis=-1).max())


class Example(NamedTuple):
    problem: ProblemField
    phi: PhiOperator
    monitors: tuple[BoundMonitor, ...]


def _sample_ball(radius: float, n: int = 2, radii: int = 65, angles: int = 720) -> np.ndarray:
    """Polar sample of the closed ball in R^2 (boundary included)."""
    if n == 1:
        return np.linspace(-radius, radius, 2 * radii + 1)[:, None]
    r = np.linspace(0.0, radius, radii)
    th = np.linspace(0.0, TWO_PI, angles, endpoint=False)
    R, TH = np.meshgrid(r, th, indexing="ij")
    return np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1).reshape(-1, 2)


def _sup_on_ball(fn, radius: float) -> float:
    if hasattr(fn, "sup_on_ball"):
        return float(fn.sup_on_ball(radius))
    return float(np.abs(fn(_sample_ball(radius))).max())


def lambda_hat(T: float, sup_h_i: float, integral_e_i: float) -> float:
    """Threshold beyond which no solution pair exists: T sup|h_i| / |int e_i|."""
    if abs(integral_e_i) < 1e-14:
        raise ZeroIntegral(f"integral of e_i is {integral_e_i!r}")
    return T * sup_h_i / abs(integral_e_i)


def _e_columns(params: ExampleParams, t):
    # (N,) -> (N, 2), broadcast against states of shape (..., N, 2)
    return params.e_vector(t)


def _hessian_term(G: str, x, y):
    if G == "none":
        return np.zeros_like(np.asarray(y, dtype=float))
    if G == "quadratic":
        return np.asarray(y, dtype=float)  # Hess G = I
    raise InvalidParams(f"unknown potential G={G!r}")


def _hessian_sup(G: str) -> float:
    return {"none": 0.0, "quadratic": 1.0}[G]


def _check_positive(fn, name):
    pts = np.random.default_rng(0).uniform(-10, 10, size=(2000, 2))
    if not np.all(fn(pts) > 0):
        raise InvalidParams(f"{name} must be positive")


# ex51


def make_example_51(params: ExampleParams | None = None) -> Example:
    """(phi(x'))' = ell(lambda) d/dt grad G(x) + a(x) x + |lambda| e(t) x, componentwise a, e."""
    params = params or ExampleParams()
    a1 = params.a1 or _constant_coefficient(1.0)
    a2 = params.a2 or _constant_coefficient(1.0)
    _check_positive(a1, "a1")
    _check_positive(a2, "a2")
    for name, e in (("e1", params.e1), ("e2", params.e2)):
        if e.min_value(params.T) < 0:
            raise InvalidParams(f"{name} must be nonnegative")
    if params.ell(0.0) != 0.0:
        raise InvalidParams("ell(0) must be 0")
    ell, G = params.ell, params.G
    _hessian_term(G, np.zeros(2), np.zeros(2))

    def h0(x):
        return np.stack([a1(x), a2(x)], axis=-1) * x

    def rhs(lam, t, x, y):
        return ell(lam) * _hessian_term(G, x, y) + h0(x) + abs(lam) * _e_columns(params, t) * x

    def f0(x, y):
        return ell(0.0) * _hessian_term(G, x, y) + h0(x)

    problem = ProblemField(2, params.T, rhs, f0, name="ex51", params=replace(params, a1=a1, a2=a2))
    phi = PhiOperator.power_radial(2)
    return Example(problem, phi, example_51_monitors(problem.params, phi))


def example_51_monitors(params: ExampleParams, phi: PhiOperator) -> tuple[BoundMonitor, ...]:
    T, R, gamma = params.T, params.R, phi.gamma

    def K(lam):
        # max of K0 over [-|lam|, |lam|], sampled
        return max(params.K0(s) for s in np.linspace(-abs(lam), abs(lam), 33))

    def phi_xprime_bound(lam):
        radius = R + T * K(lam) + T * gamma
        a_sup = max(_sup_on_ball(params.a1, radius), _sup_on_ball(params.a2, radius))
        t = np.linspace(0.0, T, 2049)
        e_max = np.maximum(params.e1(t), params.e2(t))
        g_l1 = trapezoid(radius * (a_sup + abs(lam) * e_max), t)
        return abs(params.ell(lam)) * _hessian_sup(params.G) * (T * K(lam) + T * gamma) + g_l1

    return (
        BoundMonitor("sup_x_bound", lambda lam: R + T * params.K0(lam) + T * gamma, Quantity.SUP_X),
        BoundMonitor("l1_xprime_bound", lambda lam: T * params.K0(lam) + T * gamma, Quantity.L1_XPRIME),
        BoundMonitor(
            "sup_xprime_bound", lambda lam: float(phi.radial_inverse(phi_xprime_bound(lam))), Quantity.SUP_XPRIME
        ),
    )


# ex52


def make_example_52(params: ExampleParams | None = None) -> Example:
    """(phi(x'))' = a(x) x + lambda e(t) with a1(x) = 1/(|x1| + 1), so h_1 is bounded by 1."""
    params = params or ExampleParams()
    a1 = params.a1 or recip_abs_first
    a2 = params.a2 or _constant_coefficient(1.0)
    _check_positive(a1, "a1")
    _check_positive(a2, "a2")
    integral = params.e1.integral(params.T)
    if abs(integral) < 1e-14:
        raise InvalidParams("the integral of e1 over a period must be nonzero")
    G = params.G

    def h0(x):
        return np.stack([a1(x), a2(x)], axis=-1) * x

    def rhs(lam, t, x, y):
        return lam * _hessian_term(G, x, y) + h0(x) + lam * _e_columns(params, t)

    def f0(x, y):
        return 0.0 * _hessian_term(G, x, y) + h0(x)

    problem = ProblemField(2, params.T, rhs, f0, name="ex52", params=replace(params, a1=a1, a2=a2))
    lam_hat = lambda_hat(params.T, params.sup_h1, integral)
    monitors = (BoundMonitor("lambda_hat_1", lambda lam: lam_hat, Quantity.ABS_LAMBDA),)
    return Example(problem, PhiOperator.power_radial(2), monitors)


def example_52_lambda_hat(params: ExampleParams) -> float:
    return lambda_hat(params.T, params.sup_h1, params.e1.integral(params.T))


# ex53


def h0_cubic(x):
    """h0(x1, x2) = (x1^3 + x1 x2^2, x2^3 + x1^2 x2) = |x|^2 x."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([x1**3 + x1 * x2**2, x2**3 + x1**2 * x2], axis=-1)


def g_sine(lam):
    """sin(lambda / sqrt(1 - lambda^2)), defined on (-1, 1)."""
    lam = np.asarray(lam, dtype=float)
    return np.sin(lam / np.sqrt(1.0 - lam * lam))


# sup over (-1, 1) of |g_sine|: the argument sweeps all of R
G_HAT = 1.0


@dataclass(frozen=True)
class Bounds53:
    R_hat: float
    R: float
    K: float
    L_R: float
    L_phi: float
    M_R: float


def example_53_bounds(params: ExampleParams, phi: PhiOperator, h0=h0_cubic, g_hat=G_HAT) -> Bounds53:
    """Sup-norm bounds R and M_R for ex53, assembled from the a priori estimates."""
    e_sup = params.e_sup()
    growth = (g_hat * e_sup / params.C0) ** (1.0 / (params.sigma - 1.0))
    R_hat = max(params.R0, params.delta, growth * (1.0 + 1e-9))
    if not params.C0 * R_hat ** (params.sigma - 1.0) - g_hat * e_sup > 0:
        raise InvalidParams("could not choose R_hat")
    R = R_hat * (1.0 + 1e-3)
    h_max = float(np.linalg.norm(h0(_sample_ball(R)), axis=-1).max())
    K = h_max + g_hat * e_sup
    # A(xi)|xi|^2 = r^(q+2) for a radial power operator
    L_R = (K * R) ** (1.0 / (phi.q + 2.0))
    L_phi = float(phi.radial(L_R))
    M_R = float(phi.radial_inverse(L_phi + params.T * K))
    return Bounds53(R_hat, R, K, L_R, L_phi, M_R)


def make_example_53(params: ExampleParams | None = None) -> Example:
    """(phi(x'))' = h0(x) + g(lambda) e(t), lambda in (-1, 1)."""
    params = params or ExampleParams()
    check_a7(h0_cubic, params)

    def rhs(lam, t, x, y):
        return h0_cubic(x) + g_sine(lam) * _e_columns(params, t)

    def f0(x, y):
        return h0_cubic(x)

    problem = ProblemField(2, params.T, rhs, f0, lambda_interval=(-1.0, 1.0), name="ex53", params=params)
    phi = PhiOperator.power_radial(2)
    b = example_53_bounds(params, phi)
    monitors = (
        BoundMonitor("sup_x_bound", lambda lam: b.R, Quantity.SUP_X),
        BoundMonitor("sup_xprime_bound", lambda lam: b.M_R, Quantity.SUP_XPRIME),
    )
    return Example(problem, phi, monitors)


def check_a7(h0, params: ExampleParams, samples: int = 2000) -> None:
    """Sampled check of <h0(xi), xi> >= C0 |xi|^sigma for |xi| >= R0."""
    rng = np.random.default_rng(1)
    d = rng.normal(size=(samples, 2))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    r = params.R0 * np.exp(rng.uniform(0.0, np.log(100.0), size=samples))
    xi = d * r[:, None]
    lhs = np.einsum("ij,ij->i", h0(xi), xi)
    if not np.all(lhs >= params.C0 * r**params.sigma * (1 - 1e-12)):
        raise InvalidParams("h0 violates the coercivity condition for |xi| >= R0")


# linear validation


def make_linear_validation(T: float = 1.0) -> Example:
    """x'' = x - sin(2 pi t / T), solved by x = sin(2 pi t / T) / (1 + (2 pi / T)^2).

    Identity phi and t-dependent F at lambda = 0: a solver check outside
    the class of the applications.
    """
    if not T > 0:
        raise InvalidParams("T must be positive")
    w = TWO_PI / T

    def rhs(lam, t, x, y):
        return x - np.sin(w * np.asarray(t))[:, None]

    def f0(x, y):
        return np.asarray(x, dtype=float)

    problem = ProblemField(1, T, rhs, f0, name="linval", params={"T": T, "autonomous_at_zero": False})
    return Example(problem, PhiOperator.identity(), ())


def linear_validation_exact(t, T: float = 1.0):
    w = TWO_PI / T
    return np.sin(w * np.asarray(t)) / (1.0 + w * w)


CATALOG = {
    "ex51": make_example_51,
    "ex52": make_example_52,
    "ex53": make_example_53,
}


def make_example(example_id: str, params: ExampleParams | None = None) -> Example:
    if example_id == "linval":
        return make_linear_validation(params.T if params is not None else 1.0)
    try:
        ctor = CATALOG[example_id]
    except KeyError:
        raise InvalidParams(f"unknown problem id {example_id!r}") from None
    return ctor(params)
