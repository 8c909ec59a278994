import numpy as np
import pytest

from phibranch.catalog import (
    G_HAT,
    ExampleParams,
    TimeFunction,
    check_a7,
    example_52_lambda_hat,
    g_sine,
    h0_cubic,
    lambda_hat,
    make_example,
    make_example_51,
    make_example_52,
    make_example_53,
    make_linear_validation,
    recip_abs_first,
)
from phibranch.continuation import DomainSpec, Quantity, trivial_start_points
from phibranch.degree import Box, OddCheck, degree_odd_shortcut, degree_oracle_preimage
from phibranch.errors import InvalidParams, LambdaOutOfDomain, ZeroIntegral
from phibranch.model import PeriodicGrid, StatePair
from phibranch.solver import newton_solve, residual

TWO_PI = 2 * np.pi
# gamma of |xi|^2 xi: max of r - r^4
GAMMA_CUBE = 3.0 / 4.0 ** (4.0 / 3.0)


def test_time_function():
    assert TimeFunction.parse("const:1.5")(np.zeros(3)).tolist() == [1.5] * 3
    f = TimeFunction.parse("sin:2,3,0.5")
    assert f(1.0) == pytest.approx(2 * np.sin(3.5))
    assert f.integral(TWO_PI) == pytest.approx(0.0, abs=1e-12)
    p = TimeFunction.parse("poly:1,0,3")
    assert p.integral(2.0) == pytest.approx(2 + 8)
    assert str(p) == "poly:1.0,0.0,3.0"
    for bad in ("sin:1,2", "exp:1", "const"):
        with pytest.raises(ValueError):
            TimeFunction.parse(bad)


def test_lambda_hat():
    assert lambda_hat(TWO_PI, 1.0, TWO_PI) == 1.0
    assert lambda_hat(1.0, 0.0, 1.0) == 0.0
    with pytest.raises(ZeroIntegral):
        lambda_hat(1.0, 1.0, 0.0)
    assert example_52_lambda_hat(ExampleParams()) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("eid", ["ex51", "ex52", "ex53"])
def test_autonomous_at_zero(eid):
    ex = make_example(eid)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 2))
    y = rng.normal(size=(100, 2))
    f0 = ex.problem.f0(x, y)
    for t in np.linspace(0, ex.problem.period, 16):
        np.testing.assert_array_equal(ex.problem.rhs(0.0, np.full(100, t), x, y), f0)


def test_ex51_a3_sampled():
    ex = make_example_51()
    rng = np.random.default_rng(2)
    d = rng.normal(size=(1000, 2))
    x = d / np.linalg.norm(d, axis=-1, keepdims=True) * rng.uniform(1.0, 50.0, size=(1000, 1))
    for lam in (-3.0, 0.0, 2.0):
        h = ex.problem.rhs(lam, np.zeros(1000), x, np.zeros_like(x))
        assert np.all(np.einsum("ij,ij->i", h, x) > 0)


def test_ex51_monitors():
    ex = make_example_51()
    names = {m.name: m for m in ex.monitors}
    T = TWO_PI
    assert names["sup_x_bound"].bound(0.0) == pytest.approx(1.0 + T * GAMMA_CUBE, abs=1e-10)
    assert names["sup_x_bound"].bound(7.0) == names["sup_x_bound"].bound(0.0)
    assert names["l1_xprime_bound"].bound(3.0) == pytest.approx(T * GAMMA_CUBE, abs=1e-10)
    assert names["sup_xprime_bound"].quantity is Quantity.SUP_XPRIME


def test_ex51_params():
    with pytest.raises(InvalidParams):
        make_example_51(ExampleParams(e1=TimeFunction.const(-1.0)))
    with pytest.raises(InvalidParams):
        make_example_51(ExampleParams(ell=lambda lam: lam + 1.0))
    with pytest.raises(InvalidParams):
        make_example_51(ExampleParams(G="cubic"))
    ex = make_example_51(ExampleParams(G="quadratic"))
    x = np.ones((4, 2))
    y = np.full((4, 2), 2.0)
    np.testing.assert_allclose(ex.problem.rhs(1.0, np.zeros(4), x, y) - ex.problem.rhs(1.0, np.zeros(4), x, 0 * y), y)


def test_ex51_small_example():
    ex = make_example_51(ExampleParams(T=1.0, e1=TimeFunction.const(0.0), e2=TimeFunction.const(0.0)))
    np.testing.assert_allclose(ex.problem.f0_slice(np.array([[0.3, -0.2]])), [[0.3, -0.2]])
    starts = trivial_start_points(ex.problem, DomainSpec.for_problem(ex.problem))
    assert len(starts) == 1 and starts.total_degree == 1


def test_ex51_lambda_zero_unique():
    ex = make_example_51()
    g = PeriodicGrid(32, TWO_PI)
    rng = np.random.default_rng(11)
    from phibranch.solver import random_state

    for _ in range(20):
        s = random_state(g, 2, ex.phi, rng.uniform(0.05, 0.5), rng)
        pair = newton_solve(ex.problem, ex.phi, 0.0, s)
        assert pair.c1_norm <= 1e-6


def test_ex52_bounded_component():
    rng = np.random.default_rng(4)
    x = rng.uniform(-5, 5, size=(100_000, 2))
    h1 = recip_abs_first(x) * x[:, 0]
    assert np.abs(h1).max() <= 1.0
    near = rng.uniform(-1e-3, 1e-3, size=(1000, 2))
    far = near.copy()
    far[:, 0] = np.sign(near[:, 0]) * 1e6
    assert np.abs(recip_abs_first(far) * far[:, 0]).max() >= 0.999
    assert recip_abs_first(near).min() >= 0.999


def test_ex52_params():
    with pytest.raises(InvalidParams):
        make_example_52(ExampleParams(e1=TimeFunction.parse("sin:1,1,0")))
    ex = make_example_52()
    assert ex.monitors[0].quantity is Quantity.ABS_LAMBDA
    assert ex.monitors[0].bound(0.3) == pytest.approx(1.0)


def test_ex53_structure():
    ex = make_example_53()
    assert ex.problem.lambda_interval == (-1.0, 1.0)
    rng = np.random.default_rng(5)
    z = rng.normal(size=(500, 2)) * 3
    r = np.linalg.norm(z, axis=-1)
    np.testing.assert_allclose(np.einsum("ij,ij->i", h0_cubic(z), z), r**4, rtol=1e-12)
    big = r >= 1
    assert np.all(r[big] ** 4 >= r[big] ** 2)
    # the argument of sin sweeps R, so |g| reaches 1
    lam = np.linspace(-0.999999, 0.999999, 200_001)
    assert np.abs(g_sine(lam)).max() == pytest.approx(G_HAT, abs=1e-6)
    for delta in (0.1, 1.0, 5.0):
        box = Box.cube(delta, 2)
        assert degree_oracle_preimage(h0_cubic, box, (0.1 * delta**3, 0.07 * delta**3)) == 1
        assert degree_odd_shortcut(h0_cubic, box) is OddCheck.ODD_HENCE_NONZERO
    g = PeriodicGrid(16, TWO_PI)
    with pytest.raises(LambdaOutOfDomain):
        residual(ex.problem, ex.phi, 1.0, StatePair.zeros(g, 2))


def test_ex53_bounds_positive():
    ex = make_example_53()
    b = {m.name: m.bound(0.5) for m in ex.monitors}
    assert b["sup_x_bound"] >= 1.0
    assert b["sup_xprime_bound"] > 0


def test_check_a7_rejects():
    with pytest.raises(InvalidParams):
        check_a7(lambda x: 0.5 * x, ExampleParams())


def test_linear_validation():
    ex = make_linear_validation(1.0)
    assert ex.problem.dim == 1 and ex.phi.q == 0.0
    with pytest.raises(InvalidParams):
        make_linear_validation(0.0)
    assert make_example("linval").problem.period == 1.0
    with pytest.raises(InvalidParams):
        make_example("ex99")
