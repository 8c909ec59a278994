import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phibranch.errors import LambdaOutOfDomain, NonZeroMeanInput
from phibranch.model import (
    GridFunction,
    PeriodicGrid,
    ProblemField,
    StatePair,
    cumulative_integral_zero_mean,
    discrete_derivative,
    mean,
    norms,
)
from phibranch.phi import PhiOperator

TWO_PI = 2 * np.pi


def sampled(grid, fn):
    return GridFunction.from_callable(grid, fn)


def test_grid_layout():
    g = PeriodicGrid(16, 2.0)
    assert g.dt == pytest.approx(0.125)
    assert np.all(np.diff(g.nodes) > 0)
    np.testing.assert_allclose(np.diff(g.nodes), g.dt)
    assert g.nodes[0] == 0.0 and g.nodes[-1] < g.period
    with pytest.raises(ValueError):
        PeriodicGrid(4, 1.0)


def test_grid_function_wraps():
    g = PeriodicGrid(8, 1.0)
    u = sampled(g, lambda t: t)
    np.testing.assert_array_equal(u(8), u(0))
    np.testing.assert_array_equal(u(-1), u(7))
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(7))
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0


def test_mean_examples():
    g = PeriodicGrid(64, 1.0)
    np.testing.assert_allclose(mean(GridFunction.constant(g, [1.5, -2.0])), [1.5, -2.0])
    assert abs(mean(sampled(g, lambda t: np.sin(TWO_PI * t)))[0]) <= 1e-14
    assert mean(sampled(g, lambda t: np.sin(TWO_PI * t) ** 2))[0] == pytest.approx(0.5, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**32 - 1))
def test_mean_linear(a, b, seed):
    g = PeriodicGrid(32, 1.0)
    r = np.random.default_rng(seed)
    u, v = GridFunction(g, r.normal(size=32)), GridFunction(g, r.normal(size=32))
    lhs = mean(GridFunction(g, a * u.values + b * v.values))
    np.testing.assert_allclose(lhs, a * mean(u) + b * mean(v), atol=1e-13 * (1 + abs(a) + abs(b)))


def test_cumulative_integral_examples(grid128):
    zero = GridFunction.constant(grid128, 0.0)
    np.testing.assert_array_equal(cumulative_integral_zero_mean(zero).values, 0.0)
    u = sampled(grid128, lambda t: np.cos(TWO_PI * t))
    v = cumulative_integral_zero_mean(u)
    exact = np.sin(TWO_PI * grid128.nodes) / TWO_PI
    assert np.abs(v.values[:, 0] - exact).max() <= 1e-3
    assert abs(mean(v)[0]) <= 1e-12


def test_cumulative_integral_rejects_mean(grid128):
    u = sampled(grid128, lambda t: np.cos(TWO_PI * t) + 1e-3)
    with pytest.raises(NonZeroMeanInput):
        cumulative_integral_zero_mean(u)


def test_derivative_examples(grid128):
    c = GridFunction.constant(grid128, [3.0, -1.0])
    np.testing.assert_array_equal(discrete_derivative(c).values, 0.0)
    u = sampled(grid128, lambda t: np.sin(TWO_PI * t))
    d = discrete_derivative(u).values[:, 0]
    err = np.abs(d - TWO_PI * np.cos(TWO_PI * grid128.nodes)).max()
    # the centered difference of sin(w t) is sinc(w dt) w cos(w t)
    wdt = TWO_PI * grid128.dt
    assert err == pytest.approx(TWO_PI * (1 - np.sin(wdt) / wdt), rel=1e-6)
    assert err <= 2.6e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([32, 64, 128]))
def test_derivative_inverts_integral(seed, N):
    g = PeriodicGrid(N, 1.0)
    r = np.random.default_rng(seed)
    a = r.normal(size=3)
    u = sampled(g, lambda t: a[0] + a[1] * np.cos(TWO_PI * t) + a[2] * np.sin(2 * TWO_PI * t))
    zero_mean = GridFunction(g, u.values - mean(u))
    back = discrete_derivative(cumulative_integral_zero_mean(zero_mean)).values
    # sup |u''| <= |a1| (2 pi)^2 + |a2| (4 pi)^2
    upp = abs(a[1]) * TWO_PI**2 + abs(a[2]) * (2 * TWO_PI) ** 2
    assert np.abs(back - zero_mean.values).max() <= 5 * g.dt**2 * upp + 1e-12
    assert abs(mean(cumulative_integral_zero_mean(zero_mean))[0]) <= 1e-12 * (1 + np.abs(u.values).max())


def test_norms_examples(grid128):
    ident = PhiOperator.identity()
    assert norms(StatePair.zeros(grid128, 2), ident) == (0.0, 0.0, 0.0, 0.0)
    t = grid128.nodes
    x1 = np.stack([np.sin(TWO_PI * t), 0 * t], axis=-1)
    xp = np.stack([TWO_PI * np.cos(TWO_PI * t), 0 * t], axis=-1)
    s = StatePair.from_position(grid128, x1, xp, ident)
    nrm = norms(s, ident)
    assert nrm.sup_x == pytest.approx(1.0, abs=1e-3)
    assert nrm.sup_xprime == pytest.approx(TWO_PI, abs=1e-3)
    assert nrm.c1 == nrm.sup_x + nrm.sup_xprime
    # L1 norm of 2 pi cos over one period is 4
    assert nrm.l1_xprime == pytest.approx(4.0, abs=1e-3)
    doubled = norms(s.scaled(2.0), ident)
    assert tuple(doubled) == tuple(2 * v for v in nrm)


def test_norms_recover_velocity_through_phi(grid128):
    cube = PhiOperator.power_radial(2)
    t = grid128.nodes
    xp = np.stack([np.cos(TWO_PI * t), np.sin(TWO_PI * t)], axis=-1) * 0.5
    s = StatePair.from_position(grid128, np.zeros_like(xp), xp, cube)
    assert norms(s, cube).sup_xprime == pytest.approx(0.5, rel=1e-14)


def test_problem_field_checks():
    f = ProblemField(1, 1.0, lambda lam, t, x, y: x, lambda x, y: x, lambda_interval=(-1.0, 1.0))
    assert f.contains(0.5) and not f.contains(1.0)
    with pytest.raises(LambdaOutOfDomain):
        f.check_lambda(-1.0)
    with pytest.raises(ValueError):
        ProblemField(1, 1.0, f.rhs, f.f0, lambda_interval=(0.0, 1.0))
    with pytest.raises(ValueError):
        ProblemField(0, 1.0, f.rhs, f.f0)
    np.testing.assert_array_equal(f.f0_slice(np.array([[2.0]])), [[2.0]])


def test_state_pair_shape_checks():
    g, h = PeriodicGrid(8, 1.0), PeriodicGrid(8, 2.0)
    with pytest.raises(ValueError):
        StatePair(GridFunction(g, np.zeros(8)), GridFunction(h, np.zeros(8)))
    with pytest.raises(ValueError):
        StatePair(GridFunction(g, np.zeros((8, 1))), GridFunction(g, np.zeros((8, 2))))
