import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltanls.halfline import (
    derivatives_at_origin, even_exp_evolved, free_halfline_exp, halfline_sweep,
    onesided_derivatives, pick_exponents,
)

# (2 pi i t)^{-1/2} int_{-inf}^0 exp(i (x-y)^2 / 2t) exp(kappa y) dy by
# 30-digit mpmath quadrature, frozen
MPMATH_HALFLINE = [
    ((2.0, 0.5, 0.3), 0.21054546425303 - 0.050152028241574456j),
    ((2.0, 0.5, -0.7), 0.22877578769803578 - 0.14074557728017312j),
    ((1.0, 2.0, 1.5), 0.16516022688376872 + 0.08218780170829457j),
    ((3.0, 0.1, 0.0), 0.275314270967589 - 0.11431188622930398j),
]


@pytest.mark.parametrize("args,expected", MPMATH_HALFLINE)
def test_free_halfline_exp_against_quadrature(args, expected):
    kappa, t, x = args
    got = free_halfline_exp(kappa, t, np.array([x]))[0]
    assert abs(got - expected) < 1e-11


def test_free_halfline_exp_initial_value():
    x = np.array([-2.0, -0.5, 0.0, 0.5])
    got = free_halfline_exp(1.5, 0.0, x)
    assert np.allclose(got, [np.exp(-3.0), np.exp(-0.75), 0.5, 0.0])


def test_free_halfline_exp_time_reversal():
    x = np.linspace(-5, 5, 41)
    assert np.allclose(free_halfline_exp(2.0, -0.7, x), np.conj(free_halfline_exp(2.0, 0.7, x)))


def test_free_halfline_exp_no_overflow_far_left():
    x = np.linspace(-300, 300, 601)
    v = free_halfline_exp(4.0, 3.0, x)
    assert np.all(np.isfinite(v))
    # far from 0 only the radiation from the jump is left, of size ~ sqrt(t)/|x|
    assert np.max(np.abs(v[np.abs(x) > 100])) < 0.01


def test_free_halfline_exp_solves_schroedinger():
    # i u_t = -u_xx / 2, checked by centered differences
    x = np.linspace(-3, 3, 13)
    t, h = 0.8, 1e-3
    ut = (free_halfline_exp(1.0, t + h, x) - free_halfline_exp(1.0, t - h, x)) / (2 * h)
    uxx = (free_halfline_exp(1.0, t, x + h) - 2 * free_halfline_exp(1.0, t, x)
           + free_halfline_exp(1.0, t, x - h)) / h**2
    assert np.max(np.abs(1j * ut + 0.5 * uxx)) < 1e-5


@pytest.mark.parametrize("q", [0.5, 1.0, 3.0])
def test_even_exp_evolved_jump_condition(q):
    # u'(0+) - u'(0-) = 2 q u(0) for every t
    kappa, t, h = 1.7, 0.6, 1e-5
    up = even_exp_evolved(kappa, q, t, np.array([h, 2 * h]))
    u0 = even_exp_evolved(kappa, q, t, np.array([0.0]))[0]
    right = (-3 * u0 + 4 * up[0] - up[1]) / (2 * h)
    jump = 2 * right  # even in x
    assert abs(jump - 2 * q * u0) < 1e-4 * max(1.0, abs(u0))


def test_even_exp_evolved_preserves_mass():
    x = np.linspace(-400, 400, 2**17, endpoint=False)
    dx = x[1] - x[0]
    kappa = 1.2
    u = even_exp_evolved(kappa, 1.0, 2.0, x)
    assert np.sum(np.abs(u) ** 2) * dx == pytest.approx(1 / kappa, rel=2e-3)


def test_even_exp_evolved_at_time_zero():
    x = np.linspace(-4, 4, 33)
    assert np.allclose(even_exp_evolved(2.0, 0.5, 0.0, x), np.exp(-2 * np.abs(x)))


def test_pick_exponents_keeps_distance_from_q():
    ks = pick_exponents(3.1, 4)
    assert len(ks) == 4
    assert all(abs(k - 3.1) > 0.4 for k in ks)


def test_onesided_derivatives_of_polynomial():
    dx = 0.05
    s = np.arange(10) * dx
    f = 1 + 2 * s - 3 * s**2 + 0.5 * s**3
    d = onesided_derivatives(f, dx, 3)
    assert np.allclose(d, [1, 2, -6, 3], atol=1e-8)


def test_left_limit_derivatives():
    dx = 0.01
    x = np.arange(-20, 21) * dx
    v = np.where(x <= 0, np.exp(x), 5.0)
    d = derivatives_at_origin(v, 20, dx, 3, side=-1)
    assert np.allclose(d, 1.0, atol=1e-6)


def test_sweep_closed_form_h_equal_one():
    # h = 1 on [x, 0]: G = -q e^{qx} int_x^0 e^{-qy} dy = e^{qx} - 1
    q, dx = 1.3, 0.01
    x = -np.arange(500)[::-1] * dx
    for scheme in ("lagrange", "trapezoid"):
        G = halfline_sweep(np.ones_like(x), q, dx, scheme=scheme)
        tol = 1e-13 if scheme == "lagrange" else 2e-5
        assert np.max(np.abs(G - (np.exp(q * x) - 1))) < tol


def _cubic_exact(q, x):
    # G for h(y) = y^3: -q e^{qx} int_x^0 y^3 e^{-qy} dy
    def anti(y):
        return -np.exp(-q * y) * (y**3 / q + 3 * y**2 / q**2 + 6 * y / q**3 + 6 / q**4)
    return -q * np.exp(q * x) * (anti(0.0) - anti(x))


def test_lagrange_sweep_exact_for_cubics():
    q, dx = 0.8, 0.05
    x = -np.arange(200)[::-1] * dx
    G = halfline_sweep(x**3, q, dx, scheme="lagrange")
    assert np.max(np.abs(G - _cubic_exact(q, x))) < 1e-10


def test_trapezoid_sweep_is_second_order():
    q = 0.8
    errs = []
    for m in (100, 200, 400):
        dx = 4.0 / m
        x = -np.arange(m + 1)[::-1] * dx
        G = halfline_sweep(np.cos(3 * x), q, dx, scheme="trapezoid")
        # exact: -q e^{qx} int_x^0 cos(3y) e^{-qy} dy
        def anti(y):
            return np.exp(-q * y) * (-q * np.cos(3 * y) + 3 * np.sin(3 * y)) / (q**2 + 9)
        exact = -q * np.exp(q * x) * (anti(0.0) - anti(x))
        errs.append(np.max(np.abs(G - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)


def test_sweep_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        halfline_sweep(np.ones(10), 1.0, 0.1, scheme="simpson")


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), q=st.floats(0.1, 4))
def test_sweep_is_linear(a, b, q):
    dx = 0.05
    x = -np.arange(64)[::-1] * dx
    h1, h2 = np.cos(x), np.exp(x)
    lhs = halfline_sweep(a * h1 + b * h2, q, dx)
    rhs = a * halfline_sweep(h1, q, dx) + b * halfline_sweep(h2, q, dx)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + abs(a) + abs(b))
