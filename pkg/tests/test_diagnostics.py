import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from deltanls.diagnostics import (
    band_split, dispersion_decay_fit, make_weight, rigidity_lower_bound, smooth_cutoff,
    strichartz_spacetime_norm, translation_agreement, virial_refinement, virial_rhs, virial_series,
)
from deltanls.grid import l2_norm, make_grid
from deltanls.solver import NLSParams, evolve

from conftest import gaussian


def test_decay_fit_free_gaussian():
    g = make_grid(8192, 200.0)
    t = np.geomspace(2, 20, 6)
    fit = dispersion_decay_fit(gaussian(g), 0.0, t)
    exact = (1 + t**2) ** -0.25
    assert np.allclose(fit.sup_norms, exact, rtol=1e-10)
    slope = np.polyfit(np.log(t), np.log(exact), 1)[0]
    assert fit.fitted_slope == pytest.approx(slope, abs=1e-9)


def test_decay_fit_needs_a_decade(grid):
    with pytest.raises(ValueError):
        dispersion_decay_fit(gaussian(grid), 1.0, [1.0, 5.0])
    with pytest.raises(ValueError):
        dispersion_decay_fit(gaussian(grid), 1.0, [0.0, 10.0])


def test_decay_fit_reports_small_box(grid):
    with pytest.raises(RuntimeError):
        dispersion_decay_fit(gaussian(grid), 1.0, [1.0, 100.0])


def test_strichartz_norm_of_free_gaussian():
    g = make_grid(4096, 60.0)
    p, r = 70 / 9, 7.0
    tr = evolve(gaussian(g), NLSParams(0.0, 5.0, coupling=0.0), 2.0, 0.01, stride=1,
                scalars=False, boundary_tol=1.0)

    # ||u(t)||_r^r = (1+t^2)^{-r/4} sqrt(2 pi (1+t^2) / r)
    def lr(t):
        return ((1 + t * t) ** (-r / 4) * np.sqrt(2 * np.pi * (1 + t * t) / r)) ** (p / r)

    exact = quad(lr, 0, 2)[0] ** (1 / p)
    assert strichartz_spacetime_norm(tr, p, r) == pytest.approx(exact, rel=1e-5)


def test_smooth_cutoff_shape():
    s = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    v = smooth_cutoff(s)
    assert v[0] == v[1] == v[2] == 1.0
    assert v[3] == pytest.approx(0.5)
    assert v[4] == v[5] == 0.0


@pytest.mark.parametrize("order", [1, 2, 3])
def test_smooth_cutoff_derivatives(order):
    s = np.linspace(0.5, 2.5, 401)
    # the fourth derivative jumps at s = 1, 2; keep h small enough to hide that
    h = 1e-8
    fd = (smooth_cutoff(s + h, order - 1) - smooth_cutoff(s - h, order - 1)) / (2 * h)
    ref = smooth_cutoff(s, order)
    assert np.max(np.abs(fd - ref)) < 1e-5 * max(1.0, np.max(np.abs(ref)))


def test_cutoff_weight(grid):
    _check_cutoff_weight(grid)


def _check_cutoff_weight(grid):
    w = make_weight(grid, "quadratic-cutoff", R=5.0)
    x = grid.x
    inside = np.abs(x) < 5
    assert np.allclose(w.lam[inside], x[inside] ** 2)
    assert np.all(w.lam[np.abs(x) >= 10] == 0)
    assert np.allclose(w.d2[inside], 2.0)
    # derivative arrays agree with centered differences
    fine = make_grid(16384, 40.0)
    wf = make_weight(fine, "quadratic-cutoff", R=5.0)
    # the fourth derivative jumps where the cutoff starts and ends
    ax = np.abs(fine.x)
    away = (np.abs(ax - 5.0) > 3 * fine.dx) & (np.abs(ax - 10.0) > 3 * fine.dx) & (ax < 39.0)
    for lo, hi in [(wf.lam, wf.d1), (wf.d1, wf.d2), (wf.d2, wf.d3), (wf.d3, wf.d4)]:
        fd = np.gradient(lo, fine.dx)
        assert np.max(np.abs(fd - hi)[away]) < 2e-3 * max(1.0, np.max(np.abs(hi)))
    with pytest.raises(ValueError):
        make_weight(grid, "quadratic-cutoff", R=25.0)
    with pytest.raises(ValueError):
        make_weight(grid, "quadratic-cutoff")
    with pytest.raises(ValueError):
        make_weight(grid, "quartic")


def test_free_virial_second_derivative(fine_grid):
    p = NLSParams(0.0, 5.0, coupling=0.0)
    tr = evolve(gaussian(fine_grid), p, 1.0, 0.01, stride=5, scalars=False)
    vs = virial_series(tr, make_weight(fine_grid), p)
    # free flow: M(t) = (1 + t^2) sqrt(pi) / 2, so M'' = sqrt(pi)
    assert np.allclose(vs.M, (1 + vs.times**2) * np.sqrt(np.pi) / 2, rtol=1e-10)
    assert np.allclose(vs.d2M(), np.sqrt(np.pi), rtol=1e-8)
    assert np.allclose(vs.rhs, np.sqrt(np.pi), rtol=1e-10)
    assert np.nanmax(vs.first_consistency) < 1e-8


def test_nonlinear_virial_residual_is_small(fine_grid):
    p = NLSParams(1.0, 5.0)
    tr = evolve(gaussian(fine_grid, -3.0), p, 1.0, 0.002, stride=5, scalars=False, boundary_tol=1.0)
    vs = virial_series(tr, make_weight(fine_grid, "quadratic-cutoff", R=10.0), p)
    assert np.max(vs.residual[1:-1]) < 2e-3 * np.max(np.abs(vs.rhs))


def test_virial_rhs_delta_term(grid):
    # with q > 0 the delta contributes q lambda''(0) |u(0)|^2
    u = gaussian(grid)
    w = make_weight(grid)
    a = virial_rhs(u, w, NLSParams(0.0, 5.0, coupling=0.0))
    b = virial_rhs(u, w, NLSParams(2.0, 5.0, coupling=0.0))
    assert b - a == pytest.approx(2.0 * 2.0)


def test_virial_series_argument_checks(grid):
    p = NLSParams(1.0, 5.0)
    tr = evolve(gaussian(grid), p, 0.02, 0.01, stride=1)
    tr.times = tr.times[:2]
    tr.states = tr.states[:2]
    with pytest.raises(ValueError):
        virial_series(tr, make_weight(grid), p)


def test_virial_refinement_single_spacing(grid):
    out = virial_refinement(gaussian(grid, -3.0), NLSParams(1.0, 5.0),
                            make_weight(grid, "quadratic-cutoff", R=10.0), [0.04], t_final=0.8,
                            window=(0.2, 0.6))
    assert np.isnan(out["order"])
    with pytest.raises(ValueError):
        virial_refinement(gaussian(grid), NLSParams(), make_weight(grid), [0.04, 0.02], grids=[grid])


def test_rigidity_lower_bound(grid):
    u = gaussian(grid)
    out = rigidity_lower_bound(u, 10.0, NLSParams(1.0, 5.0))
    assert out["tail"] < 1e-20
    assert out["bound"] == pytest.approx(out["interior"])
    assert out["interior"] > 0
    with pytest.raises(ValueError):
        rigidity_lower_bound(u, 50.0, NLSParams())


def test_translation_agreement_decreases(fine_grid):
    vals = [translation_agreement(gaussian(fine_grid), x0, 1.0, 1.0) for x0 in (-4.0, -8.0, -12.0)]
    assert vals[0] > vals[1] > vals[2]


def test_band_split(grid):
    f = gaussian(grid, k=3.0)
    parts = band_split(f, 2.0)
    assert np.allclose((parts["low"] + parts["high"]).values, f.values)
    F = np.fft.fft(parts["low"].values)
    assert np.max(np.abs(F[np.abs(grid.freqs) >= 4.0])) < 1e-12


@settings(max_examples=20, deadline=None)
@given(R=st.floats(0.5, 10), k=st.floats(-5, 5))
def test_band_split_is_a_contraction(R, k):
    g = make_grid(256, 20.0)
    f = gaussian(g, k=k)
    parts = band_split(f, R)
    assert l2_norm(parts["low"]) <= l2_norm(f) * (1 + 1e-12)
    assert l2_norm(parts["high"]) <= l2_norm(f) * (1 + 1e-12)
