import numpy as np
import pytest

from deltanls.grid import h1_norm, make_grid
from deltanls.propagators import linear_propagate
from deltanls.scattering import (
    cauchy_defect, dyadic_cauchy_defects, extract_scattering_state, inverse_linear_pullback,
    wave_operator_probe,
)
from deltanls.solver import NLSParams, evolve

from conftest import gaussian


@pytest.fixture(scope="module")
def linear_run():
    g = make_grid(1024, 40.0)
    p = NLSParams(1.0, 5.0, coupling=0.0)
    return evolve(gaussian(g, -2.0, 0.5), p, 2.0, 0.01, stride=25, scalars=False, boundary_tol=1.0)


@pytest.fixture(scope="module")
def small_run():
    g = make_grid(2048, 80.0)
    p = NLSParams(1.0, 5.0)
    return evolve(gaussian(g, 0.0, 0.5, 2.0), p, 8.0, 0.01, stride=25, scalars=False, boundary_tol=1.0)


def test_pullback_of_linear_run_is_constant(linear_run):
    w = inverse_linear_pullback(linear_run, 1.0)
    ref = linear_run.states[0]
    assert max(h1_norm(v - ref) for v in w) < 1e-11


def test_linear_run_has_zero_cauchy_defects(linear_run):
    pairs = dyadic_cauchy_defects(linear_run, 1.0, [0.25, 0.5, 1.0])
    assert [p["t2"] for p in pairs] == pytest.approx([0.5, 1.0, 2.0])
    assert max(p["defect"] for p in pairs) < 1e-11


def test_cauchy_defect_is_symmetric(small_run):
    a = cauchy_defect(small_run, 1.0, 1.0, 2.0)
    b = cauchy_defect(small_run, 1.0, 2.0, 1.0)
    assert a["defect"] == pytest.approx(b["defect"])
    assert (a["t1"], a["t2"]) == (1.0, 2.0)


def test_cauchy_defect_below_majorant(small_run):
    pairs = dyadic_cauchy_defects(small_run, 1.0, [0.5, 1.0, 2.0, 4.0])
    for p in pairs:
        assert p["defect"] <= p["majorant"]
    d = [p["defect"] for p in pairs]
    assert d[-1] < d[0]


def test_extract_from_linear_run(linear_run):
    rep = extract_scattering_state(linear_run, 1.0, tolerance=1e-8)
    assert h1_norm(rep.phi_plus - linear_run.states[0]) < 1e-11
    assert max(r for _, r in rep.residuals) < 1e-11
    assert rep.converged
    assert rep.horizon == pytest.approx(2.0)


def test_extract_reports_tail_and_convergence(small_run):
    rep = extract_scattering_state(small_run, 1.0, tolerance=1e-12)
    assert not rep.converged
    tails = [v for _, v in rep.tail_alpha]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    # the final residual is zero by construction
    assert rep.residuals[-1][1] < 1e-12


def test_wave_operator_probe_small_data():
    g = make_grid(1024, 60.0)
    psi = gaussian(g, 0.0, 0.3)
    out = wave_operator_probe(psi, 1.0, 5.0, 4.0, 0.01, stride=20)
    assert out["sup_at_T0"] < 0.3
    defects = [d for _, d in out["forward_defect"]]
    assert defects[-1] < 1e-10  # the forward run returns to e^{-i T0 H} psi
    assert max(defects) < 1e-3


def test_wave_operator_probe_rejects_large_state():
    g = make_grid(512, 40.0)
    with pytest.raises(ValueError):
        wave_operator_probe(gaussian(g, 0.0, 2.0), 1.0, 5.0, 0.1, 0.01)


def test_pullback_method_matches_forward(linear_run):
    # pulling back with a different realization leaves a kink-sized mismatch
    u = linear_run.states[-1]
    same = linear_propagate(u, 1.0, -2.0, "spectral")
    assert h1_norm(same - linear_run.states[0]) < 1e-11
    assert np.isfinite(h1_norm(linear_propagate(u, 1.0, -2.0, "exact-kernel") - same))
