"""The sixteen acceptance checks, each returning a CriterionResult.

Every check fixes its own grid, data and tolerances; ``run_criteria`` runs a
selection and is shared by the test suite and the ``report`` subcommand.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .diagnostics import (band_split, dispersion_decay_fit, make_weight, strichartz_spacetime_norm,
                          translation_agreement, virial_refinement, virial_series)
from .grid import h1_norm, l2_norm, make_grid, sup_norm, wavefield
from .profiles import (ProfileTerm, cross_interaction_norm, elementary_ratio, greedy_extract,
                       linear_trajectory, pythagorean_defects, synth_family)
from .propagators import cn_propagate, delta_propagate, free_propagate
from .scattering import dyadic_cauchy_defects, extract_scattering_state, wave_operator_probe
from .solver import (NLSParams, Trajectory, energy_drift_ratio, evolve, mass, perturbation_probe,
                     strichartz_exponents)

__all__ = ["CriterionResult", "CRITERIA", "run_criteria", "estimate_elementary_constant"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    threshold: str
    seconds: float = 0.0
    notes: str = ""
    extra: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{verdict}] {self.number:2d} {self.name}: {shown} (need {self.threshold})"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "measured": _jsonable(self.measured), "threshold": self.threshold,
                "seconds": round(self.seconds, 3), "notes": self.notes}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _gauss(g, x0=0.0, amp=1.0, sigma=1.0):
    return wavefield(g, amp * np.exp(-((g.x - x0) ** 2) / (2 * sigma**2)))


def _quiet_params(q, alpha, coupling=1.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return NLSParams(q=q, alpha=alpha, coupling=coupling)


# --------------------------------------------------------------------------- 1-3: linear propagators

def c01_identity_unitarity():
    # data left of the delta: the kink carried by data straddling x = 0 is only
    # resolved to O(dx) and costs ~1e-5 of L2 drift (see the decisions ledger)
    g = make_grid(4096, 40.0)
    f = _gauss(g, -8.0)
    ident, drift = [], []
    for q in (0.5, 1.0, 2.0):
        ident.append(h1_norm(delta_propagate(f, q, 0.0) - f) / h1_norm(f))
        drift.append(abs(l2_norm(delta_propagate(f, q, 2.0)) / l2_norm(f) - 1.0))
    ok = max(ident) <= 1e-10 and max(drift) <= 1e-8
    return ok, {"identity": max(ident), "l2_drift": max(drift)}, "identity <= 1e-10, drift <= 1e-8"


def c02_oracle_equivalence():
    g = make_grid(4096, 40.0)
    f = _gauss(g, -3.0)
    exact = delta_propagate(f, 1.0, 1.0)
    ladder = (1024, 2048, 4096)
    d = [h1_norm(cn_propagate(f, 1.0, 1.0, s) - exact) for s in ladder]
    ratios = [d[k] / d[k + 1] for k in range(len(d) - 1)]
    ok = d[-1] <= 1e-3 and all(3.5 <= r <= 4.5 for r in ratios)
    return ok, {"discrepancy_4096": d[-1], "ratios": ratios}, "discrepancy <= 1e-3, ratios in [3.5, 4.5]"


def c03_free_closed_form():
    g = make_grid(4096, 40.0)
    s2 = 1.0
    f = _gauss(g, 0.0, 1.0, np.sqrt(s2))
    t = 1.0
    exact = np.sqrt(s2 / (s2 + 1j * t)) * np.exp(-g.x**2 / (2 * (s2 + 1j * t)))
    err = float(np.max(np.abs(free_propagate(f, t).values - exact)))
    err0 = float(np.max(np.abs(delta_propagate(f, 0.0, t).values - exact)))
    e = max(err, err0)
    return e <= 1e-8, {"max_error": e}, "max error <= 1e-8"


# --------------------------------------------------------------------------- 4: dispersion

def c04_dispersion():
    g = make_grid(16384, 400.0)
    times = np.geomspace(5.0, 50.0, 8)
    slopes = {}
    # the edge content at late times is the whole-line kink tail, evaluated in
    # closed form rather than wrapped, so the box check is relaxed to 1e-3
    for q in (0.0, 1.0):
        fit = dispersion_decay_fit(_gauss(g, 0.0), q, times, boundary_tol=1e-3)
        slopes[f"q={q:g}"] = fit.fitted_slope
    ok = all(abs(s + 0.5) <= 0.05 for s in slopes.values())
    return ok, slopes, "slope = -0.50 +- 0.05"


# --------------------------------------------------------------------------- 5-6: conservation, virial

def c05_conservation():
    g = make_grid(4096, 40.0)
    params = NLSParams(1.0, 5.0)
    phi = _gauss(g, 0.0, 1.0)
    tr = evolve(phi, params, 5.0, 5e-4, stride=500, boundary_tol=1e-2)
    m = tr.scalars["mass"]
    mdrift = float(np.max(np.abs(m - m[0])) / m[0])
    er = energy_drift_ratio(phi, params, 2.0, (0.01, 0.005))
    ratio = er["ratios"][0]
    ok = mdrift <= 1e-10 and 3.5 <= ratio <= 4.5
    return ok, {"steps": 10000, "mass_drift": mdrift, "energy_drifts": er["drifts"], "energy_ratio": ratio}, \
        "mass drift <= 1e-10, energy ratio in [3.5, 4.5]"


def c06_virial():
    g = make_grid(4096, 40.0)
    free = _quiet_params(0.0, 5.0, coupling=0.0)
    phi = _gauss(g, 0.0)
    tr = evolve(phi, free, 1.0, 0.01, stride=5, scalars=False)
    vs = virial_series(tr, make_weight(g, "pure-quadratic"), free)
    d2 = vs.d2M()
    rel = float(np.max(np.abs(d2 / np.sqrt(np.pi) - 1.0)))
    params = NLSParams(1.0, 5.0)
    # space and time refined together: the kink at 0 leaves an O(dx) floor
    grids = [make_grid(n, 40.0) for n in (1024, 2048, 4096)]
    ref = virial_refinement(lambda gg: _gauss(gg, 0.0), params,
                            lambda gg: make_weight(gg, "quadratic-cutoff", R=10.0),
                            spacings=(0.04, 0.02, 0.01), grids=grids)
    ok = rel <= 0.01 and ref["order"] >= 1.0
    return ok, {"free_d2M_rel_error": rel, "residuals": ref["residuals"], "order": ref["order"]}, \
        "free d2M/dt2 = sqrt(pi) within 1%, refinement order >= 1"


# --------------------------------------------------------------------------- 7-9: nonlinear flow

def c07_scattering():
    g = make_grid(4096, 160.0)
    params = NLSParams(1.0, 5.0)
    phi = wavefield(g, 0.5 * np.exp(-g.x**2 / 8))
    # kink radiation reaches the edges after t ~ 4 and grows like t^3; it is
    # identical for the linear and nonlinear runs, so the pullback still sees
    # a consistent periodic flow
    tr = evolve(phi, params, 60.0, 0.01, stride=50, scalars=False, boundary_tol=1e-2)
    t_list = (1.0, 2.0, 4.0, 8.0, 15.0, 30.0)
    pairs = dyadic_cauchy_defects(tr, 1.0, t_list)
    d = [p["defect"] for p in pairs]
    late = [p["defect"] for p in pairs if p["t1"] >= 2.0]
    decreasing = all(b < a for a, b in zip(late, late[1:]))
    rep = extract_scattering_state(tr, 1.0)
    res = dict(rep.residuals)
    ratio = res[30.0] / res[1.0]
    ok = decreasing and ratio <= 0.2
    return ok, {"cauchy_defects": d, "residual_1": res[1.0], "residual_30": res[30.0], "ratio": ratio}, \
        "defects decreasing for t >= 2, residual(30)/residual(1) <= 0.2"


def c08_small_data_strichartz():
    g = make_grid(4096, 40.0)
    params = NLSParams(1.0, 5.0)
    ex = strichartz_exponents(5.0)
    vals = []
    for a in (1e-1, 1e-2, 1e-3):
        phi = _gauss(g, 0.0, a)
        tr = evolve(phi, params, 4.0, 0.01, stride=5, scalars=False, boundary_tol=1e-3)
        vals.append(strichartz_spacetime_norm(tr, ex.p, ex.r) / h1_norm(phi))
    spread = (max(vals) - min(vals)) / min(vals)
    return spread <= 0.2, {"ratios": vals, "spread": spread}, "spread <= 20%"


def c09_perturbation():
    g = make_grid(4096, 40.0)
    params = NLSParams(1.0, 5.0)
    phi = _gauss(g, 0.0, 1.0)
    base = wavefield(g, np.exp(-((g.x - 2.0) ** 2) / 2) * np.exp(1j * g.x))
    eps, defects, h1s = (1e-1, 1e-2), [], []
    for e in eps:
        r = perturbation_probe(phi, base * e, params, 4.0, 0.01, stride=5)
        defects.append(r["defect_strichartz"])
        h1s.append(r["h1_phi0"])
    slope = float(np.log(defects[0] / defects[1]) / np.log(h1s[0] / h1s[1]))
    return slope >= 1.0, {"defects": defects, "h1_phi0": h1s, "slope": slope}, "log-log slope >= 1"


# --------------------------------------------------------------------------- 10-11: appendix/band estimates

def _bump(g, center, radius=2.0):
    s = (g.x - center) / radius
    v = np.zeros(g.n)
    inside = np.abs(s) < 1
    v[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return wavefield(g, v)


def c10_translation():
    g = make_grid(4096, 40.0)
    psi = _bump(g, 0.0)
    near = translation_agreement(psi, -5.0, 1.0, 1.0)
    far = translation_agreement(psi, -20.0, 1.0, 1.0)
    ratio = far / near
    return ratio <= 0.1, {"x0=5": near, "x0=20": far, "ratio": ratio}, "ratio <= 0.1"


def c11_band_split():
    g = make_grid(4096, 40.0)
    f = _gauss(g, 0.0)
    Rs = np.geomspace(0.5, 5.0, 8)
    vals = [sup_norm(band_split(f, R)["high"]) / h1_norm(f) for R in Rs]
    slope = float(np.polyfit(np.log(Rs), np.log(vals), 1)[0])
    return slope <= -0.25, {"slope": slope}, "slope <= -0.25"


# --------------------------------------------------------------------------- 12-15: profiles

def c12_interaction_decay():
    g = make_grid(8192, 80.0)
    psi = _gauss(g, 0.0)  # width 1
    W = linear_trajectory(psi, 1.0, np.linspace(-4.0, 4.0, 81))
    ex = strichartz_exponents(5.0)
    seps = (0.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0)
    v = cross_interaction_norm(W, W, ex, [(0.0, 0.0, 0.0, s) for s in seps])
    rel = [x / v[0] for x in v]
    mono = all(b < a for a, b in zip(v, v[1:]))
    ok = v[0] > 0 and rel[-1] <= 0.05 and mono
    return ok, {"baseline": v[0], "relative": rel}, "separation 40 <= 5% of baseline, monotone"


@lru_cache(maxsize=None)
def estimate_elementary_constant(N: int, alpha: float, samples: int = 200000, seed: int = 12345) -> float:
    """Brute-force sup of the elementary ratio over the unit polydisc.

    Both sides are homogeneous of degree alpha+1 and invariant under a common
    phase, so a_1 = 1 and the rest range over the closed unit disc.  Random
    sampling is followed by Nelder-Mead refinement of the best candidates.
    """
    if N < 2:
        return 0.0
    rng = np.random.default_rng(seed)

    def tuples(p):
        p = np.atleast_2d(p)
        r = np.clip(p[:, : N - 1], 0.0, 1.0)
        th = p[:, N - 1:]
        a = np.ones((p.shape[0], N), dtype=complex)
        a[:, 1:] = r * np.exp(1j * th)
        return a

    pts = np.hstack([rng.random((samples, N - 1)), rng.uniform(0, 2 * np.pi, (samples, N - 1))])
    # also probe the small-modulus edge, where the ratio tends to its limit
    edge = pts[: samples // 4].copy()
    edge[:, : N - 1] *= 10.0 ** rng.uniform(-6, 0, (edge.shape[0], N - 1))
    pts = np.vstack([pts, edge])
    vals = np.nan_to_num(elementary_ratio(tuples(pts), alpha), nan=0.0)
    best = float(vals.max())
    for k in np.argsort(vals)[-10:]:
        res = minimize(lambda p: -np.nan_to_num(elementary_ratio(tuples(p), alpha)[0], nan=0.0),
                       pts[k], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return best


def c13_elementary():
    rng = np.random.default_rng(2024)
    count, violations, worst = 0, 0, 0.0
    for alpha in (4.5, 5.0, 6.0):
        for N in (1, 2, 3, 4):
            a = rng.standard_normal((100000, N)) + 1j * rng.standard_normal((100000, N))
            a *= rng.lognormal(0.0, 1.0, (100000, N))
            r = elementary_ratio(a, alpha)
            count += a.shape[0]
            if N == 1:
                # one term: both sides vanish identically
                S = a[:, 0]
                lhs = np.abs(S * np.abs(S) ** alpha - S * np.abs(S) ** alpha)
                violations += int(np.count_nonzero(lhs))
                continue
            C = estimate_elementary_constant(N, alpha)
            r = r[np.isfinite(r)]
            violations += int(np.count_nonzero(r > 1.05 * C))
            worst = max(worst, float(r.max() / C))
    return violations == 0, {"tuples": count, "violations": violations, "worst_ratio_over_C": worst}, \
        "0 violations of 1.05 C(N, alpha)"


def c14_pythagorean():
    g = make_grid(8192, 80.0)
    seps = np.array([5.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    psi1 = wavefield(g, 1 / np.cosh(g.x))
    psi2 = wavefield(g, 0.7 / np.cosh(g.x) * np.exp(0.5j * g.x))
    fam = synth_family([ProfileTerm(psi1, np.zeros(6), -seps / 2), ProfileTerm(psi2, np.zeros(6), seps / 2)],
                       None, range(1, 7), 1.0)
    rows = pythagorean_defects(fam, 1.0, (4.0, 7.0), 5.0)
    ids = sorted({r["identity"] for r in rows})
    last = {i: r["defect"] for r in rows if r["n"] == 6 for i in [r["identity"]]}
    floor = 1e-13
    mono = True
    for i in ids:
        seq = [r["defect"] for r in rows if r["identity"] == i]
        for a, b in zip(seq, seq[1:]):
            # once an identity holds to roundoff it stays there
            if not (b < a or (a <= floor and b <= floor)):
                mono = False
    ok = max(last.values()) <= 0.02 and mono
    return ok, {"defects_at_50": last, "decreasing": mono}, "defects <= 2% at 50 widths, decreasing along n"


def c15_profile_recovery():
    g = make_grid(4096, 40.0)
    n = np.arange(1, 7)
    p1 = _gauss(g, 0.0, 1.0, np.sqrt(0.5))
    p2 = wavefield(g, 0.6 * np.exp(-g.x**2) * np.exp(1j * g.x))
    truth = [ProfileTerm(p1, np.zeros(6), -5.0 * n), ProfileTerm(p2, np.zeros(6), 5.0 * n)]
    fam = synth_family(truth, None, n, 1.0)
    dec = greedy_extract(fam, 1.0, {"time_window": (-2.0, 2.0, 21)})
    x_err, psi_err = [], []
    for tr in truth:
        if not dec.terms:
            break
        errs = [np.max(np.abs(t.x_seq - tr.x_seq)) for t in dec.terms]
        k = int(np.argmin(errs))
        x_err.append(float(errs[k]))
        psi_err.append(l2_norm(dec.terms[k].psi - tr.psi) / l2_norm(tr.psi))
    ok = len(dec.terms) >= 2 and max(x_err) <= 2 * g.dx and max(psi_err) <= 0.05
    return ok, {"terms": len(dec.terms), "x_err_over_dx": [e / g.dx for e in x_err], "psi_rel_l2": psi_err}, \
        "x within 2 dx, psi within 5% L2"


# --------------------------------------------------------------------------- 16: wave operator

def c16_wave_operator():
    g = make_grid(4096, 80.0)
    psi = _gauss(g, 0.0, 0.8)
    recov, defects = [], []
    for T0 in (5.0, 10.0, 20.0):
        r = wave_operator_probe(psi, 1.0, 5.0, T0, 0.01, stride=10)
        fwd = r["forward"]
        D = max(d for _, d in r["forward_defect"])
        # extract from the part of the run up to T0/2, where the flow is genuinely nonlinear
        k = fwd.index_of(0.5 * T0)
        head = Trajectory(fwd.params, fwd.grid, fwd.times[: k + 1], fwd.states[: k + 1])
        rep = extract_scattering_state(head, 1.0)
        recov.append(h1_norm(rep.phi_plus - psi))
        defects.append(D)
    within = all(e <= 2 * D for e, D in zip(recov, defects))
    shrink = all(b < a for a, b in zip(defects, defects[1:]))
    return within and shrink, {"T0": [5.0, 10.0, 20.0], "recovery_error": recov, "forward_defect": defects}, \
        "recovery <= 2x forward defect, defect shrinking in T0"


CRITERIA = {
    1: ("propagator identity and unitarity", c01_identity_unitarity),
    2: ("exact kernel vs Crank-Nicolson", c02_oracle_equivalence),
    3: ("free closed form", c03_free_closed_form),
    4: ("dispersive decay slope", c04_dispersion),
    5: ("mass and energy conservation", c05_conservation),
    6: ("virial identity", c06_virial),
    7: ("scattering", c07_scattering),
    8: ("small-data Strichartz", c08_small_data_strichartz),
    9: ("perturbation", c09_perturbation),
    10: ("far-translation agreement", c10_translation),
    11: ("band-split bound", c11_band_split),
    12: ("interaction decay", c12_interaction_decay),
    13: ("elementary inequality", c13_elementary),
    14: ("Pythagorean splittings", c14_pythagorean),
    15: ("profile recovery", c15_profile_recovery),
    16: ("wave-operator round trip", c16_wave_operator),
}


def run_one(number: int) -> CriterionResult:
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, measured, threshold = fn()
    return CriterionResult(number, name, bool(passed), measured, threshold, time.perf_counter() - t0)


def run_criteria(numbers=None, on_result=None) -> list[CriterionResult]:
    out = []
    for k in numbers or sorted(CRITERIA):
        r = run_one(int(k))
        out.append(r)
        if on_result:
            on_result(r)
    return out
