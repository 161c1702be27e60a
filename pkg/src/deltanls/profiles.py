"""Synthetic profile families, their Pythagorean splittings and interaction estimates.

Sign convention: the abstract group e^{itA} with A = H_q is realized as
propagation by -t through ``delta_propagate`` (which computes e^{-itH_q}).
``SIGN`` records this once; synth_family and greedy_extract both use it.

tau_x shifts a field so that its origin moves to x: (tau_x f)(y) = f(y - x).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import (GridMismatchError, WaveField, boundary_mass, form_norm_H, h1_norm, l2_norm,
                   lp_norm, sup_norm, translate)
from .propagators import linear_propagate
from .solver import NLSParams, StrichartzExponents, Trajectory, energy

__all__ = [
    "SIGN",
    "ProfileTerm",
    "Decomposition",
    "SyntheticFamily",
    "synth_family",
    "apply_group",
    "orthogonality_check",
    "pythagorean_defects",
    "cross_interaction_norm",
    "splitting_defect",
    "elementary_ratio",
    "greedy_extract",
    "seeded_noise",
    "linear_trajectory",
]

# e^{itA} = e^{-i(SIGN*(-t))H_q}: propagate by -SIGN*t
SIGN = 1


def _seq_kind(s: np.ndarray) -> str:
    if np.all(s == 0):
        return "fixed"
    a = np.abs(s)
    if np.all(np.diff(a) > 0):
        return "escaping"
    raise ValueError("parameter sequences must be identically 0 or strictly growing in modulus")


@dataclass
class ProfileTerm:
    psi: WaveField
    t_seq: np.ndarray
    x_seq: np.ndarray
    # extracted terms carry measured sequences, which need not be monotone
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.t_seq = np.asarray(self.t_seq, dtype=float)
        self.x_seq = np.asarray(self.x_seq, dtype=float)
        if self.t_seq.shape != self.x_seq.shape or self.t_seq.ndim != 1:
            raise ValueError("t_seq and x_seq must be 1-D and of equal length")
        if not self.strict:
            self.t_kind = "fixed" if np.all(self.t_seq == 0) else "measured"
            self.x_kind = "fixed" if np.all(self.x_seq == 0) else "measured"
        elif self.t_seq.size > 1:
            self.t_kind = _seq_kind(self.t_seq)
            self.x_kind = _seq_kind(self.x_seq)
        else:
            self.t_kind = "fixed" if self.t_seq.size == 0 or self.t_seq[0] == 0 else "escaping"
            self.x_kind = "fixed" if self.x_seq.size == 0 or self.x_seq[0] == 0 else "escaping"


@dataclass
class Decomposition:
    terms: list
    remainder_seq: list

    def __post_init__(self):
        grids = {t.psi.grid for t in self.terms} | {r.grid for r in self.remainder_seq}
        if len(grids) > 1:
            raise GridMismatchError("all fields of a decomposition must share one grid")


@dataclass
class SyntheticFamily:
    u_seq: list
    n_list: list
    ground_truth: Decomposition | None = None
    seed: int = 0
    q: float = 1.0
    method: str = "exact-kernel"
    info: dict = field(default_factory=dict)


def apply_group(psi: WaveField, q: float, t: float, x: float, method="exact-kernel") -> WaveField:
    """e^{itA} tau_x psi."""
    f = translate(psi, x) if x != 0 else psi
    if t == 0:
        return f
    return linear_propagate(f, q, -SIGN * t, method)


def seeded_noise(grid, h1: float, seed: int, n: int = 0, cutoff: float = 4.0, width: float | None = None):
    """Band-limited complex noise, localized to |x| < width, scaled to the given H^1 norm."""
    rng = np.random.default_rng([int(seed), int(n)])
    F = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    F *= np.exp(-(grid.freqs / cutoff) ** 2)
    v = np.fft.ifft(F)
    width = 0.5 * grid.L if width is None else width
    v *= np.exp(-(grid.x / width) ** 8)
    f = WaveField(grid, v)
    return f * (h1 / h1_norm(f))


def synth_family(terms: list, remainder_spec, n_list, q: float, method="exact-kernel",
                 seed: int = 0, boundary_tol: float = 1e-8) -> SyntheticFamily:
    """u_n = sum_j e^{i t_j^n A} tau_{x_j^n} psi_j + R_n.

    remainder_spec: None / "zero", a WaveField (the same for every n), or
    {"kind": "noise", "h1": size, "cutoff": ..., "width": ...} drawn per n from ``seed``.
    """
    if not terms:
        raise ValueError("need at least one profile term")
    grid = terms[0].psi.grid
    n_list = list(n_list)
    for t in terms:
        if t.psi.grid != grid:
            raise GridMismatchError("profiles live on different grids")
        if t.t_seq.size != len(n_list):
            raise ValueError("parameter sequences must match n_list")
    u_seq, rems = [], []
    for k, n in enumerate(n_list):
        total = np.zeros(grid.n, dtype=complex)
        for j, t in enumerate(terms):
            with warnings.catch_warnings():
                warnings.simplefilter("error", RuntimeWarning)
                try:
                    piece = apply_group(t.psi, q, t.t_seq[k], t.x_seq[k], method)
                except RuntimeWarning as exc:
                    raise ValueError(f"term {j} at n={n} leaves the box: {exc}") from None
            bm = boundary_mass(piece)
            if bm > boundary_tol:
                raise ValueError(f"term {j} at n={n} has boundary mass {bm:.2e}; enlarge the box")
            total += piece.values
        if remainder_spec is None or remainder_spec == "zero":
            r = WaveField(grid, np.zeros(grid.n, dtype=complex))
        elif isinstance(remainder_spec, WaveField):
            r = remainder_spec
        elif isinstance(remainder_spec, dict) and remainder_spec.get("kind") == "noise":
            r = seeded_noise(grid, float(remainder_spec["h1"]), seed, n,
                             cutoff=float(remainder_spec.get("cutoff", 4.0)),
                             width=remainder_spec.get("width"))
        else:
            raise ValueError(f"unknown remainder spec {remainder_spec!r}")
        rems.append(r)
        u_seq.append(WaveField(grid, total + r.values))
    truth = Decomposition(terms=list(terms), remainder_seq=rems)
    return SyntheticFamily(u_seq=u_seq, n_list=n_list, ground_truth=truth, seed=seed, q=q, method=method)


def orthogonality_check(terms: list, threshold: float = 10.0) -> dict:
    """Pairwise s_n = |t_j^n - t_k^n| + |x_j^n - x_k^n| and a divergence verdict.

    The verdict is true when s_n is strictly increasing and exceeds ``threshold``
    at the largest n.
    """
    if len(terms) < 2:
        raise ValueError("orthogonality needs at least two terms")
    m = len(terms)
    verdict = np.zeros((m, m), dtype=bool)
    seqs = {}
    for j in range(m):
        for k in range(j + 1, m):
            s = np.abs(terms[j].t_seq - terms[k].t_seq) + np.abs(terms[j].x_seq - terms[k].x_seq)
            ok = bool(s.size > 1 and np.all(np.diff(s) > 0) and s[-1] > threshold)
            verdict[j, k] = verdict[k, j] = ok
            seqs[(j, k)] = s
    return {"verdict": verdict, "sequences": seqs}


def pythagorean_defects(family: SyntheticFamily, q: float, p_list=(4.0, 7.0), alpha: float = 5.0,
                        method: str | None = None) -> list[dict]:
    """Relative defects |LHS - RHS| / LHS of the four splittings, one row per (n, identity).

    L2:      ||u_n||^2 vs sum ||psi_j||^2 + ||R_n||^2
    H:       ||u_n||_H^2 vs sum ||tau psi_j||_H^2 + ||R_n||_H^2, ||v||_H^2 = (H_q v, v)
    Lp:      ||u_n||_p^p vs sum ||e^{itA} tau psi_j||_p^p + ||R_n||_p^p
    energy:  E(u_n) vs sum E(e^{itA} tau psi_j) + E(R_n)
    """
    truth = family.ground_truth
    if truth is None:
        raise ValueError("pythagorean_defects needs the ground-truth decomposition")
    method = method or family.method
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        params = NLSParams(q=q, alpha=alpha)
    rows = []
    for k, n in enumerate(family.n_list):
        u = family.u_seq[k]
        R = truth.remainder_seq[k]
        moved = [translate(t.psi, t.x_seq[k]) if t.x_seq[k] != 0 else t.psi for t in truth.terms]
        evolved = [apply_group(t.psi, q, t.t_seq[k], t.x_seq[k], method) for t in truth.terms]

        def rel(lhs, rhs):
            return abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(rhs)

        rows.append({"n": n, "identity": "L2", "defect": rel(
            l2_norm(u) ** 2, sum(l2_norm(t.psi) ** 2 for t in truth.terms) + l2_norm(R) ** 2)})
        rows.append({"n": n, "identity": "H", "defect": rel(
            form_norm_H(u, q), sum(form_norm_H(m, q) for m in moved) + form_norm_H(R, q))})
        for p in p_list:
            rows.append({"n": n, "identity": f"L{p:g}", "defect": rel(
                lp_norm(u, p) ** p, sum(lp_norm(e, p) ** p for e in evolved) + lp_norm(R, p) ** p)})
        rows.append({"n": n, "identity": "energy", "defect": rel(
            energy(u, params), sum(energy(e, params) for e in evolved) + energy(R, params))})
    return rows


def linear_trajectory(psi: WaveField, q: float, times, method="exact-kernel") -> Trajectory:
    """Snapshots e^{-itH_q} psi at the given times, each computed directly from psi."""
    times = np.asarray(times, dtype=float)
    states = [psi if t == 0 else linear_propagate(psi, q, t, method) for t in times]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        params = NLSParams(q=q, alpha=5.0, coupling=0.0)
    return Trajectory(params=params, grid=psi.grid, times=times, states=states)


def _mixed_norm(vals: np.ndarray, times: np.ndarray, dx: float, p_t: float, p_x: float) -> float:
    inner = (np.sum(vals ** p_x, axis=1) * dx) ** (p_t / p_x)
    if times.size < 2:
        return 0.0
    return float(np.trapezoid(inner, times) ** (1.0 / p_t))


def cross_interaction_norm(W1: Trajectory, W2: Trajectory, exponents: StrichartzExponents, shifts) -> list:
    """|| |W1(t - t_n, x - x_n)|^alpha |W2(t - s_n, x - y_n)| ||_{L^{q'} L^{r'}} for each shift tuple.

    Trajectories must share one grid and one uniform time step.  The time
    integral runs over the common window of the two shifted trajectories;
    time shifts must be multiples of the step and spatial shifts are taken
    relative (only x_n - y_n matters on the line).
    """
    if W1.grid != W2.grid:
        raise GridMismatchError("trajectories live on different grids")
    alpha = exponents.r - 2
    t1, t2 = np.asarray(W1.times, float), np.asarray(W2.times, float)
    h = t1[1] - t1[0]
    if abs((t2[1] - t2[0]) - h) > 1e-12 * abs(h):
        raise ValueError("trajectories need the same time step")
    A1 = np.abs(W1.values()) ** alpha
    g = W1.grid
    out = []
    for tn, sn, xn, yn in shifts:
        # on the common window W1 is sampled at t - t_n and W2 at t - s_n
        lo = max(t1[0] + tn, t2[0] + sn)
        hi = min(t1[-1] + tn, t2[-1] + sn)
        if hi - lo < h * (1 - 1e-9):
            raise ValueError(f"shift ({tn}, {sn}) leaves no common time window")
        tt = np.arange(lo, hi + 0.5 * h, h)
        i1 = np.rint((tt - tn - t1[0]) / h).astype(int)
        i2 = np.rint((tt - sn - t2[0]) / h).astype(int)
        if np.max(np.abs(t1[i1] + tn - tt)) > 1e-6 * h or np.max(np.abs(t2[i2] + sn - tt)) > 1e-6 * h:
            raise ValueError("time shifts must be multiples of the trajectory step")
        d = float(yn - xn)
        if abs(d) >= g.L:
            raise ValueError(f"spatial shift {d} exceeds the box half-width")
        sh = int(round(d / g.dx))
        if abs(sh * g.dx - d) < 1e-9 * g.dx:
            B = np.abs(np.roll(W2.values()[i2], sh, axis=1))
        else:
            B = np.abs(np.array([translate(W2.states[i], d, warn_tol=np.inf).values for i in i2]))
        F = A1[i1] * B
        out.append(_mixed_norm(F, tt, g.dx, exponents.q_dual_prime, exponents.r_prime))
    return out


def elementary_ratio(a: np.ndarray, alpha: float, floor: float = 1e-12) -> np.ndarray:
    """|sum a_j|a_j|^alpha - S|S|^alpha| / sum_{j != k} |a_j||a_k|^alpha along the last axis.

    Tuples whose right side falls below ``floor`` times (max_j |a_j|)^(alpha+1) give NaN.
    """
    a = np.asarray(a, dtype=complex)
    m = np.abs(a)
    S = a.sum(axis=-1)
    lhs = np.abs(np.sum(a * m ** alpha, axis=-1) - S * np.abs(S) ** alpha)
    tot = m.sum(axis=-1)
    rhs = tot * np.sum(m ** alpha, axis=-1) - np.sum(m ** (alpha + 1), axis=-1)
    scale = np.max(m, axis=-1) ** (alpha + 1)
    good = rhs > floor * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(good, lhs / np.where(good, rhs, 1.0), np.nan)


def splitting_defect(fields: list, alpha: float, floor: float = 1e-12) -> dict:
    """L^{r'} norm of sum u_j|u_j|^alpha - S|S|^alpha and the largest samplewise ratio."""
    if not fields:
        raise ValueError("need at least one field")
    g = fields[0].grid
    a = np.stack([f.values for f in fields], axis=-1)
    m = np.abs(a)
    S = a.sum(axis=-1)
    diff = np.sum(a * m ** alpha, axis=-1) - S * np.abs(S) ** alpha
    rp = (alpha + 2) / (alpha + 1)
    nd = float((np.sum(np.abs(diff) ** rp) * g.dx) ** (1 / rp))
    ratio = elementary_ratio(a, alpha, floor)
    mr = float(np.nanmax(ratio)) if np.any(np.isfinite(ratio)) else 0.0
    return {"norm_defect": nd, "pointwise_max_ratio": mr}


def _scan(v: WaveField, q: float, times: np.ndarray, method) -> tuple:
    best = (-1.0, 0.0, None)
    for t in times:
        w = v if t == 0 else linear_propagate(v, q, SIGN * t, method)
        s = sup_norm(w)
        if s > best[0]:
            best = (s, float(t), w)
    return best


def greedy_extract(family: SyntheticFamily, q: float, config: dict | None = None) -> Decomposition:
    """Extract profiles one at a time from the tail of the family.

    For every n the time scan picks t^n maximizing ||e^{-itA} v_n||_inf, x^n is
    the location of that maximum, and the recentered fields tau_{-x^n}
    e^{-it^nA} v_n are combined over the last ``average_last`` indices.  The
    default combination is the samplewise median: escaping companions land at
    different places for different n, so the median drops them where a plain
    mean would keep ghosts of size 1/k.  Set ``estimator='mean'`` for the mean.

    config keys: time_window (t_min, t_max, count), max_profiles, stop_threshold,
    average_last, estimator, method.
    """
    cfg = {"time_window": (0.0, 0.0, 1), "max_profiles": 4, "stop_threshold": 0.05,
           "average_last": None, "estimator": "median", "method": family.method}
    cfg.update(config or {})
    if len(family.u_seq) < 3:
        raise ValueError("greedy_extract needs at least 3 members")
    t0, t1, cnt = cfg["time_window"]
    times = np.linspace(float(t0), float(t1), int(cnt))
    if t0 <= 0 <= t1 and not np.any(times == 0):
        times = np.sort(np.append(times, 0.0))
    method = cfg["method"]
    k_avg = cfg["average_last"] or max(3, len(family.u_seq) // 2)
    k_avg = min(k_avg, len(family.u_seq))
    grid = family.u_seq[0].grid
    v = list(family.u_seq)
    terms = []
    scans = []
    for _ in range(int(cfg["max_profiles"])):
        found = [_scan(w, q, times, method) for w in v]
        top = max(f[0] for f in found)
        scans.append(top)
        if top < cfg["stop_threshold"]:
            break
        tn = np.array([f[1] for f in found])
        xn = np.array([grid.x[int(np.argmax(np.abs(f[2].values)))] for f in found])
        centred = [translate(f[2], -x, warn_tol=np.inf).values for f, x in zip(found, xn)]
        tail = np.array(centred[-k_avg:])
        if cfg["estimator"] == "median":
            psi = np.median(tail.real, axis=0) + 1j * np.median(tail.imag, axis=0)
        elif cfg["estimator"] == "mean":
            psi = tail.mean(axis=0)
        else:
            raise ValueError(f"unknown estimator {cfg['estimator']!r}")
        psi = WaveField(grid, psi)
        terms.append(ProfileTerm(psi, tn, xn, strict=False))
        v = [w - apply_group(psi, q, t, x, method) for w, t, x in zip(v, tn, xn)]
    dec = Decomposition(terms=terms, remainder_seq=v)
    dec.scan_sups = scans
    dec.remainder_sup = max(sup_norm(w) for w in v)
    dec.window = (float(times[0]), float(times[-1]))
    return dec
