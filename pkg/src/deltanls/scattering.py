"""Pull back nonlinear trajectories by the linear group and read off the scattering state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import WaveField, h1_norm, sup_norm
from .propagators import linear_propagate
from .solver import NLSParams, Trajectory, evolve

__all__ = [
    "ScatteringReport",
    "inverse_linear_pullback",
    "cauchy_defect",
    "dyadic_cauchy_defects",
    "extract_scattering_state",
    "wave_operator_probe",
]


@dataclass
class ScatteringReport:
    phi_plus: WaveField
    horizon: float
    cauchy_pairs: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    tail_alpha: list = field(default_factory=list)
    converged: bool = True


def inverse_linear_pullback(traj: Trajectory, q: float, method="spectral") -> list:
    """w(t_k) = e^{i t_k H_q} u(t_k).

    Use the same linear realization that produced the trajectory; the
    spectral and exact-kernel groups agree only up to the grid representation
    of the kink at x = 0.
    """
    return [linear_propagate(u, q, -t, method) for t, u in zip(traj.times, traj.states)]


def _majorant(traj: Trajectory, i1: int, i2: int) -> float:
    a = traj.params.alpha
    t = traj.times[i1:i2 + 1]
    sup = np.array([sup_norm(s) for s in traj.states[i1:i2 + 1]]) ** a
    h1max = max(h1_norm(s) for s in traj.states[: i2 + 1])
    integral = float(np.trapezoid(sup, t)) if t.size > 1 else 0.0
    return h1max * integral


def cauchy_defect(traj: Trajectory, q: float, t1: float, t2: float, method="spectral",
                  pullback: list | None = None) -> dict:
    """||w(t1) - w(t2)||_{H^1} and the majorant sup_t||u||_{H^1} int_{t1}^{t2} ||u||_inf^alpha."""
    i1, i2 = traj.index_of(t1), traj.index_of(t2)
    if i1 > i2:
        i1, i2 = i2, i1
    if pullback is None:
        w1 = linear_propagate(traj.states[i1], q, -traj.times[i1], method)
        w2 = linear_propagate(traj.states[i2], q, -traj.times[i2], method)
    else:
        w1, w2 = pullback[i1], pullback[i2]
    return {"t1": float(traj.times[i1]), "t2": float(traj.times[i2]),
            "defect": h1_norm(w1 - w2), "majorant": _majorant(traj, i1, i2)}


def dyadic_cauchy_defects(traj: Trajectory, q: float, t_list, method="spectral") -> list:
    w = inverse_linear_pullback(traj, q, method)
    return [cauchy_defect(traj, q, t, 2 * t, method, pullback=w) for t in t_list]


def extract_scattering_state(traj: Trajectory, q: float, method="spectral", tolerance: float | None = None,
                             tail_T=None) -> ScatteringReport:
    """phi_+ = w(t_max); residuals ||e^{-itH_q} phi_+ - u(t)||_{H^1} over the window."""
    w = inverse_linear_pullback(traj, q, method)
    phi_plus = w[-1]
    t = traj.times
    residuals = [(float(tk), h1_norm(linear_propagate(phi_plus, q, tk, method) - u))
                 for tk, u in zip(t, traj.states)]
    pairs = []
    for k in range(1, len(t)):
        if t[k - 1] > 0 and 2 * t[k - 1] <= t[-1] + 1e-12:
            try:
                j = traj.index_of(2 * t[k - 1])
            except KeyError:
                continue
            pairs.append((float(t[k - 1]), float(t[j]), h1_norm(w[k - 1] - w[j])))
    a = traj.params.alpha
    sup_a = np.array([sup_norm(s) for s in traj.states]) ** a
    if tail_T is None:
        tail_T = [tk for tk in t if 0 < tk < t[-1]][:: max(1, len(t) // 10)]
    tails = []
    for T in tail_T:
        sel = t >= T
        tails.append((float(T), float(np.trapezoid(sup_a[sel], t[sel])) if sel.sum() > 1 else 0.0))
    converged = True
    if tolerance is not None:
        last = [d for (_, _, d) in pairs[-3:]]
        converged = bool(last) and last[-1] <= tolerance
    return ScatteringReport(phi_plus=phi_plus, horizon=float(t[-1]), cauchy_pairs=pairs,
                            residuals=residuals, tail_alpha=tails, converged=converged)


def wave_operator_probe(psi: WaveField, q: float, alpha: float, T0: float, dt: float, stride: int = 10,
                        coupling: float = 1.0, method="spectral", smallness: float = 0.5) -> dict:
    """Start at u(T0) = e^{-iT0 H_q} psi, run the nonlinear flow back to 0, then forward again."""
    params = NLSParams(q=q, alpha=alpha, coupling=coupling)
    uT = linear_propagate(psi, q, T0, method)
    s = sup_norm(uT)
    if s > smallness:
        raise ValueError(f"sup norm {s:.3e} of the free state at T0 is not small; increase T0")
    back = evolve(uT, params, -T0, dt, stride=stride, method=method, scalars=False, boundary_tol=1.0)
    u0 = back.states[-1]
    fwd = evolve(u0, params, T0, dt, stride=stride, method=method, scalars=False, boundary_tol=1.0)
    defects = []
    for t, u in zip(fwd.times, fwd.states):
        if t >= 0.5 * T0 - 1e-12:
            defects.append((float(t), h1_norm(u - linear_propagate(psi, q, t, method))))
    return {"data_at_zero": u0, "forward_defect": defects, "forward": fwd, "sup_at_T0": s}
