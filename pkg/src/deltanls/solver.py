"""Strang splitting for i u_t = H_q u + u|u|^alpha, plus conserved quantities."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridSpec, WaveField, boundary_mass, form_norm_H, h1_norm, l2_norm, lp_norm, sup_norm
from .propagators import PropagatorMethod, linear_propagate, spectral_propagator

__all__ = [
    "NLSParams",
    "StrichartzExponents",
    "Trajectory",
    "EvolutionAborted",
    "strichartz_exponents",
    "nonlinear_phase_step",
    "strang_step",
    "evolve",
    "mass",
    "energy",
    "scalar_record",
    "perturbation_probe",
    "energy_drift_ratio",
]


class EvolutionAborted(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class NLSParams:
    q: float = 1.0
    alpha: float = 5.0
    # 1 for the defocusing equation; 0 switches the nonlinearity off (linear runs)
    coupling: float = 1.0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.alpha <= 4 and self.coupling != 0:
            warnings.warn(f"alpha={self.alpha} is outside the alpha > 4 scattering regime",
                          RuntimeWarning, stacklevel=3)

    @property
    def in_theorem_regime(self) -> bool:
        return self.alpha > 4 and self.q > 0


@dataclass(frozen=True)
class StrichartzExponents:
    r: float
    p: float
    q_dual: float
    r_prime: float
    q_dual_prime: float


def strichartz_exponents(alpha: float) -> StrichartzExponents:
    if not alpha > 4:
        raise ValueError("Strichartz exponents are used for alpha > 4 only")
    a = float(alpha)
    r = a + 2
    p = 2 * a * (a + 2) / (a + 4)
    qd = 2 * a * (a + 2) / (a * a - a - 4)
    return StrichartzExponents(r=r, p=p, q_dual=qd, r_prime=r / (r - 1), q_dual_prime=qd / (qd - 1))


def nonlinear_phase_step(u: WaveField, dt: float, alpha: float, coupling: float = 1.0) -> WaveField:
    """Exact flow of i u_t = u|u|^alpha over dt."""
    v = u.values
    return u.with_values(v * np.exp(-1j * dt * coupling * np.abs(v) ** alpha))


def mass(u: WaveField) -> float:
    return l2_norm(u) ** 2


def energy(u: WaveField, params: NLSParams) -> float:
    """1/4 int|u'|^2 + q/2 |u(0)|^2 + (alpha+2)^{-1} int |u|^{alpha+2}."""
    e = 0.5 * form_norm_H(u, params.q)
    if params.coupling:
        a = params.alpha
        e += params.coupling * lp_norm(u, a + 2) ** (a + 2) / (a + 2)
    return e


def scalar_record(t: float, u: WaveField, params: NLSParams) -> dict:
    return {
        "t": float(t),
        "mass": mass(u),
        "energy": energy(u, params),
        "sup": sup_norm(u),
        "h1": h1_norm(u),
        "u0sq": abs(u.at_origin) ** 2,
    }


def _linear(method: PropagatorMethod, grid: GridSpec, q: float):
    if method.tag == "spectral":
        prop = spectral_propagator(grid, float(q))
        return lambda v, t: prop.apply_values(v, t)

    def step(v, t):
        return linear_propagate(WaveField(grid, v), q, t, method).values
    return step


def strang_step(u: WaveField, dt: float, params: NLSParams, method="spectral") -> WaveField:
    """Half linear, full nonlinear, half linear."""
    m = PropagatorMethod.coerce(method)
    lin = _linear(m, u.grid, params.q)
    v = lin(u.values, 0.5 * dt)
    v = v * np.exp(-1j * dt * params.coupling * np.abs(v) ** params.alpha)
    return u.with_values(lin(v, 0.5 * dt))


@dataclass
class Trajectory:
    params: NLSParams
    grid: GridSpec
    times: np.ndarray
    states: list
    scalars: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state_at(self, t: float) -> WaveField:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not in trajectory")
        return self.states[k]

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not in trajectory")
        return k

    def values(self) -> np.ndarray:
        return np.array([s.values for s in self.states])


def evolve(phi: WaveField, params: NLSParams, t_final: float, dt: float, stride: int = 1,
           method="spectral", mass_tol: float = 1e-6, boundary_tol: float = 1e-8,
           boundary_layer: float = 0.1, on_record: Callable[[dict], None] | None = None,
           scalars: bool = True) -> Trajectory:
    """Integrate from t=0 to t_final (negative t_final runs backward).

    Consecutive linear half steps are merged, so a block of ``stride`` steps
    costs stride+1 linear applications.  Snapshots are kept every ``stride``
    steps and at t_final.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    m = PropagatorMethod.coerce(method)
    grid = phi.grid
    sign = 1.0 if t_final >= 0 else -1.0
    nsteps = int(round(abs(t_final) / dt))
    if nsteps > 0 and abs(nsteps * dt - abs(t_final)) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError("t_final must be an integer multiple of dt")
    h = sign * dt
    lin = _linear(m, grid, params.q)
    a, c = params.alpha, params.coupling

    times = [0.0]
    states = [phi]
    recs = [scalar_record(0.0, phi, params)] if scalars else []
    if on_record and scalars:
        on_record(recs[0])
    m0 = mass(phi)
    v = np.array(phi.values, dtype=complex)
    done = 0
    while done < nsteps:
        block = min(stride, nsteps - done)
        v = lin(v, 0.5 * h)
        for k in range(block):
            v = v * np.exp(-1j * h * c * np.abs(v) ** a)
            v = lin(v, h if k < block - 1 else 0.5 * h)
        done += block
        t = done * h
        u = WaveField(grid, v)
        times.append(t)
        states.append(u)
        if scalars:
            rec = scalar_record(t, u, params)
            recs.append(rec)
            if on_record:
                on_record(rec)
        m1 = mass(u)
        drift = abs(m1 - m0) / m0 if m0 > 0 else 0.0
        bm = boundary_mass(u, boundary_layer)
        if drift > mass_tol or bm > boundary_tol:
            traj = _pack(params, grid, times, states, recs)
            why = (f"mass drift {drift:.2e} > {mass_tol:.1e}" if drift > mass_tol
                   else f"boundary mass {bm:.2e} > {boundary_tol:.1e}; enlarge the box")
            raise EvolutionAborted(f"evolve aborted at t={t:.6g}: {why}", traj)
    return _pack(params, grid, times, states, recs)


def _pack(params, grid, times, states, recs):
    sc = {}
    if recs:
        for key in recs[0]:
            if key != "t":
                sc[key] = np.array([r[key] for r in recs])
    return Trajectory(params=params, grid=grid, times=np.array(times), states=states, scalars=sc)


def energy_drift_ratio(phi: WaveField, params: NLSParams, t_final: float, dts, method="spectral") -> dict:
    """Max |E(t) - E(0)| over the run for each dt, and successive ratios."""
    drifts = []
    e0 = energy(phi, params)
    for dt in dts:
        tr = evolve(phi, params, t_final, dt, stride=1, method=method, boundary_tol=1.0)
        drifts.append(float(np.max(np.abs(tr.scalars["energy"] - e0))))
    drifts = np.array(drifts)
    return {"dts": list(map(float, dts)), "drifts": drifts.tolist(),
            "ratios": (drifts[:-1] / drifts[1:]).tolist()}


def perturbation_probe(phi: WaveField, phi0: WaveField, params: NLSParams, horizon: float,
                       dt: float, stride: int = 1, method="spectral") -> dict:
    """Strichartz-norm defect between runs from phi + phi0 and phi, and the linear size of phi0."""
    from .diagnostics import strichartz_spacetime_norm

    ex = strichartz_exponents(params.alpha)
    kw = dict(stride=stride, method=method, scalars=False, boundary_tol=1.0)
    u = evolve(phi + phi0, params, horizon, dt, **kw)
    v = evolve(phi, params, horizon, dt, **kw)
    diff = Trajectory(params, phi.grid, u.times, [a - b for a, b in zip(u.states, v.states)])
    lin = evolve(phi0, NLSParams(params.q, params.alpha, coupling=0.0), horizon, dt, **kw)
    return {
        "defect_strichartz": strichartz_spacetime_norm(diff, ex.p, ex.r),
        "eps": strichartz_spacetime_norm(lin, ex.p, ex.r),
        "h1_phi0": h1_norm(phi0),
    }
