"""Realizations of the linear group exp(-it H_q), H_q = -1/2 d^2/dx^2 + q delta.

exact-kernel
    The explicit formula for data supported in x <= 0,

        e^{-itH_q} f = e^{-itH_0} f + F(x) 1_{x>=0} + F(-x) 1_{x<=0},
        F = e^{-itH_0}(f * rho_q),  rho_q(x) = -q e^{qx} 1_{x<=0},

    extended to general data by reflection.  Output samples approximate the
    whole-line solution.
crank-nicolson
    Second-order finite differences with q/dx on the x = 0 row, Cayley step.
spectral
    Exact exponential of the collocation operator
    F^{-1} diag(xi^2/2) F + (q/dx) e_0 e_0^T, computed once per (grid, q) by
    diagonalizing its even block.  Unitary and a group to roundoff on the
    grid, so it is the default linear factor for the nonlinear solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh, solve_banded

from .grid import GridSpec, WaveField, reflect
from .halfline import (
    derivatives_at_origin,
    even_exp_evolved,
    free_halfline_exp,
    halfline_sweep,
    pick_exponents,
)

__all__ = [
    "DeltaParams",
    "PropagatorMethod",
    "SupportError",
    "free_propagate",
    "exp_kernel_convolve",
    "delta_propagate_left",
    "delta_propagate",
    "cn_propagate",
    "SpectralPropagator",
    "spectral_propagator",
    "spectral_propagate",
    "linear_propagate",
]

METHODS = ("exact-kernel", "crank-nicolson", "spectral")


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaParams:
    q: float

    def __post_init__(self):
        if not np.isfinite(self.q):
            raise ValueError("q must be finite")


@dataclass(frozen=True)
class PropagatorMethod:
    tag: str = "spectral"
    sub_steps: int = 1

    def __post_init__(self):
        if self.tag not in METHODS:
            raise ValueError(f"unknown propagator {self.tag!r}; choose from {METHODS}")
        if int(self.sub_steps) < 1:
            raise ValueError("sub_steps must be >= 1")

    @classmethod
    def coerce(cls, m) -> "PropagatorMethod":
        if isinstance(m, cls):
            return m
        if m is None:
            return cls()
        if isinstance(m, str):
            return cls(m)
        raise TypeError(f"cannot interpret {m!r} as a propagator method")


def _check_exact_q(q):
    if q < 0:
        raise ValueError("the exact-kernel path needs q >= 0 (repulsive delta)")


def _free(v: np.ndarray, xi: np.ndarray, t: float) -> np.ndarray:
    if t == 0:
        return np.array(v, dtype=complex)
    return np.fft.ifft(np.exp(-0.5j * t * xi**2) * np.fft.fft(v))


def free_propagate(f: WaveField, t: float) -> WaveField:
    return f.with_values(_free(f.values, f.grid.freqs, t))


def exp_kernel_convolve(f: WaveField, q: float, scheme: str = "trapezoid") -> WaveField:
    """f * rho_q by the one-sided sweep g(x) = -q e^{qx} int_x^inf f(y) e^{-qy} dy.

    The sweep starts from g = 0 at the right end of the box.  ``scheme`` is
    'trapezoid' (second order) or 'lagrange' (8-point local interpolation).
    """
    if q <= 0:
        raise ValueError("exp_kernel_convolve needs q > 0")
    g = halfline_sweep(f.values, q, f.grid.dx, scheme=scheme)
    return f.with_values(g)


# number of exponentials matched to the kink of f * rho_q at 0, and of odd
# derivative jumps removed from the input before the FFT sees it
_N_MATCH = 4
_N_JUMPS = 3


def _left_correction(h: np.ndarray, grid: GridSpec, q: float, t: float, scheme: str) -> np.ndarray:
    """F(|x|) with F = e^{-itH_0} G, G = h * rho_q on x <= 0 (h given on nodes 0..i0)."""
    i0, dx, x = grid.i0, grid.dx, grid.x
    G = halfline_sweep(h, q, dx, scheme=scheme)
    # G has a kink at 0: G(0)=0, G' = qG + qh.  Match the first _N_MATCH
    # one-sided derivatives by exponentials with known free evolution.
    hd = derivatives_at_origin(h, i0, dx, _N_MATCH, side=-1)
    Gd = np.zeros(_N_MATCH, dtype=complex)
    for j in range(1, _N_MATCH):
        Gd[j] = q * Gd[j - 1] + q * hd[j - 1]
    kap = pick_exponents(q, _N_MATCH)
    V = np.array([[k**j for k in kap] for j in range(_N_MATCH)], dtype=float)
    amp = np.linalg.solve(V, Gd)
    xl = x[: i0 + 1]
    smooth = np.zeros(grid.n, dtype=complex)
    smooth[: i0 + 1] = G - sum(a * np.exp(k * xl) for a, k in zip(amp, kap))
    smooth[i0] = 0.0
    F = _free(smooth, grid.freqs, t)
    C = np.where(x >= 0, F, np.roll(F[::-1], 1))
    # the mirror of x=-L is +L, which the periodic grid identifies with -L
    # itself; there F would pick up the tail of G cut off at -L instead of the
    # whole-line value at +L, which is negligible
    C[0] = 0.0
    ax = np.abs(x)
    for a, k in zip(amp, kap):
        C = C + a * free_halfline_exp(k, t, ax)
    return C


def delta_propagate_left(f: WaveField, q: float, t: float, edge: complex | None = None,
                         scheme: str = "lagrange", support_tol: float = 1e-10) -> WaveField:
    """Explicit formula for data supported in x <= 0.

    ``edge`` is the limit f(0^-) when the node value at 0 is not it (the
    reflection split hands each half its own one-sided limit).
    """
    _check_exact_q(q)
    g = f.grid
    v = f.values
    a2 = np.abs(v) ** 2
    right = a2[g.x > g.dx].sum()
    if right > support_tol * max(a2.sum(), np.finfo(float).tiny):
        raise SupportError(f"data not supported in x <= 0: right-side mass fraction {right / a2.sum():.3e}")
    out = _free(v, g.freqs, t)
    if q == 0:
        return f.with_values(out)
    h = np.array(v[: g.i0 + 1], dtype=complex)
    if edge is not None:
        h[-1] = edge
    return f.with_values(out + _left_correction(h, g, q, t, scheme))


def _even_jump_profile(f: WaveField, q: float):
    """Fit sum_m b_m exp(-k_m |x|) to the odd-derivative jumps of f at 0."""
    g = f.grid
    v = f.values
    km = 2 * _N_JUMPS - 1
    dl = derivatives_at_origin(v, g.i0, g.dx, km, side=-1)
    dr = derivatives_at_origin(v, g.i0, g.dx, km, side=+1)
    jumps = (dr - dl)[1::2]
    kap = pick_exponents(q, _N_JUMPS, start=1.5)
    A = np.array([[-2.0 * k ** (2 * p + 1) for k in kap] for p in range(_N_JUMPS)])
    b = np.linalg.solve(A, jumps)
    return kap, b


def delta_propagate(f: WaveField, q: float, t: float, kink_correction: bool = True,
                    scheme: str = "lagrange") -> WaveField:
    """Reflection reduction: f = f 1_{x<=0} + f 1_{x>0}, right half via R o left o R.

    With ``kink_correction`` the odd-derivative jumps of f at 0 (as carried by
    states that already felt the delta) are first removed with exp(-k|x|)
    profiles whose evolution is known in closed form; the remainder is smooth
    and goes through the reflection split.
    """
    _check_exact_q(q)
    if q == 0:
        return free_propagate(f, t)
    g = f.grid
    v = np.array(f.values, dtype=complex)
    x = g.x
    extra = 0.0
    if kink_correction:
        kap, b = _even_jump_profile(f, q)
        ax = np.abs(x)
        for bm, k in zip(b, kap):
            v -= bm * np.exp(-k * ax)
            extra = extra + bm * even_exp_evolved(k, q, t, x)
    e0 = v[g.i0]
    left = np.where(x <= 0, v, 0.0)
    right = np.where(x > 0, v, 0.0)
    uL = delta_propagate_left(f.with_values(left), q, t, edge=e0, scheme=scheme)
    uR = delta_propagate_left(reflect(f.with_values(right)), q, t, edge=e0, scheme=scheme)
    return f.with_values(uL.values + reflect(uR).values + extra)


def cn_propagate(f: WaveField, q: float, t: float, sub_steps: int) -> WaveField:
    """Crank-Nicolson with the 3-point Laplacian and q/dx on the x = 0 row."""
    sub_steps = int(sub_steps)
    if sub_steps < 1:
        raise ValueError("sub_steps must be >= 1")
    g = f.grid
    u = np.array(f.values, dtype=complex)
    if t == 0:
        return f.with_values(u)
    n, dx = g.n, g.dx
    dt = t / sub_steps
    main = np.full(n, 1.0 / dx**2)
    main[g.i0] += q / dx
    off = -0.5 / dx**2
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 0.5j * dt * off
    ab[1] = 1.0 + 0.5j * dt * main
    ab[2, :-1] = 0.5j * dt * off
    for _ in range(sub_steps):
        Hu = main * u
        Hu[:-1] += off * u[1:]
        Hu[1:] += off * u[:-1]
        try:
            u = solve_banded((1, 1), ab, u - 0.5j * dt * Hu, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"Crank-Nicolson tridiagonal solve failed: {exc}") from exc
    return f.with_values(u)


class SpectralPropagator:
    """Exact exponential of the collocation operator with the delta lumped at node 0.

    Even and odd parts decouple (the operator commutes with reflection); the
    odd part only sees the free multiplier.  The even block, in the cosine
    basis, is diag(xi_k^2/2) + (q/dx) b b^T and is diagonalized once.
    """

    def __init__(self, grid: GridSpec, q: float):
        self.grid = grid
        self.q = float(q)
        n = grid.n
        m = n // 2
        self.m = m
        k = np.arange(m + 1)
        omega = 0.5 * (np.pi * k / grid.L) ** 2
        b = np.full(m + 1, np.sqrt(2.0 / n))
        b[0] = b[-1] = np.sqrt(1.0 / n)
        H = np.diag(omega) + (self.q / grid.dx) * np.outer(b, b)
        self.eigenvalues, self.eigenvectors = eigh(H)
        self._phase = grid._origin_phase()
        self._mirror = (-np.arange(n)) % n

    def apply(self, f: WaveField | np.ndarray, t: float):
        is_field = isinstance(f, WaveField)
        v = f.values if is_field else np.asarray(f, dtype=complex)
        out = self.apply_values(v, t)
        return f.with_values(out) if is_field else out

    def apply_values(self, v: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return np.array(v, dtype=complex)
        n, m = self.grid.n, self.m
        c = np.fft.fft(v) * self._phase
        cr = c[self._mirror]
        ce = 0.5 * (c + cr)
        co = 0.5 * (c - cr)
        a = np.empty(m + 1, dtype=complex)
        a[0] = ce[0]
        a[1:m] = np.sqrt(2.0) * ce[1:m]
        a[m] = ce[m]
        V = self.eigenvectors
        ri = np.stack([a.real, a.imag], axis=1)
        w = V.T @ ri
        w = (w[:, 0] + 1j * w[:, 1]) * np.exp(-1j * t * self.eigenvalues)
        a = V @ np.stack([w.real, w.imag], axis=1)
        a = a[:, 0] + 1j * a[:, 1]
        ce2 = np.empty(n, dtype=complex)
        ce2[0] = a[0]
        ce2[1:m] = a[1:m] / np.sqrt(2.0)
        ce2[m] = a[m]
        ce2[m + 1:] = ce2[1:m][::-1]
        co2 = co * np.exp(-0.5j * t * self.grid.freqs**2)
        return np.fft.ifft((ce2 + co2) * self._phase)


@lru_cache(maxsize=4)
def spectral_propagator(grid: GridSpec, q: float) -> SpectralPropagator:
    return SpectralPropagator(grid, q)


def spectral_propagate(f: WaveField, q: float, t: float) -> WaveField:
    return spectral_propagator(f.grid, float(q)).apply(f, t)


def linear_propagate(f: WaveField, q: float, t: float, method="spectral") -> WaveField:
    m = PropagatorMethod.coerce(method)
    if m.tag == "spectral":
        return spectral_propagate(f, q, t)
    if m.tag == "exact-kernel":
        return delta_propagate(f, q, t)
    return cn_propagate(f, q, t, m.sub_steps)
