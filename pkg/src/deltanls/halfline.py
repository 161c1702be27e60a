"""Half-line building blocks for the delta propagator.

* ``free_halfline_exp``: closed-form free evolution of exp(kappa x) 1_{x<0}
  through the Faddeeva function.
* ``onesided_derivatives``: derivatives at the node x=0 from samples on one side.
* ``halfline_sweep``: the backward exponential recursion
  G(x) = -q e^{qx} int_x^0 h(y) e^{-qy} dy on the nodes x <= 0.

The closed forms let the propagator remove the kink at x = 0 before anything
goes through the FFT, which would otherwise alias it.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
from scipy.signal import lfilter
from scipy.special import wofz


def free_halfline_exp(kappa: float, t: float, x: np.ndarray) -> np.ndarray:
    """e^{-itH_0}[exp(kappa y) 1_{y<0}](x) on the whole line, kappa > 0.

    With z = (x + i kappa t) / sqrt(2 i t) the solution is
    (1/2) exp(ix^2/2t) w(iz); for Re z < 0 the equivalent form
    exp(kappa x + i kappa^2 t/2) - (1/2) exp(ix^2/2t) w(-iz) avoids overflow.
    """
    x = np.asarray(x, dtype=float)
    if t == 0:
        out = np.where(x < 0, np.exp(kappa * np.minimum(x, 0.0)), 0.0).astype(complex)
        out[x == 0] = 0.5
        return out
    if t < 0:
        # time reversal: e^{itH_0} g = conj(e^{-itH_0} conj g), g real here
        return np.conj(free_halfline_exp(kappa, -t, x))
    s = np.sqrt(2j * t)
    z = (x + 1j * kappa * t) / s
    gauss = np.exp(0.5j * x**2 / t)
    out = np.empty(x.shape, dtype=complex)
    pos = z.real >= 0
    out[pos] = 0.5 * gauss[pos] * wofz(1j * z[pos])
    neg = ~pos
    out[neg] = (np.exp(kappa * x[neg] + 0.5j * kappa**2 * t)
                - 0.5 * gauss[neg] * wofz(-1j * z[neg]))
    return out


def even_exp_evolved(kappa: float, q: float, t: float, x: np.ndarray) -> np.ndarray:
    """e^{-itH_q} exp(-kappa|y|) evaluated at x, closed form (kappa != q, q >= 0).

    The free part is P(x) + P(-x) with P the half-line exponential.  For the
    delta part, h = 2 exp(kappa y) on y < 0 gives
    G = 2q/(kappa - q) (exp(kappa y) - exp(q y)), which is again a sum of
    half-line exponentials, evolved and folded to |x|.
    """
    out = free_halfline_exp(kappa, t, x) + free_halfline_exp(kappa, t, -x)
    if q > 0:
        ax = np.abs(x)
        out = out + 2.0 * q / (kappa - q) * (free_halfline_exp(kappa, t, ax)
                                             - free_halfline_exp(q, t, ax))
    return out


def pick_exponents(q: float, count: int, start: float = 2.0, gap: float = 0.4) -> list[float]:
    """Decay rates for the kink-matching exponentials, kept away from q."""
    ks = []
    k = start
    while len(ks) < count:
        if abs(k - q) > gap:
            ks.append(k)
        k += 1.0
    return ks


@lru_cache(maxsize=16)
def _derivative_rows(npts: int, kmax: int) -> np.ndarray:
    # rows map samples at offsets 0,1,..,npts-1 (unit spacing) to derivatives 0..kmax
    V = np.vander(np.arange(npts, dtype=float), npts, increasing=True)
    inv = np.linalg.inv(V)
    fac = np.array([factorial(k) for k in range(kmax + 1)], dtype=float)
    return inv[: kmax + 1] * fac[:, None]


def onesided_derivatives(samples: np.ndarray, dx: float, kmax: int, npts: int = 10) -> np.ndarray:
    """Derivatives 0..kmax at the first sample, samples[j] taken at offset j*dx.

    Pass samples ordered away from the point (reverse the left side and flip the
    sign of odd derivatives afterwards).
    """
    rows = _derivative_rows(npts, kmax)
    d = rows @ np.asarray(samples[:npts])
    return d / dx ** np.arange(kmax + 1)


def derivatives_at_origin(v: np.ndarray, i0: int, dx: float, kmax: int, side: int,
                          edge: complex | None = None, npts: int = 10) -> np.ndarray:
    """One-sided derivatives of v at the node i0; side=-1 left limit, +1 right limit."""
    if side > 0:
        s = np.array(v[i0:i0 + npts], dtype=complex)
        if edge is not None:
            s[0] = edge
        return onesided_derivatives(s, dx, kmax, npts)
    s = np.array(v[i0 - npts + 1:i0 + 1][::-1], dtype=complex)
    if edge is not None:
        s[0] = edge
    d = onesided_derivatives(s, dx, kmax, npts)
    return d * (-1.0) ** np.arange(kmax + 1)


@lru_cache(maxsize=64)
def _sweep_weights(qdx: float, order: int) -> tuple:
    # Gauss-Legendre rule on the unit cell, exact enough for e^{-q s} times a polynomial
    gs, gw = np.polynomial.legendre.leggauss(16)
    s = 0.5 * (gs + 1.0)
    kern = np.exp(-qdx * s) * 0.5 * gw * qdx
    tables = []
    for off in range(order):
        nodes = np.arange(order) - off
        basis = np.ones((order, s.size))
        for p in range(order):
            for r in range(order):
                if r != p:
                    basis[p] *= (s - nodes[r]) / (nodes[p] - nodes[r])
        tables.append(basis @ kern)
    return tuple(tables)


def halfline_sweep(h: np.ndarray, q: float, dx: float, scheme: str = "lagrange", order: int = 8) -> np.ndarray:
    """Backward recursion for G_j = -q e^{q x_j} int_{x_j}^{x_end} h e^{-qy} dy.

    ``h`` holds samples on consecutive nodes; the last node is the upper limit,
    where G vanishes. ``scheme='trapezoid'`` is the second-order sweep
    G_i = a G_{i+1} - (q dx/2)(h_i + a h_{i+1}), a = e^{-q dx};
    ``scheme='lagrange'`` integrates the exponential weight exactly against a
    local degree-(order-1) interpolant of h, using only nodes inside the segment.
    """
    h = np.asarray(h, dtype=complex)
    m = h.size
    a = np.exp(-q * dx)
    if m < 2:
        return np.zeros(m, dtype=complex)
    if scheme == "trapezoid":
        incr = 0.5 * q * dx * (h[:-1] + a * h[1:])
    elif scheme == "lagrange":
        order = min(order, m)
        tables = _sweep_weights(float(q * dx), order)
        half = order // 2 - 1
        incr = np.empty(m - 1, dtype=complex)
        # interior cells share one centered stencil; vectorize them
        lo, hi = half, m - order + half
        if hi >= lo:
            w = tables[half]
            idx = np.arange(lo, hi + 1)
            win = np.lib.stride_tricks.sliding_window_view(h, order)
            incr[lo:hi + 1] = win[idx - half] @ w
        for j in list(range(0, min(lo, m - 1))) + list(range(max(hi + 1, 0), m - 1)):
            start = min(max(j - half, 0), m - order)
            incr[j] = tables[j - start] @ h[start:start + order]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    # G_j = a G_{j+1} - incr_j, run right to left as a first-order IIR filter
    rev = np.concatenate([[0.0], -incr[::-1]])
    g = lfilter([1.0], [1.0, -a], rev)
    return g[::-1]
