"""Uniform periodic grid, Fourier transforms and the norms used everywhere else.

Grid: x_j = -L + j*dx, j = 0..n-1, dx = 2L/n, so x = 0 sits at index n//2.

Fourier coefficients are taken relative to the origin,

    c_k = (1/n) * sum_j f_j exp(-i xi_k x_j),

so a pure mode exp(i xi_1 x) has the single coefficient c_1 = 1 and the
discrete Parseval identity reads  dx * sum|f_j|^2 = 2L * sum|c_k|^2.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "WaveField",
    "FourierField",
    "GridMismatchError",
    "make_grid",
    "wavefield",
    "to_fourier",
    "from_fourier",
    "l2_norm",
    "sup_norm",
    "lp_norm",
    "h1_norm",
    "form_norm_H",
    "derivative",
    "inner",
    "translate",
    "reflect",
    "boundary_mass",
    "field_to_json",
    "field_from_json",
    "save_field",
    "load_field",
]


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int
    half_width: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 16, got {n!r}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def i0(self) -> int:
        """Index of the node x = 0."""
        return self.n // 2

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    @property
    def freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, self.dx)

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx

    def _origin_phase(self) -> np.ndarray:
        # exp(i xi_k L) = (-1)^k for every k of the fftfreq lattice
        return np.where(np.arange(self.n) % 2 == 0, 1.0, -1.0)


def make_grid(n: int, half_width: float) -> GridSpec:
    return GridSpec(n, half_width)


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def at_origin(self) -> complex:
        return complex(self.values[self.grid.i0])

    def with_values(self, values) -> "WaveField":
        return WaveField(self.grid, values)

    def __add__(self, other: "WaveField") -> "WaveField":
        _check_same(self, other)
        return WaveField(self.grid, self.values + other.values)

    def __sub__(self, other: "WaveField") -> "WaveField":
        _check_same(self, other)
        return WaveField(self.grid, self.values - other.values)

    def __mul__(self, s) -> "WaveField":
        return WaveField(self.grid, self.values * s)

    __rmul__ = __mul__

    def __neg__(self) -> "WaveField":
        return WaveField(self.grid, -self.values)


def wavefield(grid: GridSpec, values) -> WaveField:
    return WaveField(grid, values)


@dataclass(frozen=True, eq=False)
class FourierField:
    grid: GridSpec
    coefficients: np.ndarray = field(repr=False)


def _check_same(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def to_fourier(f: WaveField) -> FourierField:
    g = f.grid
    return FourierField(g, np.fft.fft(f.values) * g._origin_phase() / g.n)


def from_fourier(F: FourierField, grid: GridSpec | None = None) -> WaveField:
    if grid is not None and grid != F.grid:
        raise GridMismatchError(f"grid mismatch: {F.grid} vs {grid}")
    g = F.grid
    return WaveField(g, np.fft.ifft(np.asarray(F.coefficients) * g._origin_phase() * g.n))


def derivative(f: WaveField, order: int = 1) -> WaveField:
    """Spectral derivative d^order f / dx^order."""
    xi = f.grid.freqs
    return f.with_values(np.fft.ifft((1j * xi) ** order * np.fft.fft(f.values)))


def inner(f: WaveField, g: WaveField) -> complex:
    """Discrete L2 inner product  dx * sum f conj(g)."""
    _check_same(f, g)
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.dx)


def l2_norm(f: WaveField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.dx))


def sup_norm(f: WaveField) -> float:
    return float(np.max(np.abs(f.values)))


def lp_norm(f: WaveField, p: float) -> float:
    if not np.isfinite(p) or p < 1:
        raise ValueError(f"p must be finite and >= 1, got {p!r}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.dx) ** (1.0 / p))


def h1_norm(f: WaveField) -> float:
    c = to_fourier(f).coefficients
    xi = f.grid.freqs
    return float(np.sqrt(2.0 * f.grid.L * np.sum((1.0 + xi**2) * np.abs(c) ** 2)))


def form_norm_H(f: WaveField, q: float) -> float:
    """Quadratic form (A f, f) = 1/2 int|f'|^2 + q |f(0)|^2 (returned squared)."""
    if q < 0:
        raise ValueError("form_norm_H needs q >= 0")
    c = to_fourier(f).coefficients
    kin = 2.0 * f.grid.L * np.sum(f.grid.freqs**2 * np.abs(c) ** 2)
    return float(0.5 * kin + q * abs(f.at_origin) ** 2)


def boundary_mass(f: WaveField, layer: float = 0.1) -> float:
    """Fraction of the mass sitting in |x| >= (1 - layer) * L."""
    g = f.grid
    a2 = np.abs(f.values) ** 2
    tot = a2.sum()
    if tot == 0:
        return 0.0
    edge = np.abs(g.x) >= (1.0 - layer) * g.L
    return float(a2[edge].sum() / tot)


def translate(f: WaveField, x0: float, warn_tol: float = 1e-8) -> WaveField:
    """tau_{x0} f (y) = f(y - x0). Integer multiples of dx rotate samples exactly."""
    g = f.grid
    if abs(x0) >= g.L:
        raise ValueError(f"|x0| must be < L = {g.L}")
    s = x0 / g.dx
    k = int(round(s))
    if abs(s - k) < 1e-12:
        out = np.roll(f.values, k)
    else:
        out = np.fft.ifft(np.fft.fft(f.values) * np.exp(-1j * g.freqs * x0))
    res = f.with_values(out)
    # content pushed across the box edge wraps around; warn when it is not negligible
    a2 = np.abs(f.values) ** 2
    tot = a2.sum()
    if tot > 0:
        crossing = (g.x + x0 >= g.L) | (g.x + x0 < -g.L)
        lost = a2[crossing].sum() / tot
        if lost > warn_tol:
            warnings.warn(f"translate: {lost:.2e} of the mass crosses the box edge", RuntimeWarning)
    return res


def reflect(f: WaveField) -> WaveField:
    """(R f)(x) = f(-x); the node -L is its own mirror on the periodic grid."""
    return f.with_values(np.roll(f.values[::-1], 1))


def field_to_json(f: WaveField) -> dict:
    v = f.values
    return {
        "n": f.grid.n,
        "half_width": f.grid.half_width,
        "values": [[float(a), float(b)] for a, b in zip(v.real, v.imag)],
    }


def field_from_json(d: dict) -> WaveField:
    g = make_grid(int(d["n"]), float(d["half_width"]))
    arr = np.asarray(d["values"], dtype=float)
    if arr.shape != (g.n, 2):
        raise ValueError(f"values must be {g.n} [re, im] pairs")
    return WaveField(g, arr[:, 0] + 1j * arr[:, 1])


def save_field(f: WaveField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_json(f), fh)


def load_field(path) -> WaveField:
    with open(path) as fh:
        return field_from_json(json.load(fh))
