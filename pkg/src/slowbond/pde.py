"""Reference solutions of the two limiting heat equations.

``solve_discrete_heat`` diagonalises the periodic discrete Laplacian on T_k
(a circulant matrix) with the FFT; ``solve_continuous_heat`` propagates the
Fourier series of the initial profile on the continuous torus.  Neither uses
time stepping.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, NumericError, UsageError
from .profiles import Profile

DEFAULT_CUTOFF = 64
_QUAD_POINTS = 4096


@dataclass(frozen=True)
class DiscreteField:
    """Density on the discrete torus T_k (one value per box)."""

    values: np.ndarray

    @property
    def k(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FourierField:
    """``mean + sum_m a_m cos(2 pi m u) + b_m sin(2 pi m u)`` for m = 1..M."""

    mean: float
    frequencies: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    tail_bound: float = 0.0

    def __call__(self, u):
        return evaluate(self, u)


DensityField = DiscreteField | FourierField


def solve_discrete_heat(rho0, alpha: float, k: int | None = None, t: float = 0.0) -> np.ndarray:
    """Exact solution of ``d/dt rho = alpha * Delta_k rho`` on T_k at time ``t``."""
    rho0 = np.asarray(rho0, dtype=float)
    if k is None:
        k = rho0.size
    if rho0.size != k:
        raise DomainError(f"expected {k} initial values, got {rho0.size}")
    if t < 0:
        raise DomainError("time must be nonnegative")
    if k == 1:
        return rho0.copy()
    m = np.arange(k)
    eig = -4.0 * alpha * k * k * np.sin(np.pi * m / k) ** 2
    return np.fft.ifft(np.fft.fft(rho0) * np.exp(eig * t)).real


@lru_cache(maxsize=64)
def _fourier_series(gamma: Profile, points: int):
    u = np.arange(points) / points
    vals = gamma(u)
    if not np.all(np.isfinite(vals)):
        raise NumericError("profile produced non-finite values")
    spec = np.fft.rfft(vals) / points
    mean = spec[0].real
    cos = 2.0 * spec[1:].real
    sin = -2.0 * spec[1:].imag
    return mean, cos, sin


def fourier_coefficients(gamma: Profile, cutoff: int = DEFAULT_CUTOFF, points: int = _QUAD_POINTS):
    """Mean, cosine and sine coefficients of ``gamma`` up to ``cutoff``.

    Computed with the periodic trapezoidal rule, which converges
    geometrically for analytic periodic profiles and is exact for
    band-limited ones.
    """
    if cutoff < 1 or cutoff >= points // 2:
        raise UsageError(f"cutoff must lie in 1..{points // 2 - 1}")
    mean, cos, sin = _fourier_series(gamma, points)
    return mean, cos[:cutoff].copy(), sin[:cutoff].copy(), cos[cutoff:], sin[cutoff:]


def solve_continuous_heat(gamma: Profile, alpha: float, t: float,
                          cutoff: int = DEFAULT_CUTOFF) -> FourierField:
    if t < 0:
        raise DomainError("time must be nonnegative")
    mean, cos, sin, tail_cos, tail_sin = fourier_coefficients(gamma, cutoff)
    m = np.arange(1, cutoff + 1, dtype=float)
    decay = np.exp(-4.0 * math.pi**2 * m**2 * alpha * t)
    # last rfft bin is the Nyquist term; its sine part is identically zero
    mt = np.arange(cutoff + 1, cutoff + 1 + tail_cos.size, dtype=float)
    tail = np.exp(-4.0 * math.pi**2 * mt**2 * alpha * t) * (np.abs(tail_cos) + np.abs(tail_sin))
    return FourierField(float(mean), m.astype(int), cos * decay, sin * decay, float(tail.sum()))


def heat_rate(field: FourierField, alpha: float) -> FourierField:
    """Fourier field of ``alpha * d^2/du^2 rho`` (the exact time derivative)."""
    factor = -4.0 * math.pi**2 * field.frequencies.astype(float) ** 2 * alpha
    return FourierField(0.0, field.frequencies, field.cos_coeffs * factor,
                        field.sin_coeffs * factor, 0.0)


def evaluate(field, u, *, interpolate: bool = False):
    """Value of a density field at a point (Fourier) or box index (discrete).

    A discrete field queried at a non-integer point requires ``interpolate``,
    which returns the value of the box containing the point.
    """
    if isinstance(field, DiscreteField):
        arr = np.asarray(u)
        if np.issubdtype(arr.dtype, np.integer):
            idx = arr
            if np.any(idx < 0) or np.any(idx >= field.k):
                raise IndexError(f"box index outside 0..{field.k - 1}")
        elif interpolate:
            idx = np.floor((np.asarray(u, dtype=float) % 1.0) * field.k).astype(int)
        else:
            raise UsageError("continuous point queried on a discrete field; pass interpolate=True")
        out = field.values[idx]
        return float(out) if np.ndim(out) == 0 else out
    if isinstance(field, FourierField):
        u = np.asarray(u, dtype=float)
        phase = 2.0 * math.pi * np.multiply.outer(u, field.frequencies)
        out = field.mean + np.cos(phase) @ field.cos_coeffs + np.sin(phase) @ field.sin_coeffs
        return float(out) if np.ndim(out) == 0 else out
    raise UsageError(f"not a density field: {type(field).__name__}")


def integrate_against(field: FourierField, G, points: int = _QUAD_POINTS) -> float:
    """``integral over T of G(u) rho(u) du`` by the periodic trapezoidal rule."""
    u = np.arange(points) / points
    return float(np.mean(G(u) * evaluate(field, u)))


def total_mass(field) -> float:
    if isinstance(field, DiscreteField):
        return float(field.values.mean())
    return float(field.mean)


def field_to_csv(field, path, grid: int = 256) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(field, DiscreteField):
            w.writerow(["index", "value"])
            for i, v in enumerate(field.values.tolist()):
                w.writerow([i, repr(v)])
        else:
            w.writerow(["gridpoint", "value"])
            u = np.arange(grid) / grid
            for ui, v in zip(u.tolist(), evaluate(field, u).tolist()):
                w.writerow([repr(ui), repr(v)])
