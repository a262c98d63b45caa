"""Discrete torus with k equally spaced slow bonds.

Sites are ``0 .. nk-1``.  Box ``i`` (0-based) holds sites ``in .. (i+1)n-1``
and slow bond ``i`` joins site ``(i+1)n-1`` to ``(i+1)n mod nk``.  Every other
bond has conductance 1; slow bonds have ``alpha * n**-beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    k: int
    alpha: float = 1.0
    beta: float = 1.5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"alpha must be finite and positive, got {self.alpha!r}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise DomainError(f"beta must be finite and >= 0, got {self.beta!r}")

    @property
    def size(self) -> int:
        return self.n * self.k

    @property
    def slow_rate(self) -> float:
        return self.alpha * self.n ** (-self.beta)

    @property
    def total_rate(self) -> float:
        """Sum of all conductances (the Gillespie total rate, state independent)."""
        return (self.size - self.k) + self.k * self.slow_rate

    def conductances(self) -> np.ndarray:
        xi = np.ones(self.size)
        xi[self.n - 1 :: self.n] = self.slow_rate
        return xi

    def slow_sites(self) -> np.ndarray:
        return np.arange(self.n - 1, self.size, self.n)


def _check_site(spec: LatticeSpec, x: int) -> int:
    if not 0 <= x < spec.size:
        raise IndexError(f"site {x} outside 0..{spec.size - 1}")
    return int(x)


def conductance(spec: LatticeSpec, x: int) -> float:
    x = _check_site(spec, x)
    if x % spec.n == spec.n - 1:
        return spec.slow_rate
    return 1.0


def box_index(spec: LatticeSpec, x: int) -> int:
    return _check_site(spec, x) // spec.n


@dataclass(frozen=True)
class Subcritical:
    """Time scale ``k^2 n^(2+theta)``."""

    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise DomainError(f"theta must be positive, got {self.theta!r}")

    def speedup(self, spec: LatticeSpec) -> float:
        return spec.k**2 * spec.n ** (2.0 + self.theta)

    def __str__(self):
        return f"subcritical(theta={self.theta:g})"


@dataclass(frozen=True)
class Critical:
    """Time scale ``k^2 n^(1+beta)``."""

    def speedup(self, spec: LatticeSpec) -> float:
        return spec.k**2 * spec.n ** (1.0 + spec.beta)

    def __str__(self):
        return "critical"


TimeScaleRegime = Union[Subcritical, Critical]


def speedup_factor(spec: LatticeSpec, regime: TimeScaleRegime) -> float:
    return regime.speedup(spec)


@dataclass
class Configuration:
    """Occupation variables on the torus plus a cached particle count."""

    occupancy: np.ndarray
    particle_count: int = field(default=-1)

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupancy, dtype=np.uint8)
        if occ.ndim != 1:
            raise DomainError("occupancy must be one-dimensional")
        if occ.size and occ.max() > 1:
            raise DomainError("occupancy entries must be 0 or 1")
        self.occupancy = occ
        count = int(occ.sum())
        if self.particle_count == -1:
            self.particle_count = count
        elif self.particle_count != count:
            raise DomainError("particle_count does not match occupancy")

    @classmethod
    def from_sequence(cls, values) -> "Configuration":
        return cls(np.asarray(values, dtype=np.uint8))

    @classmethod
    def from_index(cls, index: int, size: int) -> "Configuration":
        """Inverse of :meth:`index` (site 0 is the least significant bit)."""
        bits = (index >> np.arange(size)) & 1
        return cls(bits.astype(np.uint8))

    def __len__(self):
        return self.occupancy.size

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self.occupancy, other.occupancy)

    def __hash__(self):
        return hash(self.occupancy.tobytes())

    def __repr__(self):
        return f"Configuration({''.join(map(str, self.occupancy.tolist()))})"

    def copy(self) -> "Configuration":
        return Configuration(self.occupancy.copy(), self.particle_count)

    def index(self) -> int:
        return int(np.dot(self.occupancy.astype(np.int64), 1 << np.arange(len(self), dtype=np.int64)))

    def check(self):
        if int(self.occupancy.sum()) != self.particle_count:
            raise AssertionError("particle count drifted from occupancy")

    def box_counts(self, n: int) -> np.ndarray:
        return self.occupancy.reshape(-1, n).sum(axis=1)


def swap(config: Configuration, x: int) -> Configuration:
    """Return the configuration with sites ``x`` and ``x+1`` (mod size) exchanged."""
    size = len(config)
    if not 0 <= x < size:
        raise IndexError(f"site {x} outside 0..{size - 1}")
    y = (x + 1) % size
    out = config.copy()
    occ = out.occupancy
    occ[x], occ[y] = occ[y], occ[x]
    return out


def generator_apply(
    spec: LatticeSpec, f: Callable[[Configuration], float], eta: Configuration
) -> float:
    """Unaccelerated generator: sum over bonds of xi * (f(eta^{x,x+1}) - f(eta))."""
    base = f(eta)
    total = 0.0
    for x in range(spec.size):
        total += conductance(spec, x) * (f(swap(eta, x)) - base)
    return total
