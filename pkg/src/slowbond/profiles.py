"""Initial density profiles, test functions and empirical measures on the torus."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError, UsageError
from .lattice import Configuration, LatticeSpec

TWO_PI = 2.0 * math.pi
GRID_POINTS = 10_000


@dataclass(frozen=True, eq=False)
class Profile:
    """Density profile ``gamma: T -> [0, 1]`` with its margin and Lipschitz metadata.

    ``epsilon0`` and ``kappa`` are user-declared; :meth:`verify` checks them on
    a grid.  The evaluator must accept numpy arrays.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    epsilon0: float
    kappa: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.epsilon0 <= 0.5:
            raise DomainError(f"epsilon0 must lie in [0, 1/2], got {self.epsilon0}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be a nonnegative real, got {self.kappa}")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.evaluator(u % 1.0), dtype=float), u.shape)

    @property
    def admissible(self) -> bool:
        """Bounded away from 0 and 1, as the entropy estimates require."""
        return 0.0 < self.epsilon0 < 0.5

    def verify(self, points: int = GRID_POINTS) -> None:
        u = np.arange(points) / points
        vals = self(u)
        tol = 1e-12
        if vals.min() < self.epsilon0 - tol or vals.max() > 1.0 - self.epsilon0 + tol:
            raise DomainError(
                f"profile {self.name} leaves [{self.epsilon0}, {1 - self.epsilon0}] "
                f"(range {vals.min():.6g}..{vals.max():.6g})"
            )
        steps = np.abs(np.diff(np.append(vals, vals[0])))
        if steps.max() > self.kappa / points + tol:
            raise DomainError(
                f"profile {self.name} violates Lipschitz constant {self.kappa} "
                f"(observed {steps.max() * points:.6g})"
            )

    def describe(self) -> str:
        args = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({args})"


def constant_profile(c: float, epsilon0: float | None = None) -> Profile:
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"constant density must lie in [0, 1], got {c}")
    if epsilon0 is None:
        epsilon0 = min(c, 1.0 - c, 0.49)
    return Profile(lambda u: np.full_like(u, c, dtype=float), epsilon0, 0.0,
                   "constant", {"c": c})


def sine_profile(offset: float = 0.5, amplitude: float = 0.25, frequency: int = 1,
                 epsilon0: float | None = None) -> Profile:
    """``offset + amplitude * sin(2 pi frequency u)``."""
    if int(frequency) != frequency or frequency < 1:
        raise DomainError("frequency must be a positive integer (periodicity)")
    frequency = int(frequency)
    lo, hi = offset - abs(amplitude), offset + abs(amplitude)
    if lo < 0 or hi > 1:
        raise DomainError("sine profile leaves [0, 1]")
    if epsilon0 is None:
        epsilon0 = min(lo, 1.0 - hi)
    kappa = TWO_PI * frequency * abs(amplitude)
    return Profile(
        lambda u: offset + amplitude * np.sin(TWO_PI * frequency * u),
        epsilon0, kappa, "sine",
        {"offset": offset, "amplitude": amplitude, "frequency": frequency},
    )


def bump_profile(base: float = 0.3, height: float = 0.4, center: float = 0.5,
                 concentration: float = 4.0, epsilon0: float | None = None) -> Profile:
    """Periodic analytic bump ``base + height * exp(c (cos(2 pi (u - center)) - 1))``."""
    if height < 0 or base < 0 or base + height > 1:
        raise DomainError("bump profile leaves [0, 1]")
    c = concentration

    def f(u):
        return base + height * np.exp(c * (np.cos(TWO_PI * (u - center)) - 1.0))

    if epsilon0 is None:
        epsilon0 = min(base, 1.0 - base - height, 0.49)
    # max |f'| located on a fine grid, padded for grid resolution
    s = np.linspace(0.0, 1.0, 200_001)
    deriv = height * c * TWO_PI * np.abs(np.sin(TWO_PI * s)) * np.exp(c * (np.cos(TWO_PI * s) - 1.0))
    kappa = float(deriv.max()) * (1.0 + 1e-6)
    return Profile(f, epsilon0, kappa, "bump",
                   {"base": base, "height": height, "center": center, "concentration": c})


PROFILE_CATALOG = {
    "constant": constant_profile,
    "sine": sine_profile,
    "bump": bump_profile,
}


def make_profile(name: str, **params) -> Profile:
    try:
        factory = PROFILE_CATALOG[name]
    except KeyError:
        raise UsageError(f"unknown profile {name!r}; choose from {sorted(PROFILE_CATALOG)}") from None
    return factory(**params)


@dataclass(frozen=True, eq=False)
class TestFunction:
    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray] | None = None

    __test__ = False  # not a pytest class

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.evaluator(u), dtype=float), u.shape)

    def is_periodic(self, tol: float = 1e-9) -> bool:
        return abs(float(self(0.0)) - float(self(1.0))) <= tol


def _mode(fn, m):
    return lambda u: fn(TWO_PI * m * u)


TEST_FUNCTIONS = {
    "one": TestFunction("one", lambda u: np.ones_like(u), lambda u: np.zeros_like(u)),
    "sin2pi": TestFunction("sin2pi", _mode(np.sin, 1), lambda u: -(TWO_PI**2) * np.sin(TWO_PI * u)),
    "cos2pi": TestFunction("cos2pi", _mode(np.cos, 1), lambda u: -(TWO_PI**2) * np.cos(TWO_PI * u)),
    "sin4pi": TestFunction("sin4pi", _mode(np.sin, 2), lambda u: -(2 * TWO_PI) ** 2 * np.sin(2 * TWO_PI * u)),
}


def test_function(name: str) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise UsageError(f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}") from None


test_function.__test__ = False


def constant_test_function(c: float) -> TestFunction:
    return TestFunction(f"const{c:g}", lambda u: np.full_like(u, c, dtype=float), lambda u: np.zeros_like(u))


@dataclass
class EmpiricalMeasure:
    """Finite atomic measure on [0, 1) with total mass at most one."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1)
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if self.positions.shape != self.masses.shape:
            raise DomainError("positions and masses differ in length")
        if self.positions.size:
            if self.positions.min() < 0 or self.positions.max() >= 1:
                raise DomainError("atom positions must lie in [0, 1)")
            if np.unique(self.positions).size != self.positions.size:
                raise DomainError("atom positions must be distinct")
            if self.masses.min() < 0:
                raise DomainError("atom masses must be nonnegative")
        if self.total_mass > 1.0 + 1e-12:
            raise DomainError(f"total mass {self.total_mass} exceeds one")

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __len__(self):
        return self.positions.size

    def atoms(self):
        return list(zip(self.positions.tolist(), self.masses.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "mass"])
            for u, m in self.atoms():
                w.writerow([repr(u), repr(m)])

    @classmethod
    def from_csv(cls, path) -> "EmpiricalMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["position"]) for r in rows], [float(r["mass"]) for r in rows])


def _occupancy(spec: LatticeSpec, eta: Configuration) -> np.ndarray:
    occ = eta.occupancy
    if occ.size != spec.size:
        raise DomainError(f"configuration has {occ.size} sites, lattice has {spec.size}")
    return occ.astype(float)


def empirical_Pi(spec: LatticeSpec, eta: Configuration) -> EmpiricalMeasure:
    occ = _occupancy(spec, eta)
    x = np.flatnonzero(occ)
    return EmpiricalMeasure(x / spec.size, np.full(x.size, 1.0 / spec.size))


def empirical_Pi_tilde(spec: LatticeSpec, eta: Configuration) -> EmpiricalMeasure:
    occ = _occupancy(spec, eta)
    box_avg = occ.reshape(spec.k, spec.n).mean(axis=1)
    return EmpiricalMeasure(np.arange(spec.size) / spec.size, np.repeat(box_avg, spec.n) / spec.size)


def empirical_pi(spec: LatticeSpec, eta: Configuration) -> EmpiricalMeasure:
    occ = _occupancy(spec, eta)
    box_avg = occ.reshape(spec.k, spec.n).mean(axis=1)
    return EmpiricalMeasure(np.arange(spec.k) / spec.k, box_avg / spec.k)


def pair(m: EmpiricalMeasure, G) -> float:
    if len(m) == 0:
        return 0.0
    return float(np.dot(m.masses, G(m.positions)))


def box_average_profile(gamma: Profile, k: int, tol: float = 1e-10) -> np.ndarray:
    """Box means ``k * integral of gamma over [i/k, (i+1)/k)`` by adaptive quadrature."""
    if k < 1:
        raise DomainError("k must be at least 1")
    out = np.empty(k)
    for i in range(k):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(lambda u: float(gamma(u)), i / k, (i + 1) / k,
                                          epsabs=tol, epsrel=0.0, limit=200)
            except integrate.IntegrationWarning as exc:
                raise NumericError(f"box {i}: quadrature did not converge ({exc})") from exc
        if err > tol:
            raise NumericError(f"box {i}: quadrature error estimate {err} above {tol}")
        out[i] = k * val
    slack = 1e-9
    if out.min() < gamma.epsilon0 - slack or out.max() > 1 - gamma.epsilon0 + slack:
        raise DomainError("box averages leave [epsilon0, 1 - epsilon0]")
    return out


def discrete_laplacian(rho, k: int | None = None) -> np.ndarray:
    """Periodic ``k^2 [rho(i+1) + rho(i-1) - 2 rho(i)]``."""
    rho = np.asarray(rho, dtype=float)
    if k is None:
        k = rho.size
    if rho.size != k:
        raise DomainError(f"expected {k} entries, got {rho.size}")
    return k * k * (np.roll(rho, -1) + np.roll(rho, 1) - 2.0 * rho)


def pairing_gap(spec: LatticeSpec, eta: Configuration, G, lipschitz: float) -> tuple[float, float]:
    """``|<Pi, G> - <Pi~, G>|`` and the bound ``lipschitz / k`` it must respect.

    Within a box both measures carry the same mass and every atom sits less
    than ``1/k`` away from every other, so the gap is at most ``Lip(G)/k``
    times the total mass.
    """
    gap = abs(pair(empirical_Pi(spec, eta), G) - pair(empirical_Pi_tilde(spec, eta), G))
    mass = eta.particle_count / spec.size
    return gap, lipschitz * mass / spec.k
