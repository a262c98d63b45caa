"""Numerical certification of the subgaussian toolkit, plus basic statistics.

Every check evaluates moment generating functions exactly over a finite
support whenever one exists, and compares against the claimed quadratic
bound on a grid of ``theta`` values.  A nonnegative ``margin`` certifies the
bound on that grid; it proves nothing between grid points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .errors import DomainError, UsageError
from .report import format_report


def default_theta_grid(points: int = 41, low: float = 1e-2, high: float = 4.0) -> np.ndarray:
    """Zero plus log-spaced magnitudes in ``[low, high]`` with both signs."""
    if points % 2 == 0:
        raise UsageError("grid size must be odd (it contains zero)")
    half = np.logspace(np.log10(low), np.log10(high), points // 2)
    return np.concatenate([-half[::-1], [0.0], half])


def standard_error(samples) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return math.nan
    return float(samples.std(ddof=1) / math.sqrt(samples.size))


def confidence_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval: ``(mean, z(level) * sd / sqrt(R))``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise UsageError("a confidence interval needs at least two samples")
    if not 0 < level < 1:
        raise UsageError("level must lie in (0, 1)")
    z = stats.norm.ppf(0.5 + level / 2.0)
    return float(samples.mean()), float(z * samples.std(ddof=1) / math.sqrt(samples.size))


@dataclass
class MGFReport:
    theta_grid: np.ndarray
    lhs: np.ndarray
    bound: np.ndarray
    label: str = "mgf"
    extras: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return float(np.min(self.bound - self.lhs))

    @property
    def passed(self) -> bool:
        # roundoff of log-sum-exp near theta = 0
        return self.margin >= -1e-12

    def to_text(self) -> str:
        values = {"margin": self.margin, "passed": self.passed,
                  "grid_points": int(self.theta_grid.size)}
        values.update(self.extras)
        return format_report(values, prefix=self.label)


def _log_mgf(values, probs, theta_grid) -> np.ndarray:
    """``log E exp(theta (X - E X))`` for a finite distribution, stably."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    values, probs = values[keep], probs[keep]
    centred = values - np.dot(probs, values)
    out = logsumexp(np.multiply.outer(theta_grid, centred), b=probs, axis=1)
    out[np.asarray(theta_grid) == 0] = 0.0  # exact value; logsumexp leaves roundoff here
    return out


def _check_distribution(values, probs):
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.shape != probs.shape or values.ndim != 1:
        raise DomainError("values and probabilities must be 1-d arrays of equal length")
    if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-12):
        raise DomainError("probabilities must be nonnegative and sum to one")
    return values, probs


def hoeffding_check(values, probs, theta_grid=None) -> MGFReport:
    """A [0,1]-valued variable is subgaussian of order 1/4: log-MGF <= theta^2 / 8."""
    values, probs = _check_distribution(values, probs)
    if values.min() < 0 or values.max() > 1:
        raise DomainError("support must lie in [0, 1]")
    grid = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    return MGFReport(grid, _log_mgf(values, probs, grid), grid**2 / 8.0, "hoeffding")


def w_values(rho: float) -> tuple[float, float]:
    """Values of ``(eta - rho) / (rho (1 - rho))`` at eta = 0 and eta = 1."""
    v = rho * (1.0 - rho)
    return -rho / v, (1.0 - rho) / v


def w_subgaussian_order(epsilon0: float, size: int, *, literal: bool = False) -> float:
    """Claimed order of ``w(B)`` for ``|B| = size``.

    ``literal=True`` returns ``(2/epsilon0)^(-2|B|)``, which is smaller than
    the variance of ``w`` and therefore cannot hold; the default is the
    reciprocal ``(2/epsilon0)^(2|B|)``, which Hoeffding's lemma does give.
    """
    exponent = -2 * size if literal else 2 * size
    return (2.0 / epsilon0) ** exponent


def w_subgaussian_check(rho: float, size: int, theta_grid=None, epsilon0: float | None = None,
                        *, literal: bool = False) -> MGFReport:
    """Exact MGF of the product ``w(B)`` of ``size`` independent w-variables."""
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    if epsilon0 is None:
        epsilon0 = min(rho, 1.0 - rho)
    if not 0 < epsilon0 <= min(rho, 1.0 - rho):
        raise DomainError("need 0 < epsilon0 <= min(rho, 1 - rho)")
    if size < 1:
        raise DomainError("B must be nonempty")
    grid = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    w0, w1 = w_values(rho)
    vals, probs = [], []
    for bits in itertools.product((0, 1), repeat=size):
        vals.append(math.prod(w1 if b else w0 for b in bits))
        probs.append(math.prod(rho if b else 1.0 - rho for b in bits))
    sigma2 = w_subgaussian_order(epsilon0, size, literal=literal)
    # w(B) is centred exactly, so centring inside _log_mgf only removes roundoff
    return MGFReport(grid, _log_mgf(vals, probs, grid), 0.5 * sigma2 * grid**2,
                     f"w_subgaussian_B{size}",
                     {"rho": rho, "epsilon0": epsilon0, "order": sigma2})


@dataclass
class ProductReport:
    case: str
    value: float
    halfwidth: float
    gamma: float
    bound: float = 3.0
    method: str = "exact"

    @property
    def passed(self) -> bool:
        return self.value + self.halfwidth <= self.bound

    def to_text(self) -> str:
        return format_report({"value": self.value, "halfwidth": self.halfwidth,
                              "gamma": self.gamma, "bound": self.bound,
                              "method": self.method, "passed": self.passed},
                             prefix=f"product_{self.case}")


PRODUCT_CASES = ("zero", "gaussian", "gaussian_same", "two_point", "two_point_same", "uniform")


def subgaussian_product_check(sigma1: float, sigma2: float, gamma: float, case: str = "gaussian",
                              *, monte_carlo: bool = False, samples: int = 10**6,
                              seed: int = 0) -> ProductReport:
    """``E exp(gamma X1 X2) <= 3`` for X_i subgaussian of order sigma_i^2.

    Cases: ``gaussian`` (independent centred normals), ``gaussian_same``
    (perfectly correlated normals), ``two_point`` (independent +-sigma_i),
    ``two_point_same`` (perfectly correlated), ``uniform`` (independent
    U[-sigma_i, sigma_i], Monte Carlo only) and ``zero`` (X1 = 0).
    """
    if sigma1 <= 0 or sigma2 <= 0:
        raise UsageError("orders must be positive")
    limit = 1.0 / (4.0 * sigma1 * sigma2)
    if gamma > limit * (1 + 1e-12):
        raise UsageError(f"gamma={gamma} exceeds the admissible 1/(4 sigma1 sigma2)={limit}")
    if case not in PRODUCT_CASES:
        raise UsageError(f"unknown case {case!r}")
    s = sigma1 * sigma2
    if case == "uniform":
        monte_carlo = True
    if not monte_carlo:
        exact = {
            "zero": 1.0,
            "gaussian": (1.0 - (gamma * s) ** 2) ** -0.5,
            "gaussian_same": (1.0 - 2.0 * gamma * s) ** -0.5,
            "two_point": math.cosh(gamma * s),
            "two_point_same": math.exp(gamma * s),
        }[case]
        return ProductReport(case, exact, 0.0, gamma)

    rng = np.random.default_rng(seed)
    if case == "zero":
        x1 = np.zeros(samples)
        x2 = rng.standard_normal(samples) * sigma2
    elif case == "gaussian":
        x1 = rng.standard_normal(samples) * sigma1
        x2 = rng.standard_normal(samples) * sigma2
    elif case == "gaussian_same":
        z = rng.standard_normal(samples)
        x1, x2 = z * sigma1, z * sigma2
    elif case == "two_point":
        x1 = rng.choice([-1.0, 1.0], samples) * sigma1
        x2 = rng.choice([-1.0, 1.0], samples) * sigma2
    elif case == "two_point_same":
        z = rng.choice([-1.0, 1.0], samples)
        x1, x2 = z * sigma1, z * sigma2
    else:
        x1 = rng.uniform(-sigma1, sigma1, samples)
        x2 = rng.uniform(-sigma2, sigma2, samples)
    vals = np.exp(gamma * x1 * x2)
    mean, half = confidence_interval(vals, 0.99)
    return ProductReport(case, mean, half, gamma, method="monte_carlo")


@dataclass
class MovingAverageFamily:
    """``X_i = sum_j c_j w(i + j mod L)`` over L independent Bernoulli(rho) sites.

    Variables whose windows do not overlap are independent, so the family is
    ``ell``-dependent with ``ell = len(c)``.
    """

    sites: int
    coefficients: np.ndarray
    rho: float = 0.5

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.sites > 16:
            raise UsageError("exact enumeration is limited to 16 sites")
        if self.sites < 2 * self.ell:
            raise UsageError("need at least 2*ell sites for the windows to separate")

    @property
    def ell(self) -> int:
        return self.coefficients.size

    def outcomes(self):
        """All site outcomes with probabilities: ``(w matrix (2^L, L), probs)``."""
        bits = (np.arange(2**self.sites)[:, None] >> np.arange(self.sites)) & 1
        w0, w1 = w_values(self.rho)
        w = np.where(bits == 1, w1, w0)
        ones = bits.sum(axis=1)
        probs = self.rho**ones * (1 - self.rho) ** (self.sites - ones)
        return w, probs

    def variables(self) -> tuple[np.ndarray, np.ndarray]:
        """Values of all X_i on every outcome, shape ``(2^L, L)``, and probabilities."""
        w, probs = self.outcomes()
        X = np.zeros_like(w)
        for j, c in enumerate(self.coefficients):
            X += c * np.roll(w, -j, axis=1)
        return X, probs

    def orders(self) -> np.ndarray:
        """Hoeffding order of each X_i: sum_j c_j^2 (range of w)^2 / 4."""
        w0, w1 = w_values(self.rho)
        return np.full(self.sites, float(np.sum(self.coefficients**2)) * (w1 - w0) ** 2 / 4.0)


def ell_dependent_sum_check(family: MovingAverageFamily, f, theta_grid=None) -> MGFReport:
    """``sum_i f_i X_i`` is subgaussian of order ``2 ell sum_i sigma_i^2 f_i^2``.

    Also certifies each X_i against its own declared order (``extras``).
    """
    f = np.asarray(f, dtype=float)
    if f.size != family.sites:
        raise UsageError("one weight per variable is required")
    grid = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    X, probs = family.variables()
    sig2 = family.orders()
    S = X @ f
    lhs = _log_mgf(S, probs, grid)
    order = 2.0 * family.ell * float(np.sum(sig2 * f**2))
    individual = min(
        float(np.min(0.5 * sig2[i] * grid**2 - _log_mgf(X[:, i], probs, grid)))
        for i in range(family.sites)
    )
    return MGFReport(grid, lhs, 0.5 * order * grid**2, "ell_dependent_sum",
                     {"ell": family.ell, "order": order, "individual_margin": individual})


def relative_entropy_of_density(f, probs) -> float:
    f = np.asarray(f, dtype=float)
    pos = f > 0
    return float(np.sum(probs[pos] * f[pos] * np.log(f[pos])))


def ell_dependent_entropy_check(family: MovingAverageFamily, f, gammas) -> dict:
    """``int sum X_i f dmu <= (2/gamma) {H(f|mu) + (1/ell) sum_i log int e^{gamma ell X_i} dmu}``.

    ``f`` is a density with respect to the product law of the family.
    Returns the smallest margin over ``gammas``.
    """
    X, probs = family.variables()
    f = np.asarray(f, dtype=float)
    if f.shape != probs.shape or np.any(f < 0):
        raise DomainError("f must be a nonnegative vector over the outcomes")
    if not math.isclose(float(np.dot(f, probs)), 1.0, rel_tol=1e-10):
        raise DomainError("f must integrate to one")
    lhs = float(np.dot(probs * f, X.sum(axis=1)))
    H = relative_entropy_of_density(f, probs)
    ell = family.ell
    margins = []
    for g in np.atleast_1d(gammas):
        logs = logsumexp(g * ell * X, b=probs[:, None], axis=0)
        rhs = (2.0 / g) * (H + logs.sum() / ell)
        margins.append(rhs - lhs)
    return {"lhs": lhs, "entropy": H, "margin": float(min(margins)),
            "passed": bool(min(margins) >= -1e-12)}
