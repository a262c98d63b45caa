"""Exact computations over the full configuration space of a tiny lattice.

Configurations are indexed by reading the occupancy as a binary integer
with site 0 as the least significant bit.  Distributions are plain numpy
vectors of length ``2**(n*k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import ConsistencyError, DomainError, ResourceLimitError
from .lattice import Critical, LatticeSpec, TimeScaleRegime, speedup_factor
from .pde import heat_rate, solve_continuous_heat
from .profiles import Profile, discrete_laplacian
from .report import format_report

MATRIX_CAP = 16
PAIR_CAP = 12
ADJOINT_TOL = 1e-9


def _require(spec: LatticeSpec, cap: int = MATRIX_CAP) -> int:
    if spec.size > cap:
        raise ResourceLimitError(f"nk={spec.size} exceeds the exact-enumeration cap {cap}")
    return spec.size


@lru_cache(maxsize=8)
def state_bits(size: int) -> np.ndarray:
    """Occupation table, shape ``(2**size, size)``; row ``s`` is configuration ``s``."""
    if size > MATRIX_CAP:
        raise ResourceLimitError(f"nk={size} exceeds the exact-enumeration cap {MATRIX_CAP}")
    bits = ((np.arange(2**size)[:, None] >> np.arange(size)) & 1).astype(np.uint8)
    bits.flags.writeable = False
    return bits


def swapped_index(size: int, x: int) -> np.ndarray:
    """Index of ``eta^{x,x+1}`` for every configuration (itself when the sites agree)."""
    y = (x + 1) % size
    idx = np.arange(2**size)
    differ = ((idx >> x) ^ (idx >> y)) & 1
    return np.where(differ == 1, idx ^ ((1 << x) | (1 << y)), idx)


def build_generator_matrix(spec: LatticeSpec) -> sparse.csr_matrix:
    """Unaccelerated rate matrix Q (rows: from, columns: to)."""
    size = _require(spec)
    idx = np.arange(2**size)
    rows, cols, vals = [], [], []
    for x, rate in enumerate(spec.conductances()):
        j = swapped_index(size, x)
        moved = j != idx
        rows.append(idx[moved])
        cols.append(j[moved])
        vals.append(np.full(int(moved.sum()), rate))
    Q = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(2**size, 2**size)).tocsr()
    Q.sum_duplicates()
    # correctly rounded exit rates: each row sums to zero up to one ulp
    out_rate = np.array([math.fsum(Q.data[a:b]) for a, b in zip(Q.indptr[:-1], Q.indptr[1:])])
    return (Q - sparse.diags(out_rate)).tocsr()


def check_distribution(mu, size: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (2**size,):
        raise DomainError(f"distribution must have {2**size} entries, got shape {mu.shape}")
    if mu.min() < -1e-15 or abs(mu.sum() - 1.0) > 1e-12:
        raise DomainError("not a probability vector")
    return mu


def evolve_master(spec: LatticeSpec, regime: TimeScaleRegime, mu0, t: float,
                  Q: sparse.csr_matrix | None = None) -> np.ndarray:
    """``mu0 exp(t * speedup * Q)`` via the sparse action of the exponential."""
    size = _require(spec)
    mu0 = check_distribution(mu0, size)
    if t < 0:
        raise DomainError("time must be nonnegative")
    if t == 0:
        return mu0.copy()
    Q = build_generator_matrix(spec) if Q is None else Q
    mu = expm_multiply(Q.T.tocsr() * (t * speedup_factor(spec, regime)), mu0)
    return np.maximum(mu, 0.0)


@dataclass(frozen=True)
class ProductMeasure:
    """Bernoulli product measure with one parameter per site."""

    site_params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.site_params, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("site parameters must be a nonempty vector")
        if np.any(p <= 0) or np.any(p >= 1):
            raise DomainError("site parameters must lie strictly inside (0, 1)")
        object.__setattr__(self, "site_params", p)

    @property
    def size(self) -> int:
        return self.site_params.size

    def log_probabilities(self) -> np.ndarray:
        bits = state_bits(self.size)
        p = self.site_params
        return bits @ np.log(p) + (1 - bits) @ np.log1p(-p)

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probabilities())

    @classmethod
    def uniform(cls, size: int) -> "ProductMeasure":
        return cls(np.full(size, 0.5))

    @classmethod
    def from_boxes(cls, box_params, n: int) -> "ProductMeasure":
        return cls(np.repeat(np.asarray(box_params, dtype=float), n))


def _probabilities(nu) -> np.ndarray:
    return nu.probabilities() if isinstance(nu, ProductMeasure) else np.asarray(nu, dtype=float)


def bond_dirichlet_forms(spec: LatticeSpec, g, nu) -> np.ndarray:
    """``D_{x,x+1}(g; nu) = sum_eta nu(eta) [g(eta^{x,x+1}) - g(eta)]^2`` for each bond."""
    size = _require(spec)
    g = np.asarray(g, dtype=float)
    p = _probabilities(nu)
    return np.array([float(np.dot(p, (g[swapped_index(size, x)] - g) ** 2)) for x in range(size)])


def dirichlet_form(spec: LatticeSpec, g, nu) -> float:
    return float(np.dot(spec.conductances(), bond_dirichlet_forms(spec, g, nu)))


def relative_entropy(mu, nu) -> float:
    """``sum mu log(mu / nu)`` with ``0 log 0 = 0``."""
    mu = np.asarray(mu, dtype=float)
    if isinstance(nu, ProductMeasure):
        log_nu = nu.log_probabilities()
        pos = mu > 0
        return float(np.dot(mu[pos], np.log(mu[pos]) - log_nu[pos]))
    nu = np.asarray(nu, dtype=float)
    pos = mu > 0
    if np.any(nu[pos] <= 0):
        raise DomainError("mu is not absolutely continuous with respect to nu")
    return float(np.dot(mu[pos], np.log(mu[pos] / nu[pos])))


def _box_density(spec: LatticeSpec, gamma: Profile, t: float, alpha: float):
    """Reference box parameters rho_t(i/k) and their exact time derivatives."""
    u = np.arange(spec.k) / spec.k
    if gamma.kappa == 0:
        return gamma(u).astype(float), np.zeros(spec.k)
    field = solve_continuous_heat(gamma, alpha, t)
    rho = gamma(u).astype(float) if t == 0 else np.atleast_1d(field(u))
    return rho, np.atleast_1d(heat_rate(field, alpha)(u))


def reference_measure(spec: LatticeSpec, gamma: Profile, t: float,
                      alpha: float | None = None) -> ProductMeasure:
    """Product measure with parameter rho_t(i/k) on every site of box i."""
    alpha = spec.alpha if alpha is None else alpha
    rho, _ = _box_density(spec, gamma, t, alpha)
    return ProductMeasure.from_boxes(rho, spec.n)


def initial_measure(spec: LatticeSpec, gamma: Profile) -> ProductMeasure:
    """Site-level product measure with parameter gamma(x/nk)."""
    return ProductMeasure(gamma(np.arange(spec.size) / spec.size))


def w_field(spec: LatticeSpec, eta, nu: ProductMeasure) -> np.ndarray:
    """``(eta(x) - rho_x) / (rho_x (1 - rho_x))`` at every site."""
    rho = nu.site_params
    eta = np.asarray(getattr(eta, "occupancy", eta), dtype=float)
    if eta.shape != (spec.size,) or rho.shape != (spec.size,):
        raise DomainError("configuration and measure must match the lattice size")
    return (eta - rho) / (rho * (1.0 - rho))


def w_table(nu: ProductMeasure) -> np.ndarray:
    """w-field of every configuration, shape ``(2**nk, nk)``."""
    rho = nu.site_params
    return (state_bits(nu.size) - rho) / (rho * (1.0 - rho))


def adjoint_one_matrix(spec: LatticeSpec, nu: ProductMeasure, Q=None) -> np.ndarray:
    """``L* 1 = (nu Q) / nu`` straight from the rate matrix."""
    Q = build_generator_matrix(spec) if Q is None else Q
    p = nu.probabilities()
    return (Q.T @ p) / p


def adjoint_one(spec: LatticeSpec, nu: ProductMeasure, *, check: bool = True, Q=None) -> np.ndarray:
    """Adjoint of the generator with respect to ``nu``, applied to the constant 1.

    Evaluated from the w-field expansion (a linear part in ``w`` and a
    nearest-neighbour ``w w`` part).  With ``check`` the result is compared
    against :func:`adjoint_one_matrix`.
    """
    _require(spec)
    rho = nu.site_params
    xi = spec.conductances()
    W = w_table(nu)
    rho_next, rho_prev, xi_prev = np.roll(rho, -1), np.roll(rho, 1), np.roll(xi, 1)
    linear = W @ (xi_prev * (rho_prev - rho) - xi * (rho - rho_next))
    quadratic = (W * np.roll(W, -1, axis=1)) @ (xi * (rho_next - rho) ** 2)
    out = linear - quadratic
    if check:
        direct = adjoint_one_matrix(spec, nu, Q)
        err = float(np.max(np.abs(out - direct)))
        if err > ADJOINT_TOL:
            raise ConsistencyError(f"adjoint formula disagrees with the matrix adjoint by {err:.3g}")
    return out


def log_psi(spec: LatticeSpec, gamma: Profile, t: float, alpha: float | None = None) -> np.ndarray:
    """``log d nu_t / d nu`` with ``nu`` the uniform product measure."""
    nu_t = reference_measure(spec, gamma, t, alpha)
    return nu_t.log_probabilities() + spec.size * math.log(2.0)


def log_psi_derivative(spec: LatticeSpec, gamma: Profile, t: float,
                       alpha: float | None = None) -> np.ndarray:
    """``d/dt log Psi_t = sum_x w_t(x) d/dt rho_t`` with the Fourier time derivative."""
    _require(spec)
    alpha = spec.alpha if alpha is None else alpha
    rho, drho = _box_density(spec, gamma, t, alpha)
    W = w_table(ProductMeasure.from_boxes(rho, spec.n))
    return W @ np.repeat(drho, spec.n)


@dataclass
class YauReport:
    t: float
    dt: float
    lhs: float
    rhs: float
    dirichlet: float
    adjoint_term: float
    psi_term: float
    exact_derivative: float
    slack: float

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.gap <= self.slack

    def to_text(self) -> str:
        return format_report({
            "t": self.t, "dt": self.dt, "lhs": self.lhs, "rhs": self.rhs,
            "gap": self.gap, "slack": self.slack, "dirichlet": self.dirichlet,
            "adjoint_term": self.adjoint_term, "psi_term": self.psi_term,
            "exact_derivative": self.exact_derivative, "passed": self.passed,
        }, prefix="yau")


def yau_inequality_check(spec: LatticeSpec, regime: TimeScaleRegime, gamma: Profile, t: float,
                         dt: float | None = None, *, alpha: float | None = None, mu0=None,
                         slack: float = 1e-4) -> YauReport:
    """Entropy production bound for ``H(mu_t | nu_t)``, certified by finite differences.

    The left side is a central difference of the exact entropy (forward
    when ``t < dt``).  ``exact_derivative`` is the analytic time derivative,
    reported for comparison with the difference quotient.
    """
    _require(spec)
    alpha = spec.alpha if alpha is None else alpha
    speed = speedup_factor(spec, regime)
    dt = 1e-3 / speed if dt is None else dt
    if dt <= 0:
        raise DomainError("dt must be positive")
    Q = build_generator_matrix(spec)
    mu0 = initial_measure(spec, gamma).probabilities() if mu0 is None else mu0

    def H(s):
        return relative_entropy(evolve_master(spec, regime, mu0, s, Q),
                                reference_measure(spec, gamma, s, alpha))

    if t >= dt:
        lhs = (H(t + dt) - H(t - dt)) / (2 * dt)
    else:
        lhs = (H(t + dt) - H(t)) / dt

    mu = evolve_master(spec, regime, mu0, t, Q)
    nu = reference_measure(spec, gamma, t, alpha)
    p = nu.probabilities()
    f = mu / p
    D = dirichlet_form(spec, np.sqrt(f), p)
    adj = adjoint_one(spec, nu, Q=Q)
    psi = log_psi_derivative(spec, gamma, t, alpha)
    adjoint_term = speed * float(np.dot(mu, adj))
    psi_term = float(np.dot(mu, psi))
    rhs = -speed * D + adjoint_term - psi_term

    pos = mu > 0
    flow = speed * (Q.T @ mu)
    exact = float(np.dot(flow[pos], np.log(f[pos]))) - psi_term
    return YauReport(t, dt, lhs, rhs, D, adjoint_term, psi_term, exact, slack)


@dataclass
class EntropyProductionReport:
    left: float
    right: float
    slow: float
    remainder: float
    direct: float
    slow_closed_form: float

    @property
    def residual(self) -> float:
        return abs(self.direct - (self.left + self.right + self.slow + self.remainder))

    @property
    def passed(self) -> bool:
        scale = max(1.0, abs(self.direct))
        return self.residual <= 1e-8 * scale and abs(self.slow - self.slow_closed_form) <= 1e-10 * scale

    def to_text(self) -> str:
        return format_report({
            "left": self.left, "right": self.right, "slow": self.slow,
            "remainder": self.remainder, "direct": self.direct,
            "residual": self.residual, "slow_closed_form": self.slow_closed_form,
            "passed": self.passed,
        }, prefix="entropy_production")


def entropy_production_decomposition(spec: LatticeSpec, gamma: Profile, t: float, *,
                                     mu0=None) -> EntropyProductionReport:
    """Split ``integral {S L*1 - d/dt log Psi} f dnu`` into its box-boundary pieces.

    Critical time scale.  ``left``/``right`` pair the left/right end of each
    box with its interior, ``slow`` is the nearest-neighbour ``w w`` term
    across each slow bond, and ``remainder`` is the discrepancy between the
    continuous and discrete Laplacians of the reference density.
    """
    _require(spec)
    alpha = spec.alpha
    n, k = spec.n, spec.k
    regime = Critical()
    speed = speedup_factor(spec, regime)
    Q = build_generator_matrix(spec)
    mu0 = initial_measure(spec, gamma).probabilities() if mu0 is None else mu0
    mu = evolve_master(spec, regime, mu0, t, Q)
    rho, drho = _box_density(spec, gamma, t, alpha)
    nu = ProductMeasure.from_boxes(rho, n)
    Ew = mu @ w_table(nu)  # E_mu[w(x)] per site
    Ew_box = Ew.reshape(k, n)
    left_diff = np.roll(rho, 1) - rho    # rho((i-1)/k) - rho(i/k)
    right_diff = np.roll(rho, -1) - rho  # rho((i+1)/k) - rho(i/k)
    scale = alpha * k * k
    left = scale * float(np.sum((n * Ew_box[:, 0] - Ew_box.sum(axis=1)) * left_diff))
    right = scale * float(np.sum((n * Ew_box[:, -1] - Ew_box.sum(axis=1)) * right_diff))

    W = w_table(nu)
    starts = np.arange(k) * n
    pair = np.array([float(np.dot(mu, W[:, s - 1] * W[:, s])) for s in starts])
    slow = -alpha * n * k * k * float(np.sum(left_diff**2 * pair))

    # same term from the two-site marginals of mu
    bits = state_bits(spec.size)
    closed = 0.0
    for i, s in enumerate(starts):
        a, b = (s - 1) % spec.size, s
        ra, rb = rho[a // n], rho[b // n]
        for ea in (0, 1):
            for eb in (0, 1):
                m = float(mu[(bits[:, a] == ea) & (bits[:, b] == eb)].sum())
                closed += m * (ea - ra) / (ra * (1 - ra)) * (eb - rb) / (rb * (1 - rb)) * left_diff[i] ** 2
    closed *= -alpha * n * k * k

    lap_gap = drho - alpha * discrete_laplacian(rho)
    remainder = -float(np.dot(Ew, np.repeat(lap_gap, n)))

    adj = adjoint_one(spec, nu, Q=Q)
    psi = W @ np.repeat(drho, n)
    direct = float(np.dot(mu, speed * adj - psi))
    return EntropyProductionReport(left, right, slow, remainder, direct, float(closed))


def kl_bernoulli(p, q) -> np.ndarray:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        b = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    return a + b


@dataclass
class InitialEntropyReport:
    entropy: float
    entropy_sitewise: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.entropy <= self.bound and math.isclose(
            self.entropy, self.entropy_sitewise, rel_tol=1e-9, abs_tol=1e-12)

    def to_text(self) -> str:
        return format_report({"entropy": self.entropy, "entropy_sitewise": self.entropy_sitewise,
                              "bound": self.bound, "passed": self.passed}, prefix="initial_entropy")


def initial_entropy_bound_check(spec: LatticeSpec, gamma: Profile) -> InitialEntropyReport:
    """``H(mu | nu_0) <= nk * kappa / (k * epsilon0)`` for the local-equilibrium start."""
    _require(spec)
    if not gamma.admissible:
        raise DomainError("the bound needs 0 < epsilon0 < 1/2")
    mu = initial_measure(spec, gamma)
    nu0 = reference_measure(spec, gamma, 0.0)
    H = relative_entropy(mu.probabilities(), nu0)
    sitewise = float(kl_bernoulli(mu.site_params, nu0.site_params).sum())
    bound = spec.size * gamma.kappa / (spec.k * gamma.epsilon0)
    return InitialEntropyReport(H, sitewise, bound)


def empirical_distribution(indices, size: int) -> np.ndarray:
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=2**size)
    return counts / counts.sum()


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def detailed_balance_defect(spec: LatticeSpec, nu=None) -> float:
    """``max |nu(a) Q[a,b] - nu(b) Q[b,a]|``; uniform ``nu`` by default."""
    _require(spec, PAIR_CAP)
    Q = build_generator_matrix(spec)
    p = _probabilities(ProductMeasure.uniform(spec.size) if nu is None else nu)
    F = sparse.diags(p) @ Q
    return float(abs(F - F.T).max()) if F.nnz else 0.0
