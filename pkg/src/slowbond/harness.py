"""Convergence experiments: validation, execution, tabulation and output."""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import diagnostics, oracle
from .diagnostics import standard_error
from .errors import DomainError, UsageError, ValidationError
from .lattice import Critical, LatticeSpec, Subcritical, speedup_factor
from .pde import integrate_against, solve_continuous_heat, solve_discrete_heat
from .profiles import box_average_profile, make_profile, test_function
from .simulator import (DEFAULT_EVENT_BUDGET, ReplicaPlan, box_average_paths,
                        mixing_statistic, replacement_statistic)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("mixing", "frozen", "discrete-heat", "continuous-heat", "replacement",
         "oracle-suite", "appendix-suite")
SIMULATED_KINDS = KINDS[:5]

CSV_HEADER = ["experiment", "name", "n", "k", "alpha", "beta", "theta", "macro_time",
              "observable", "box_or_mode", "simulated", "reference", "abs_error", "stderr", "seed"]


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment.  ``name`` is the experiment kind, ``label`` a free tag.

    ``theta`` selects the subcritical time scale; ``None`` means the critical
    one.  When ``tolerance`` is set, the largest size must satisfy
    ``max error <= tolerance + z * stderr``.
    """

    name: str
    sizes: tuple = ()
    theta: float | None = None
    alpha: float = 1.0
    beta: float = 1.5
    profile: str = "sine"
    profile_params: dict = field(default_factory=dict)
    macro_times: tuple = (0.01, 0.05, 0.1)
    replicas: int = 200
    base_seed: int = 0
    test_functions: tuple = ("sin2pi",)
    event_budget: int = DEFAULT_EVENT_BUDGET
    label: str = ""
    tolerance: float | None = None
    z: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple((int(n), int(k)) for n, k in self.sizes))
        object.__setattr__(self, "macro_times", tuple(float(t) for t in self.macro_times))
        object.__setattr__(self, "test_functions", tuple(self.test_functions))
        object.__setattr__(self, "profile_params", dict(self.profile_params))
        if not self.label:
            object.__setattr__(self, "label", self.name)

    @property
    def regime(self):
        return Critical() if self.theta is None else Subcritical(self.theta)

    @property
    def theta_value(self) -> float:
        """Exponent of the time scale ``k^2 n^(2+theta)``; ``beta - 1`` when critical."""
        return self.beta - 1.0 if self.theta is None else float(self.theta)

    def lattice(self, n: int, k: int) -> LatticeSpec:
        return LatticeSpec(n, k, self.alpha, self.beta)

    def gamma(self):
        return make_profile(self.profile, **self.profile_params)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_toml(cls, path) -> "ExperimentSpec":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


def projected_events(spec: ExperimentSpec, n: int, k: int) -> float:
    """Expected jumps per replica up to the last macro time."""
    lat = spec.lattice(n, k)
    horizon = max(spec.macro_times, default=0.0)
    return horizon * speedup_factor(lat, spec.regime) * lat.total_rate


def validate(spec: ExperimentSpec) -> None:
    """Raise :class:`ValidationError` listing every violated hypothesis."""
    problems = []
    if spec.name not in KINDS:
        raise ValidationError([f"unknown experiment {spec.name!r}; choose from {list(KINDS)}"])
    if not spec.beta > 1:
        problems.append(f"beta={spec.beta}: slow bonds need beta > 1 (standing assumption of all limit theorems)")
    if spec.alpha <= 0:
        problems.append(f"alpha={spec.alpha} must be positive")
    ks = [k for _, k in spec.sizes]
    if spec.name == "frozen":
        if spec.theta is None:
            problems.append("frozen regime needs a subcritical theta")
        elif not spec.theta < spec.beta - 1:
            problems.append(f"theta={spec.theta} violates theta < beta - 1 of the frozen-box theorem "
                            "(theta = beta - 1 is the critical case)")
    if spec.name == "mixing" and (spec.theta is None or spec.theta <= 0):
        problems.append("within-box mixing needs a subcritical time scale with theta > 0")
    if spec.name in ("frozen", "mixing") and spec.theta is not None and spec.theta <= 0:
        problems.append(f"theta={spec.theta} must be positive")
    if spec.name in ("discrete-heat", "replacement", "continuous-heat") and spec.theta is not None:
        problems.append(f"{spec.name} runs on the critical time scale; leave theta unset")
    if spec.name in ("frozen", "discrete-heat") and len(set(ks)) > 1:
        problems.append(f"{spec.name} holds k fixed along sizes (got k={ks}), as in the fixed-k theorems")
    if spec.name == "continuous-heat" and any(b <= a for a, b in zip(ks, ks[1:])):
        problems.append(f"continuous-heat needs k strictly increasing along sizes (got k={ks}), "
                        "as in the growing-k theorem")
    if spec.name in SIMULATED_KINDS:
        if not spec.sizes:
            problems.append("no sizes given")
        if spec.replicas < 1:
            problems.append("replicas must be positive")
        if not spec.macro_times:
            problems.append("no macro times given")
    if list(spec.macro_times) != sorted(spec.macro_times) or any(t < 0 for t in spec.macro_times):
        problems.append("macro_times must be sorted and nonnegative")
    for n, k in spec.sizes:
        if n < 2 or k < 1:
            problems.append(f"size (n={n}, k={k}) invalid: need n >= 2, k >= 1")
        elif spec.name == "oracle-suite" and n * k > oracle.MATRIX_CAP:
            problems.append(f"size (n={n}, k={k}) exceeds the exact-enumeration cap nk <= {oracle.MATRIX_CAP}")
    try:
        gamma = spec.gamma()
        if spec.name in ("oracle-suite", "continuous-heat") and not gamma.admissible:
            problems.append(f"profile {gamma.describe()} must stay inside (epsilon0, 1 - epsilon0) with epsilon0 > 0")
    except (DomainError, UsageError, TypeError) as exc:
        problems.append(f"profile: {exc}")
    for name in spec.test_functions:
        try:
            test_function(name)
        except UsageError as exc:
            problems.append(str(exc))
    if spec.name in SIMULATED_KINDS and not problems:
        for n, k in spec.sizes:
            ev = projected_events(spec, n, k)
            if ev > spec.event_budget:
                problems.append(f"size (n={n}, k={k}): projected {ev:.3g} events per replica "
                                f"exceeds the budget {spec.event_budget}")
    if problems:
        raise ValidationError(problems)


@dataclass(frozen=True)
class Row:
    experiment: str
    name: str
    n: int
    k: int
    alpha: float
    beta: float
    theta: float
    macro_time: float
    observable: str
    box_or_mode: str
    simulated: float
    reference: float
    abs_error: float
    stderr: float
    seed: int


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    assertions: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def select(self, **criteria) -> list:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in criteria.items())]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])

    @classmethod
    def from_csv(cls, path) -> "ConvergenceTable":
        types = {f.name: f.type for f in fields(Row)}
        casts = {"int": int, "float": float, "str": str}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise UsageError(f"unexpected CSV header {reader.fieldnames}")
            rows = [Row(**{k: casts[types[k]](v) for k, v in rec.items()}) for rec in reader]
        return cls(rows)


def _row(spec, n, k, t, observable, mode, simulated, reference, stderr) -> Row:
    return Row(spec.name, spec.label, n, k, float(spec.alpha), float(spec.beta), float(spec.theta_value),
               float(t), observable, str(mode), float(simulated), float(reference),
               abs(float(simulated) - float(reference)), float(stderr), int(spec.base_seed))


def _plan(spec: ExperimentSpec, times=None) -> ReplicaPlan:
    return ReplicaPlan(spec.replicas, spec.base_seed, spec.macro_times if times is None else times,
                       spec.regime)


def _box_rows(spec: ExperimentSpec, threads) -> list:
    gamma = spec.gamma()
    rows = []
    for n, k in spec.sizes:
        lat = spec.lattice(n, k)
        paths = box_average_paths(_plan(spec), lat, gamma, budget=spec.event_budget, threads=threads)
        gbar = box_average_profile(gamma, k)
        for j, t in enumerate(spec.macro_times):
            if spec.name == "frozen":
                ref = gbar
            else:
                ref = solve_discrete_heat(gbar, spec.alpha, k, t)
            for i in range(k):
                vals = paths[:, j, i]
                rows.append(_row(spec, n, k, t, "box_average", i, vals.mean(), ref[i],
                                 standard_error(vals)))
    return rows


def _pairing_rows(spec: ExperimentSpec, threads) -> list:
    gamma = spec.gamma()
    rows = []
    for n, k in spec.sizes:
        lat = spec.lattice(n, k)
        paths = box_average_paths(_plan(spec), lat, gamma, budget=spec.event_budget, threads=threads)
        u = np.arange(k) / k
        for j, t in enumerate(spec.macro_times):
            rho = solve_continuous_heat(gamma, spec.alpha, t)
            for name in spec.test_functions:
                G = test_function(name)
                vals = paths[:, j, :] @ G(u) / k
                rows.append(_row(spec, n, k, t, "pairing", name, vals.mean(),
                                 integrate_against(rho, G), standard_error(vals)))
    return rows


def _statistic_rows(spec: ExperimentSpec, threads) -> list:
    gamma = spec.gamma()
    stat = mixing_statistic if spec.name == "mixing" else replacement_statistic
    rows = []
    for n, k in spec.sizes:
        lat = spec.lattice(n, k)
        for t in spec.macro_times:
            for name in spec.test_functions:
                est = stat(_plan(spec, (t,)), lat, gamma, test_function(name), t,
                           budget=spec.event_budget, threads=threads)
                rows.append(_row(spec, n, k, t, f"{spec.name}_statistic", name,
                                 est.estimate, 0.0, est.stderr))
    return rows


def _check_row(spec, n, k, t, observable, mode, value, bound) -> Row:
    return _row(spec, n, k, t, observable, mode, value, bound, 0.0)


def _oracle_suite(spec: ExperimentSpec):
    gamma = spec.gamma()
    rng = np.random.default_rng(spec.base_seed)
    rows, asserts = [], []
    sub = Subcritical(spec.theta if spec.theta is not None else 0.5)
    for n, k in spec.sizes:
        lat = spec.lattice(n, k)
        if lat.size <= oracle.PAIR_CAP:
            db = oracle.detailed_balance_defect(lat)
            rows.append(_check_row(spec, n, k, 0.0, "detailed_balance_defect", "uniform", db, 0.0))
            asserts.append(Assertion(f"detailed_balance n={n} k={k}", db <= 1e-12, f"{db:.3g}"))
        Q = oracle.build_generator_matrix(lat)
        worst = 0.0
        for _ in range(20):
            nu = oracle.ProductMeasure.from_boxes(rng.uniform(0.05, 0.95, k), n)
            a = oracle.adjoint_one(lat, nu, check=False, Q=Q)
            worst = max(worst, float(np.max(np.abs(a - oracle.adjoint_one_matrix(lat, nu, Q)))))
        rows.append(_check_row(spec, n, k, 0.0, "adjoint_discrepancy", "random20", worst, 0.0))
        asserts.append(Assertion(f"adjoint n={n} k={k}", worst <= oracle.ADJOINT_TOL, f"{worst:.3g}"))
        ie = oracle.initial_entropy_bound_check(lat, gamma)
        rows.append(_check_row(spec, n, k, 0.0, "initial_entropy", "bound", ie.entropy, ie.bound))
        asserts.append(Assertion(f"initial_entropy n={n} k={k}", ie.passed,
                                 f"H={ie.entropy:.4g} bound={ie.bound:.4g}"))
        for t in spec.macro_times:
            for regime in (Critical(), sub):
                y = oracle.yau_inequality_check(lat, regime, gamma, t)
                rows.append(_check_row(spec, n, k, t, "yau_lhs", str(regime), y.lhs, y.rhs))
                asserts.append(Assertion(f"yau n={n} k={k} t={t} {regime}", y.passed,
                                         f"lhs-rhs={y.gap:.3g}"))
            e = oracle.entropy_production_decomposition(lat, gamma, t)
            rows.append(_check_row(spec, n, k, t, "entropy_production_direct", "decomposition",
                                   e.direct, e.left + e.right + e.slow + e.remainder))
            asserts.append(Assertion(f"decomposition n={n} k={k} t={t}", e.passed,
                                     f"residual={e.residual:.3g}"))
    return rows, asserts


def _appendix_suite(spec: ExperimentSpec):
    rng = np.random.default_rng(spec.base_seed)
    rows, asserts = [], []

    def add(name, value, bound, ok, mode=""):
        rows.append(_check_row(spec, 0, 0, 0.0, name, mode, value, bound))
        asserts.append(Assertion(f"{name} {mode}".strip(), bool(ok), f"value={value:.4g} bound={bound:.4g}"))

    worst = math.inf
    for _ in range(50):
        m = int(rng.integers(1, 8))
        rep = diagnostics.hoeffding_check(rng.uniform(0, 1, m), rng.dirichlet(np.ones(m)))
        worst = min(worst, rep.margin)
    add("hoeffding_min_margin", worst, 0.0, worst >= -1e-12, "random50")
    for size in (1, 2, 3):
        for rho in (0.2, 0.5, 0.7):
            rep = diagnostics.w_subgaussian_check(rho, size)
            add("w_subgaussian_margin", rep.margin, 0.0, rep.passed, f"B={size},rho={rho}")
    for case in diagnostics.PRODUCT_CASES:
        if case == "uniform":
            continue
        rep = diagnostics.subgaussian_product_check(1.0, 1.0, 0.25, case)
        add("product_mgf", rep.value, rep.bound, rep.passed, case)
    mc = diagnostics.subgaussian_product_check(1.0, 1.0, 0.25, "uniform", seed=spec.base_seed)
    add("product_mgf", mc.value + mc.halfwidth, mc.bound, mc.passed, "uniform")
    fam = diagnostics.MovingAverageFamily(8, np.full(2, 0.5))
    rep = diagnostics.ell_dependent_sum_check(fam, rng.uniform(-1, 1, 8))
    add("ell_dependent_margin", rep.margin, 0.0, rep.passed and rep.extras["individual_margin"] >= 0,
        "8sites_width2")
    return rows, asserts


def _tolerance_assertions(spec: ExperimentSpec, rows: list) -> list:
    if spec.tolerance is None or not rows:
        return []
    n, k = spec.sizes[-1]
    out = []
    for t in spec.macro_times:
        sel = [r for r in rows if r.n == n and r.k == k and r.macro_time == t]
        worst = max(sel, key=lambda r: r.abs_error)
        limit = spec.tolerance + spec.z * worst.stderr
        out.append(Assertion(f"{spec.name} n={n} k={k} t={t}", worst.abs_error <= limit,
                             f"error={worst.abs_error:.4g} limit={limit:.4g}"))
    return out


def run_experiment(spec: ExperimentSpec, *, threads: int | None = None) -> ConvergenceTable:
    validate(spec)
    if spec.name in ("frozen", "discrete-heat"):
        rows = _box_rows(spec, threads)
    elif spec.name == "continuous-heat":
        rows = _pairing_rows(spec, threads)
    elif spec.name in ("mixing", "replacement"):
        rows = _statistic_rows(spec, threads)
    elif spec.name == "oracle-suite":
        return ConvergenceTable(*_oracle_suite(spec))
    else:
        return ConvergenceTable(*_appendix_suite(spec))
    asserts = [Assertion("finite values", all(math.isfinite(r.simulated) for r in rows))]
    if spec.replicas >= 2:
        asserts.append(Assertion("positive stderr", all(r.stderr > 0 for r in rows)))
    return ConvergenceTable(rows, asserts + _tolerance_assertions(spec, rows))


@dataclass(frozen=True)
class TrendPoint:
    n: int
    k: int
    error: float
    stderr: float


def max_error_by_size(table: ConvergenceTable, macro_time: float, mode: str | None = None) -> list:
    """Largest ``abs_error`` (with its stderr) per size, in table order."""
    out = {}
    for r in table.rows:
        if r.macro_time != macro_time or (mode is not None and r.box_or_mode != mode):
            continue
        key = (r.n, r.k)
        if key not in out or r.abs_error > out[key].error:
            out[key] = TrendPoint(r.n, r.k, r.abs_error, r.stderr)
    return list(out.values())


def monotone_trend(points: list, z: float = 3.0) -> dict:
    """Decrease of the error along sizes, strictly and up to ``z`` standard errors."""
    errs = [p.error for p in points]
    strict = all(b <= a for a, b in zip(errs, errs[1:]))
    noisy = all(b.error <= a.error + z * math.hypot(a.stderr, b.stderr) for a, b in zip(points, points[1:]))
    ends = bool(points) and points[-1].error <= points[0].error + z * math.hypot(points[0].stderr, points[-1].stderr)
    return {"errors": errs, "strict": strict, "within_noise": noisy, "last_vs_first": ends}


def emit(table: ConvergenceTable, path, *, plot: bool = False) -> list:
    """Write the table as CSV at ``path`` and optionally a PNG next to it."""
    if not len(table):
        raise UsageError("refusing to emit an empty table")
    path = Path(path)
    table.to_csv(path)
    written = [path]
    if plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for t in sorted({r.macro_time for r in table.rows}):
            pts = max_error_by_size(table, t)
            ax.loglog([p.n for p in pts], [max(p.error, 1e-16) for p in pts], "o-", label=f"t={t:g}")
        ax.set_xlabel("n")
        ax.set_ylabel("max abs error")
        ax.legend()
        fig.tight_layout()
        png = path.with_suffix(".png")
        fig.savefig(png)
        plt.close(fig)
        written.append(png)
    return written


def with_seed(spec: ExperimentSpec, seed: int | None) -> ExperimentSpec:
    return spec if seed is None else replace(spec, base_seed=int(seed))
