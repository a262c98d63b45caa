import math

import numpy as np
import pytest

from slowbond import _backend, oracle
from slowbond.errors import EventBudgetExceeded, UsageError
from slowbond.lattice import Configuration, Critical, LatticeSpec, Subcritical, speedup_factor
from slowbond.profiles import (constant_profile, constant_test_function, sine_profile,
                               test_function)
from slowbond.simulator import (ReplicaPlan, SimState, box_average_paths, final_configurations,
                                map_replicas, mixing_observable, mixing_statistic,
                                replacement_observable, replacement_statistic, run_until,
                                sample_initial, step, write_box_averages_csv,
                                write_statistics_csv)

TWO_SITE = LatticeSpec(2, 1, alpha=1.0, beta=1.0)


def test_step_two_site_example():
    picks = {0: 0, 1: 0}
    for seed in range(3000):
        state = SimState.seeded(Configuration.from_sequence([1, 0]), seed)
        state, rec = step(state, TWO_SITE)
        assert state.config.occupancy.tolist() == [0, 1]
        assert rec.changed and rec.slow == (rec.edge == 1)
        picks[rec.edge] += 1
    p = picks[0] / 3000
    assert abs(p - 2 / 3) < 4 * math.sqrt(2 / 9 / 3000)


def test_full_configuration_never_changes():
    spec = LatticeSpec(3, 2)
    state = SimState.seeded(Configuration.from_sequence([1] * 6), 1)
    times = []
    for _ in range(100):
        state, rec = step(state, spec)
        assert not rec.changed
        times.append(state.micro_time)
    assert state.config.occupancy.tolist() == [1] * 6
    assert np.all(np.diff(times) > 0)


def test_edge_frequencies_match_rates():
    spec = LatticeSpec(3, 2, alpha=1.0, beta=1.5)
    counts = np.zeros(spec.size)
    state = SimState.seeded(Configuration.from_sequence([1, 0, 1, 0, 0, 1]), 11)
    steps = 1_000_000
    for _ in range(steps):
        state, rec = step(state, spec)
        counts[rec.edge] += 1
    p = spec.conductances() / spec.total_rate
    sigma = np.sqrt(steps * p * (1 - p))
    assert np.all(np.abs(counts - steps * p) <= 4 * sigma)
    assert state.config.particle_count == 3


def test_detailed_balance_transition_counts():
    spec = LatticeSpec(2, 2, alpha=1.0, beta=1.5)
    state = SimState.seeded(Configuration.from_sequence([1, 0, 1, 0]), 5)
    counts = {}
    for _ in range(200_000):
        before = state.config.index()
        state, rec = step(state, spec)
        if rec.changed:
            key = (before, state.config.index())
            counts[key] = counts.get(key, 0) + 1
    for (a, b), nab in counts.items():
        nba = counts.get((b, a), 0)
        assert abs(nab - nba) <= 4 * math.sqrt(nab + nba)


def test_step_matches_kernel_bitwise():
    spec = LatticeSpec(4, 3, alpha=0.5, beta=1.5)
    eta = Configuration.from_sequence([1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0])
    a = SimState.seeded(eta.copy(), 3)
    for _ in range(500):
        step(a, spec)
    b = SimState.seeded(eta.copy(), 3)
    t, ev, _, _, _ = _backend.advance(b.config.occupancy, spec.n, spec.k, spec.slow_rate, 0.0,
                                      math.inf, b.rng.bit_generator, 500)
    assert ev == 500
    assert t == a.micro_time
    assert a.config == b.config


def test_run_until_zero_time_is_identity():
    spec = LatticeSpec(4, 2)
    eta = Configuration.from_sequence([1, 0, 1, 1, 0, 0, 1, 0])
    state = SimState.seeded(eta.copy(), 0)
    run_until(state, spec, Critical(), 0.0)
    assert state.config == eta and state.events == 0


@pytest.mark.parametrize("method", ["gillespie", "uniformized"])
def test_reproducible_and_conservative(method):
    spec = LatticeSpec(8, 3)
    gamma = sine_profile()

    def run(seed):
        rng = ReplicaPlan(1, seed, (0.1,), Critical()).rng(0)
        state = SimState(sample_initial(spec, gamma, rng), 0.0, rng)
        n0 = state.config.particle_count
        run_until(state, spec, Critical(), 0.05, method=method)
        run_until(state, spec, Critical(), 0.1, method=method)
        assert state.config.particle_count == n0
        return state.config.occupancy.tobytes(), state.micro_time, state.events

    assert run(42) == run(42)
    assert run(42) != run(43)


def test_run_until_rejects_going_back():
    spec = LatticeSpec(4, 2)
    state = SimState.seeded(Configuration.from_sequence([1, 0] * 4), 0)
    run_until(state, spec, Critical(), 0.1)
    with pytest.raises(UsageError):
        run_until(state, spec, Critical(), 0.05)


@pytest.mark.parametrize("method", ["gillespie", "uniformized"])
def test_event_budget(method):
    spec = LatticeSpec(8, 2)
    state = SimState.seeded(Configuration.from_sequence([1, 0] * 8), 0)
    with pytest.raises(EventBudgetExceeded) as info:
        run_until(state, spec, Critical(), 1.0, budget=1000, method=method, run_id="r7")
    assert info.value.run_id == "r7" and info.value.budget == 1000


def test_replica_seeds_are_distinct_streams():
    plan = ReplicaPlan(4, 123, (0.1,), Critical())
    draws = {plan.rng(r).random() for r in range(4)}
    assert len(draws) == 4
    assert plan.rng(2).random() == plan.rng(2).random()
    with pytest.raises(UsageError):
        ReplicaPlan(2, 0, (0.2, 0.1), Critical())
    with pytest.raises(UsageError):
        ReplicaPlan(0, 0, (0.1,), Critical())


def test_sample_initial_extremes_and_means():
    spec = LatticeSpec(4, 2)
    rng = np.random.default_rng(0)
    assert sample_initial(spec, constant_profile(1.0), rng).particle_count == 8
    assert sample_initial(spec, constant_profile(0.0), rng).particle_count == 0
    gamma = sine_profile()
    draws = 100_000
    total = np.zeros(spec.size)
    for _ in range(draws):
        total += sample_initial(spec, gamma, rng).occupancy
    p = gamma(np.arange(spec.size) / spec.size)
    assert np.all(np.abs(total / draws - p) <= 4 * np.sqrt(p * (1 - p) / draws))


def test_single_particle_equilibrates():
    reps = 10_000
    hits = 0
    for r in range(reps):
        state = SimState.seeded(Configuration.from_sequence([1, 0]), 99, r)
        run_until(state, TWO_SITE, Critical(), 5.0)
        hits += int(state.config.occupancy[0])
    assert abs(hits / reps - 0.5) <= 3 * math.sqrt(0.25 / reps)


@pytest.mark.parametrize("method", ["gillespie", "uniformized"])
def test_final_law_matches_master_equation(method):
    spec = LatticeSpec(2, 2)
    gamma = sine_profile()
    plan = ReplicaPlan(20_000, 8, (0.05,), Critical())
    idx = final_configurations(plan, spec, gamma, 0.05, method=method)
    mu = oracle.evolve_master(spec, Critical(), oracle.initial_measure(spec, gamma).probabilities(), 0.05)
    emp = oracle.empirical_distribution(idx, spec.size)
    sigma = np.sqrt(mu * (1 - mu) / plan.replicas)
    assert np.all(np.abs(emp - mu) <= 4 * sigma + 1e-12)


def test_long_run_site_occupation_is_uniform_within_sector():
    spec = LatticeSpec(3, 2)
    eta = Configuration.from_sequence([1, 1, 0, 0, 0, 0])
    mu0 = np.zeros(2**spec.size)
    mu0[eta.index()] = 1.0
    mu = oracle.evolve_master(spec, Critical(), mu0, 50.0)
    site_probs = mu @ oracle.state_bits(spec.size)
    assert np.allclose(site_probs, 2 / 6, atol=1e-9)
    reps = 4000
    total = np.zeros(spec.size)
    for r in range(reps):
        state = SimState.seeded(eta.copy(), 17, r)
        run_until(state, spec, Critical(), 50.0, method="uniformized")
        total += state.config.occupancy
    p = 1 / 3
    assert np.all(np.abs(total / reps - p) <= 4 * math.sqrt(p * (1 - p) / reps))


def _integral_by_steps(spec, regime, obs, eta, seed, t):
    """Reference: integrate the observable by explicit stepping."""
    state = SimState.seeded(eta.copy(), seed)
    target = t * speedup_factor(spec, regime)
    total = 0.0
    while True:
        value = obs.value(state.config)
        before = state.micro_time
        saved = state.config.copy()
        state, rec = step(state, spec)
        if state.micro_time >= target:
            total += value * (target - before)
            state.config = saved
            break
        total += value * rec.hold
    return obs.scale * total / speedup_factor(spec, regime), state.config


@pytest.mark.parametrize("which", ["mixing", "replacement"])
def test_path_integral_matches_stepwise_integration(which):
    spec = LatticeSpec(4, 2)
    G = test_function("cos2pi")
    regime = Subcritical(0.5) if which == "mixing" else Critical()
    make = mixing_observable if which == "mixing" else replacement_observable
    eta = Configuration.from_sequence([1, 1, 0, 1, 0, 0, 1, 0])
    expected, final = _integral_by_steps(spec, regime, make(spec, G), eta, 21, 0.02)
    state = SimState.seeded(eta.copy(), 21)
    obs = make(spec, G)
    obs.start(state.config)
    run_until(state, spec, regime, 0.02, observable=obs)
    assert obs.macro(speedup_factor(spec, regime)) == pytest.approx(expected, rel=1e-9, abs=1e-15)
    assert state.config == final


def test_mixing_statistic_vanishes_for_constant_test_function():
    spec = LatticeSpec(8, 2)
    plan = ReplicaPlan(20, 1, (0.05,), Subcritical(0.5))
    est = mixing_statistic(plan, spec, sine_profile(), test_function("one"), 0.05)
    assert np.all(est.samples == 0.0)
    assert mixing_statistic(plan, spec, sine_profile(), test_function("sin2pi"), 0.0).estimate == 0.0


def test_replacement_statistic_trivial_cases():
    spec = LatticeSpec(8, 2)
    plan = ReplicaPlan(10, 1, (0.05,), Critical())
    full = replacement_statistic(plan, spec, constant_profile(1.0), test_function("cos2pi"), 0.05)
    assert np.all(full.samples == 0.0)
    zero = replacement_statistic(plan, spec, sine_profile(), constant_test_function(0.0), 0.05)
    assert np.all(zero.samples == 0.0)


def test_statistics_require_their_regime():
    spec = LatticeSpec(8, 2)
    with pytest.raises(UsageError):
        mixing_statistic(ReplicaPlan(2, 0, (0.1,), Critical()), spec, sine_profile(),
                         test_function("one"), 0.1)
    with pytest.raises(UsageError):
        replacement_statistic(ReplicaPlan(2, 0, (0.1,), Subcritical(0.5)), spec, sine_profile(),
                              test_function("one"), 0.1)


def test_parallel_fanout_is_deterministic():
    spec = LatticeSpec(8, 2)
    plan = ReplicaPlan(6, 4, (0.01, 0.02), Critical())
    serial = box_average_paths(plan, spec, sine_profile(), threads=1)
    threaded = box_average_paths(plan, spec, sine_profile(), threads=3)
    assert np.array_equal(serial, threaded)
    assert map_replicas(lambda r: r * r, 5, threads=2) == [0, 1, 4, 9, 16]


def test_csv_writers(tmp_path):
    paths = np.arange(12, dtype=float).reshape(2, 3, 2) / 12
    write_box_averages_csv(tmp_path / "b.csv", paths, (0.0, 0.1, 0.2))
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "replica,macro_time,box_index,box_average"
    assert len(lines) == 13
    write_statistics_csv(tmp_path / "s.csv", [dict(statistic="mixing", estimate=0.1, stderr=0.01, n=8,
                                                   k=2, regime="critical", seed=1)])
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "statistic,estimate,stderr,n,k,regime,seed"
