import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowbond.errors import DomainError
from slowbond.lattice import (Configuration, Critical, LatticeSpec, Subcritical, box_index,
                              conductance, generator_apply, speedup_factor, swap)


def configs(max_size=12):
    return st.integers(2, max_size).flatmap(
        lambda s: st.lists(st.integers(0, 1), min_size=s, max_size=s))


def test_conductance_examples():
    spec = LatticeSpec(4, 2, alpha=1.0, beta=2.0)
    assert conductance(spec, 3) == 1 / 16
    assert conductance(spec, 0) == 1.0
    assert conductance(LatticeSpec(2, 1, alpha=2.0, beta=1.5), 1) == pytest.approx(2 * 2**-1.5)
    assert conductance(LatticeSpec(2, 1, alpha=2.0, beta=1.5), 1) == pytest.approx(0.7071, abs=1e-4)


def test_conductance_field_has_k_slow_bonds():
    spec = LatticeSpec(5, 3, alpha=0.7, beta=1.5)
    xi = spec.conductances()
    slow = np.flatnonzero(xi != 1.0)
    assert slow.tolist() == [4, 9, 14]
    assert np.all(xi[slow] == spec.slow_rate)
    assert [conductance(spec, x) for x in range(spec.size)] == xi.tolist()


@pytest.mark.parametrize("x", [-1, 8])
def test_out_of_range_sites(x):
    spec = LatticeSpec(4, 2)
    with pytest.raises(IndexError):
        conductance(spec, x)
    with pytest.raises(IndexError):
        box_index(spec, x)


def test_box_index_examples():
    assert box_index(LatticeSpec(4, 2), 3) == 0
    assert box_index(LatticeSpec(4, 2), 4) == 1
    assert box_index(LatticeSpec(3, 3), 8) == 2


@pytest.mark.parametrize("kwargs", [dict(n=1, k=2), dict(n=2, k=0), dict(n=2, k=1, alpha=0.0),
                                    dict(n=2, k=1, beta=-1.0), dict(n=2, k=1, alpha=math.inf)])
def test_invalid_specs(kwargs):
    with pytest.raises(DomainError):
        LatticeSpec(**kwargs)


def test_beta_at_most_one_accepted_by_model():
    assert LatticeSpec(4, 2, beta=0.5).slow_rate == pytest.approx(0.5)


def test_speedup_examples():
    assert speedup_factor(LatticeSpec(4, 2, beta=2.0), Critical()) == 256
    assert speedup_factor(LatticeSpec(4, 2), Subcritical(1.0)) == 256
    assert speedup_factor(LatticeSpec(10, 3, beta=1.5), Critical()) == pytest.approx(2846.05, abs=0.01)
    with pytest.raises(DomainError):
        Subcritical(0.0)


def test_swap_examples():
    assert swap(Configuration.from_sequence([1, 0, 0, 0]), 0) == Configuration.from_sequence([0, 1, 0, 0])
    assert swap(Configuration.from_sequence([1, 1, 0, 0]), 0) == Configuration.from_sequence([1, 1, 0, 0])
    assert swap(Configuration.from_sequence([0, 0, 0, 1]), 3) == Configuration.from_sequence([1, 0, 0, 0])


def test_swap_does_not_mutate_input():
    eta = Configuration.from_sequence([1, 0, 1])
    swap(eta, 0)
    assert eta.occupancy.tolist() == [1, 0, 1]


@given(configs(), st.data())
def test_swap_involution_and_conservation(occ, data):
    eta = Configuration.from_sequence(occ)
    x = data.draw(st.integers(0, len(occ) - 1))
    once = swap(eta, x)
    assert once.particle_count == eta.particle_count == sum(occ)
    once.check()
    assert swap(once, x) == eta


def test_swap_exhaustive_nk8():
    for bits in itertools.product((0, 1), repeat=8):
        eta = Configuration.from_sequence(bits)
        for x in range(8):
            s = swap(eta, x)
            assert s.particle_count == eta.particle_count
            assert swap(s, x) == eta


def test_configuration_index_roundtrip():
    for i in range(64):
        assert Configuration.from_index(i, 6).index() == i
    assert Configuration.from_sequence([1, 0, 0]).index() == 1
    assert Configuration.from_sequence([0, 0, 1]).index() == 4


def test_configuration_validation():
    with pytest.raises(DomainError):
        Configuration.from_sequence([0, 2])
    with pytest.raises(DomainError):
        Configuration(np.array([1, 0], dtype=np.uint8), particle_count=2)
    eta = Configuration.from_sequence([1, 0])
    eta.occupancy[1] = 1
    with pytest.raises(AssertionError):
        eta.check()


def test_generator_examples():
    spec = LatticeSpec(2, 1, alpha=1.0, beta=1.0)
    eta = Configuration.from_sequence([1, 0])
    assert generator_apply(spec, lambda e: float(e.occupancy[0]), eta) == pytest.approx(-1.5)


@given(st.integers(2, 4), st.integers(1, 3), st.data())
@settings(max_examples=50)
def test_generator_kills_constants_and_particle_count(n, k, data):
    spec = LatticeSpec(n, k)
    occ = data.draw(st.lists(st.integers(0, 1), min_size=spec.size, max_size=spec.size))
    eta = Configuration.from_sequence(occ)
    assert generator_apply(spec, lambda e: 3.7, eta) == 0
    assert generator_apply(spec, lambda e: float(e.particle_count), eta) == 0


@pytest.mark.parametrize("n,k", [(2, 2), (3, 2), (4, 3)])
def test_uniform_measure_is_invariant(n, k):
    """sum_eta L 1_{target}(eta) = 0 under the uniform measure."""
    spec = LatticeSpec(n, k, alpha=0.8, beta=1.5)
    etas = [Configuration.from_index(i, spec.size) for i in range(2**spec.size)]
    for target in (0, 5, 2**spec.size - 3):
        total = sum(generator_apply(spec, lambda e: float(e.index() == target), eta) for eta in etas)
        assert abs(total) < 1e-12
