import math
import subprocess
import sys

import numpy as np
import pytest

from slowbond import _backend, _pykernel
from slowbond._pykernel import select_edge
from slowbond.simulator import replica_rng

compiled = _backend.BACKENDS.get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernel not built")


def fresh(seed):
    return replica_rng(seed, 0).bit_generator


def test_select_edge_two_site_example():
    # n=2, k=1, alpha=1, beta=1: total 1.5, slow bond (x=1) has weight 1/2
    assert select_edge(0.0, 2, 1, 0.5) == (1, True)
    assert select_edge(0.3333, 2, 1, 0.5) == (1, True)
    assert select_edge(0.3334, 2, 1, 0.5) == (0, False)
    assert select_edge(0.999999, 2, 1, 0.5) == (0, False)


@pytest.mark.parametrize("n,k", [(2, 1), (3, 2), (5, 4), (7, 3)])
def test_select_edge_covers_every_bond_with_its_weight(n, k):
    slow = 0.3
    size = n * k
    total = size - k + k * slow
    u = (np.arange(200_000) + 0.5) / 200_000
    counts = np.zeros(size)
    for x, _ in map(lambda v: select_edge(v, n, k, slow), u):
        counts[x] += 1
    xi = np.where(np.arange(size) % n == n - 1, slow, 1.0)
    assert np.allclose(counts / u.size, xi / total, atol=2 / u.size * size)


def test_select_edge_flags_slow_bonds():
    for u in np.linspace(0, 0.999, 1000):
        x, slow = select_edge(u, 4, 3, 0.1)
        assert slow == (x % 4 == 3)


def _run(kernel, seed, n, k, slow, coef):
    rng = np.random.default_rng(seed)
    occ = (rng.random(n * k) < 0.5).astype(np.uint8)
    if coef:
        a = rng.standard_normal(n * k)
        b = rng.standard_normal(k)
        v0 = float(occ @ a + occ.reshape(k, n).sum(axis=1) @ b)
        out = kernel.advance(occ, n, k, slow, 0.0, 40.0, fresh(seed), 10**7, a, b, v0)
    else:
        out = kernel.advance(occ, n, k, slow, 0.0, 40.0, fresh(seed), 10**7)
    return out, occ


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("coef", [False, True])
def test_backends_agree_bitwise(seed, coef):
    n, k = 3 + seed, 1 + seed % 3
    slow = 0.7 * n**-1.5
    a, occ_a = _run(compiled, seed, n, k, slow, coef)
    b, occ_b = _run(_pykernel, seed, n, k, slow, coef)
    assert a == b
    assert np.array_equal(occ_a, occ_b)


@needs_compiled
def test_count_kernels_agree_bitwise():
    occ_a = (np.arange(24) % 3 == 0).astype(np.uint8)
    occ_b = occ_a.copy()
    compiled.advance_count(occ_a, 6, 4, 0.05, 5000, fresh(9))
    _pykernel.advance_count(occ_b, 6, 4, 0.05, 5000, fresh(9))
    assert np.array_equal(occ_a, occ_b)
    assert occ_a.sum() == 8


@pytest.mark.parametrize("name", sorted(_backend.BACKENDS))
def test_event_cap_and_crossing(name):
    kernel = _backend.BACKENDS[name]
    occ = np.array([1, 0, 1, 0], dtype=np.uint8)
    t, ev, done, _, _ = kernel.advance(occ, 2, 2, 0.5, 0.0, 1e9, fresh(1), 100)
    assert ev == 100 and not done and t > 0
    t2, ev2, done2, _, _ = kernel.advance(occ, 2, 2, 0.5, t, t + 1e-300, fresh(2), 100)
    assert done2 and t2 == t + 1e-300 and ev2 == 0


@pytest.mark.parametrize("name", sorted(_backend.BACKENDS))
def test_integral_of_constant_observable(name):
    """V = total particle count is constant, so the integral is V * elapsed time."""
    kernel = _backend.BACKENDS[name]
    occ = np.array([1, 1, 0, 1, 0, 0], dtype=np.uint8)
    a = np.ones(6)
    b = np.zeros(2)
    t, _, done, integral, integrand = kernel.advance(occ, 3, 2, 0.2, 0.0, 12.5, fresh(3), 10**6, a, b, 3.0)
    assert done and t == 12.5
    assert integrand == 3.0
    assert integral == pytest.approx(37.5, rel=1e-12)


def test_backend_selection_by_name():
    assert _backend.get("python") is _pykernel
    with pytest.raises(ValueError):
        _backend.get("fortran")
    assert _backend.NAME in _backend.BACKENDS


def test_python_kernel_validates_coefficients():
    occ = np.zeros(4, dtype=np.uint8)
    with pytest.raises(ValueError):
        _pykernel.advance(occ, 2, 2, 0.5, 0.0, 1.0, fresh(0), 10, np.ones(3), np.ones(2), 0.0)


def test_hold_times_are_exponential():
    """Mean Gillespie hold at total rate 1.5."""
    kernel = _backend.get()
    occ = np.array([1, 0], dtype=np.uint8)
    t, ev, _, _, _ = kernel.advance(occ, 2, 1, 0.5, 0.0, 1e12, fresh(5), 200_000)
    mean = t / ev
    assert abs(mean - 1 / 1.5) < 4 * (1 / 1.5) / math.sqrt(ev)


def test_environment_forces_python_backend():
    code = "import slowbond._backend as b; print(b.NAME)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         env={"SLOWBOND_BACKEND": "python", "PATH": ""})
    assert out.stdout.strip() == "python"
