# cython: language_level=3
"""Compiled Gillespie event loop.

Mirror of ``_pykernel.advance``; both consume exactly the same doubles from
the bit generator in the same order, so trajectories agree bit for bit.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log
from numpy.random cimport bitgen_t


cdef inline Py_ssize_t _normal_site(double r, Py_ssize_t n, Py_ssize_t n_normal,
                                    double inv_nm1) noexcept nogil:
    # normal bond j -> left site; box b = j // (n-1) via a corrected multiply
    cdef Py_ssize_t j = <Py_ssize_t> r
    cdef Py_ssize_t b, o
    if j >= n_normal:
        j = n_normal - 1
    b = <Py_ssize_t> (j * inv_nm1)
    o = j - b * (n - 1)
    if o < 0:
        b -= 1
        o += n - 1
    elif o >= n - 1:
        b += 1
        o -= n - 1
    return b * n + o


def advance(unsigned char[::1] occ, Py_ssize_t n, Py_ssize_t k, double slow_rate,
            double t, double t_end, object bit_generator, long long max_events,
            const double[::1] site_coef=None, const double[::1] box_coef=None,
            double integrand=0.0):
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t size = n * k
    cdef Py_ssize_t n_normal = size - k
    cdef double slow_total = k * slow_rate
    cdef double total = <double> n_normal + slow_total
    cdef bint track = site_coef is not None
    cdef long long events = 0
    cdef bint done = False
    cdef double integral = 0.0
    cdef double u, hold, r
    cdef double inv_nm1 = 1.0 / (n - 1)
    cdef Py_ssize_t j, b, x, y, bx, by
    cdef int d
    cdef bint slow
    cdef unsigned char tmp

    if track and (site_coef.shape[0] != size or box_coef.shape[0] != k):
        raise ValueError("coefficient arrays have the wrong length")

    with bit_generator.lock, nogil:
        while events < max_events:
            u = rng.next_double(rng.state)
            hold = -log(1.0 - u) / total
            if t + hold >= t_end:
                if track:
                    integral += integrand * (t_end - t)
                t = t_end
                done = True
                break
            if track:
                integral += integrand * hold
            t = t + hold

            u = rng.next_double(rng.state)
            r = u * total
            if r < slow_total:
                j = <Py_ssize_t> (r / slow_rate)
                if j >= k:
                    j = k - 1
                x = (j + 1) * n - 1
                slow = True
                bx = j
                by = j + 1
                if by == k:
                    by = 0
            else:
                x = _normal_site(r - slow_total, n, n_normal, inv_nm1)
                slow = False
            y = x + 1
            if y == size:
                y = 0
            events += 1

            if occ[x] != occ[y]:
                if track:
                    d = <int> occ[y] - <int> occ[x]
                    integrand += d * (site_coef[x] - site_coef[y])
                    if slow:
                        integrand += d * (box_coef[bx] - box_coef[by])
                tmp = occ[x]
                occ[x] = occ[y]
                occ[y] = tmp

        if not done and t >= t_end:
            done = True

    return t, events, done, integral, integrand


def advance_count(unsigned char[::1] occ, Py_ssize_t n, Py_ssize_t k, double slow_rate,
                  long long n_events, object bit_generator):
    """Apply ``n_events`` rate-weighted random swaps (uniformized jump chain)."""
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t size = n * k
    cdef Py_ssize_t n_normal = size - k
    cdef double slow_total = k * slow_rate
    cdef double total = <double> n_normal + slow_total
    cdef double inv_nm1 = 1.0 / (n - 1)
    cdef long long i
    cdef double r
    cdef Py_ssize_t j, x, y
    cdef unsigned char tmp

    with bit_generator.lock, nogil:
        for i in range(n_events):
            r = rng.next_double(rng.state) * total
            if r < slow_total:
                j = <Py_ssize_t> (r / slow_rate)
                if j >= k:
                    j = k - 1
                x = (j + 1) * n - 1
            else:
                x = _normal_site(r - slow_total, n, n_normal, inv_nm1)
            y = x + 1
            if y == size:
                y = 0
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
    return n_events
