"""Pure-Python Gillespie event loop (fallback for ``_kernel``).

Same arithmetic, same order of random draws as the compiled version.
"""

import math

import numpy as np


def select_edge(u, n, k, slow_rate):
    """Map a uniform double to ``(x, is_slow)`` with probability xi_x / total."""
    size = n * k
    n_normal = size - k
    slow_total = k * slow_rate
    total = float(n_normal) + slow_total
    r = u * total
    if r < slow_total:
        j = int(r / slow_rate)
        if j >= k:
            j = k - 1
        return (j + 1) * n - 1, True
    j = int(r - slow_total)
    if j >= n_normal:
        j = n_normal - 1
    b = j // (n - 1)
    return b * n + (j - b * (n - 1)), False


def advance(occ, n, k, slow_rate, t, t_end, bit_generator, max_events,
            site_coef=None, box_coef=None, integrand=0.0):
    size = n * k
    n_normal = size - k
    slow_total = k * slow_rate
    total = float(n_normal) + slow_total
    track = site_coef is not None
    if track and (len(site_coef) != size or len(box_coef) != k):
        raise ValueError("coefficient arrays have the wrong length")
    a = site_coef.tolist() if track else None
    bc = box_coef.tolist() if track else None

    draw = np.random.Generator(bit_generator).random
    state = occ.tolist()
    log = math.log
    events = 0
    done = False
    integral = 0.0

    while events < max_events:
        u = draw()
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

        r = draw() * total
        if r < slow_total:
            j = int(r / slow_rate)
            if j >= k:
                j = k - 1
            x = (j + 1) * n - 1
            slow = True
            bx = j
            by = j + 1 if j + 1 < k else 0
        else:
            j = int(r - slow_total)
            if j >= n_normal:
                j = n_normal - 1
            b = j // (n - 1)
            x = b * n + (j - b * (n - 1))
            slow = False
        y = x + 1 if x + 1 < size else 0
        events += 1

        ox, oy = state[x], state[y]
        if ox != oy:
            if track:
                d = oy - ox
                integrand += d * (a[x] - a[y])
                if slow:
                    integrand += d * (bc[bx] - bc[by])
            state[x], state[y] = oy, ox

    if not done and t >= t_end:
        done = True
    occ[:] = state
    return t, events, done, integral, integrand


def advance_count(occ, n, k, slow_rate, n_events, bit_generator):
    draw = np.random.Generator(bit_generator).random
    state = occ.tolist()
    size = n * k
    for _ in range(n_events):
        x, _slow = select_edge(draw(), n, k, slow_rate)
        y = x + 1 if x + 1 < size else 0
        state[x], state[y] = state[y], state[x]
    occ[:] = state
    return n_events
