"""Compiled inner loop of the event-driven simulation."""

import math

from numba import njit

DONE = 0
NEED_UNIFORMS = 1
CAPPED = 2


@njit(cache=True)
def gillespie(n1, n2, remaining, lam, a, b, cap, u, pos):
    """Advance ``(n1, n2)`` through ``remaining`` time units.

    Each event consumes two uniforms from ``u`` starting at ``pos``: the first
    for the waiting time, the second for the event type.  Returns
    ``(n1, n2, remaining, pos, status)``; with ``NEED_UNIFORMS`` the caller
    tops up ``u`` and calls again with the returned state, which is exact
    because no clock had been drawn yet.
    """
    n = u.shape[0]
    while True:
        birth = lam * n1
        out = a * n1
        total = birth + out + b * n2
        if total == 0.0:
            return n1, n2, 0.0, pos, DONE
        if pos + 2 > n:
            return n1, n2, remaining, pos, NEED_UNIFORMS
        dt = -math.log1p(-u[pos]) / total
        pos += 1
        if dt >= remaining:
            return n1, n2, 0.0, pos, DONE
        remaining -= dt
        v = u[pos] * total
        pos += 1
        if v < birth:
            if n1 + n2 + 1 > cap:
                return n1, n2, remaining, pos, CAPPED
            n1 += 1
        elif v < birth + out:
            n1 -= 1
            n2 += 1
        else:
            n2 -= 1
            n1 += 1
