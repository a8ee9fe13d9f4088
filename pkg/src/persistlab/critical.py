"""Critical thresholds: the killing period T_c and the killing intensity delta_c.

T_c is the unique positive root of ``y(t) = 1``.  For exponential killing at
rate ``delta`` the embedded branching process in random environment is
classified by

    m'(delta) = E[ln y(T1)] = int_0^inf ln y(u / delta) exp(-u) du,

and delta_c is the point where ``m'`` changes sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import (
    SATURATION_EXPONENT,
    SpectralData,
    argmin_persistent,
    log_mean_persistent,
    mean_persistent,
    spectral,
)
from .model import PersistLabError, Rates, validate_rates

TC_TOL = 1e-10
DELTA_C_TOL = 1e-6


class BracketFailure(PersistLabError, ArithmeticError):
    pass


class QuadratureDivergence(PersistLabError, ArithmeticError):
    pass


class NotBalanced(PersistLabError, ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSettings:
    node_count: int = 32
    refinement_tolerance: float = 1e-12
    max_refinements: int = 5

    def __post_init__(self):
        if self.node_count < 16:
            raise ValueError(f"node_count must be >= 16, got {self.node_count}")
        if not self.refinement_tolerance > 0:
            raise ValueError("refinement_tolerance must be > 0")
        if self.max_refinements < 0:
            raise ValueError("max_refinements must be >= 0")


@dataclass(frozen=True)
class CriticalResult:
    value: float
    bracket: tuple[float, float]
    residual: float
    iterations: int
    anomalies: tuple[str, ...] = field(default=())


def _bisect(f, lo: float, hi: float, f_lo: float, f_hi: float, tol: float, max_iter: int = 400):
    """Bisection keeping ``f(lo) < 0 < f(hi)`` (or the reverse) until ``hi - lo <= tol``."""
    for x, fx in ((lo, f_lo), (hi, f_hi)):
        if fx == 0:
            return float(x), (float(lo), float(hi)), 0.0, 0
    if not (f_lo * f_hi < 0):
        raise BracketFailure(f"no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})")
    it = 0
    while hi - lo > tol:
        if it >= max_iter:
            raise BracketFailure(f"bisection did not reach width {tol} in {max_iter} steps")
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # bracket at float resolution
        f_mid = f(mid)
        it += 1
        if f_mid == 0:
            return float(mid), (float(mid), float(mid)), 0.0, it
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    lo, hi = float(lo), float(hi)
    if abs(f_lo) <= abs(f_hi):
        return lo, (lo, hi), float(abs(f_lo)), it
    return hi, (lo, hi), float(abs(f_hi)), it


# T_c


def find_tc(r: Rates, tol: float = TC_TOL) -> CriticalResult:
    """Critical killing period: the root of ``y(t) = 1`` to the right of the minimum of ``y``.

    The bracket opens at the minimiser ``t*`` (where ``y < 1``) and the upper
    end doubles until ``y > 1``.
    """
    validate_rates(r, "solver")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    sd = spectral(r)
    lo = argmin_persistent(sd)

    # ln y is monotone on [t*, inf) and avoids overflow while searching upward
    def g(t):
        return log_mean_persistent(sd, t)

    g_lo = g(lo)
    if not g_lo < 0:
        raise BracketFailure(f"y(t*) = {math.exp(g_lo)} is not below 1")
    hi = max(2.0 * lo, lo + 1.0 / sd.nu1)
    g_hi = g(hi)
    while g_hi <= 0:
        if sd.nu1 * hi > SATURATION_EXPONENT:
            raise BracketFailure("no crossing of y = 1 below the saturation threshold")
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)

    # bisect on ln y too, so the bracket signs match the ones found above
    value, bracket, _, it = _bisect(g, lo, hi, g_lo, g_hi, tol)
    return CriticalResult(
        value=value, bracket=bracket, residual=abs(mean_persistent(sd, value) - 1.0), iterations=it
    )


def tc_closed_form_balanced(r: Rates, rel_tol: float = 1e-12) -> float:
    """T_c when ``lam == a + b``.

    Then ``nu2 = -nu1`` with ``nu1 = sqrt(b lam)`` and ``y(t) = 1`` is a quadratic
    in ``exp(nu1 t)`` with roots ``1`` and ``c1 / c2``.
    """
    validate_rates(r, "solver")
    if abs(r.lam - r.a - r.b) > rel_tol * r.lam:
        raise NotBalanced(f"lambda = {r.lam} differs from a + b = {r.a + r.b}")
    sl, sb = math.sqrt(r.lam), math.sqrt(r.b)
    return math.log((sl + sb) / (sl - sb)) / math.sqrt(r.b * r.lam)


# m'(delta)


@lru_cache(maxsize=16)
def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.laguerre.laggauss(n)


@lru_cache(maxsize=16)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


# past this u the weight exp(-u) is below 1e-26
U_CUTOFF = 60.0


def _refine(rule, q: QuadratureSettings, what: str):
    n = q.node_count
    prev = rule(n)
    for _ in range(q.max_refinements):
        n *= 2
        cur = rule(n)
        if np.all(np.abs(np.subtract(cur, prev)) <= q.refinement_tolerance * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    raise QuadratureDivergence(
        f"{what}: no convergence to {q.refinement_tolerance} after {q.max_refinements} doublings"
    )


def _layout(sd: SpectralData, delta: float, breaks: tuple[float, ...] = ()):
    """Panel edges in ``u = delta t`` for integrating ``ln y(u/delta) e^{-u}``.

    ``ln y(t) = nu1 t + ln c2 + ln(1 + (c1/c2) e^{-sqrt(disc) t})``: beyond the
    crossover ``t_x = ln(c1/c2)/sqrt(disc)`` plus 40 decay lengths it is linear
    to double precision, so a Laguerre tail from there is exact.  Before that,
    ``ln y`` has complex singularities ``pi/sqrt(disc)`` off the real t-axis,
    hence panels no wider than ``delta/sqrt(disc)`` (and 1, for ``e^{-u}``).
    """
    root = sd.sqrt_disc
    t_x = max(0.0, (math.log(sd.c1) - math.log(sd.c2)) / root)
    u_end = min(delta * (t_x + 40.0 / root), U_CUTOFF)
    u_end = max(u_end, *[b for b in breaks if b < U_CUTOFF], 0.0) if breaks else u_end
    h = min(1.0, delta / root)
    cuts = sorted({0.0, u_end, *[b for b in breaks if 0.0 < b < u_end]})
    edges = [cuts[0]]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        m = max(1, math.ceil((hi - lo) / h))
        edges.extend(np.linspace(lo, hi, m + 1)[1:].tolist())
    return np.asarray(edges), u_end


def _panel_integrals(g, edges: np.ndarray, u_end: float, n: int):
    """Per-panel values of ``int g(u) e^{-u} du`` plus the Laguerre tail from ``u_end``."""
    x, w = _legendre(n)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = mid[:, None] + half[:, None] * x[None, :]
    panels = half * ((g(u) * np.exp(-u)) @ w)
    v, wl = _laguerre(n)
    keep = wl > 0  # trailing weights underflow for large n
    tail = math.exp(-u_end) * float(np.dot(wl[keep], g(u_end + v[keep])))
    return panels, tail


def _m_prime_rule(sd: SpectralData, delta: float, n: int) -> float:
    edges, u_end = _layout(sd, delta)
    panels, tail = _panel_integrals(lambda u: log_mean_persistent(sd, u / delta), edges, u_end, n)
    return float(panels.sum()) + tail


def m_prime(r: Rates, delta: float, q: QuadratureSettings = QuadratureSettings()) -> float:
    """``E[ln y(T1)]`` for ``T1 ~ Exp(delta)``, integrated in ``u = delta t``.

    Node count doubles until two successive rules agree to
    ``q.refinement_tolerance``.
    """
    validate_rates(r, "solver")
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be finite and > 0, got {delta!r}")
    sd = spectral(r)
    return _refine(lambda n: _m_prime_rule(sd, delta, n), q, f"m'({delta})")


def m_prime_envelope(r: Rates, delta: float) -> tuple[float, float]:
    """``(ln c2 + nu1/delta, nu1/delta)``, the bounds implied by ``c2 e^{nu1 t} < y <= e^{nu1 t}``."""
    sd = spectral(r)
    return math.log(sd.c2) + sd.nu1 / delta, sd.nu1 / delta


def m_prime_large_delta_bound(r: Rates, delta: float) -> float:
    """Upper bound ``-b/delta + (2K/delta^2) / (1 - nu1/delta)^3``, valid for ``delta > nu1``."""
    sd = spectral(r)
    if not delta > sd.nu1:
        raise ValueError(f"bound needs delta > nu1 = {sd.nu1}")
    return -r.b / delta + 2.0 * sd.K / delta**2 / (1.0 - sd.nu1 / delta) ** 3


def delta_c_lower_bound(r: Rates) -> float:
    """``-nu1 / ln c2``: below this intensity ``m' > 0`` is guaranteed."""
    validate_rates(r, "solver")
    sd = spectral(r)
    if not 0 < sd.c2 < 1:
        raise BracketFailure(f"c2 = {sd.c2} outside (0, 1)")
    return -sd.nu1 / math.log(sd.c2)


def find_delta_c(
    r: Rates,
    tol: float = DELTA_C_TOL,
    q: QuadratureSettings = QuadratureSettings(),
    scan_points: int = 24,
) -> CriticalResult:
    """Sign change of ``delta -> m'(delta)``.

    The search interval runs from the guaranteed-positive bound ``-nu1/ln c2``
    to the first intensity where the explicit large-delta bound is negative
    (doubled further if ``m'`` is not yet negative there).  A geometric scan of
    that interval picks the first sign change; extra sign changes are reported
    in ``anomalies`` rather than resolved.
    """
    validate_rates(r, "solver")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    sd = spectral(r)

    def mp(d):
        return m_prime(r, d, q)

    lo = delta_c_lower_bound(r)
    hi = max(2.0 * sd.nu1, 2.0 * lo)
    while m_prime_large_delta_bound(r, hi) >= 0:
        hi *= 2.0
        if hi > 1e12:
            raise BracketFailure("large-delta bound never turned negative")
    m_lo, m_hi = mp(lo), mp(hi)
    while m_hi >= 0:
        hi *= 2.0
        if hi > 1e12:
            raise BracketFailure("m' never turned negative")
        m_hi = mp(hi)
    if not m_lo > 0:
        raise BracketFailure(f"m' = {m_lo} is not positive at the lower bound {lo}")

    grid = np.geomspace(lo, hi, scan_points)
    vals = [m_lo] + [mp(d) for d in grid[1:-1]] + [m_hi]
    changes = [i for i in range(len(grid) - 1) if (vals[i] > 0) != (vals[i + 1] > 0)]
    anomalies: tuple[str, ...] = ()
    if len(changes) > 1:
        anomalies = (
            f"m' changes sign {len(changes)} times on [{lo:.6g}, {hi:.6g}]; reporting the smallest",
        )
    i = changes[0]
    value, bracket, residual, it = _bisect(mp, grid[i], grid[i + 1], vals[i], vals[i + 1], tol)
    return CriticalResult(
        value=value, bracket=bracket, residual=residual, iterations=it, anomalies=anomalies
    )


def abs_log_mean(
    r: Rates,
    delta: float,
    q: QuadratureSettings = QuadratureSettings(),
    return_parts: bool = False,
):
    """``E|ln y(T1)|`` for ``T1 ~ Exp(delta)``, split at T_c where ``ln y`` changes sign.

    With ``return_parts`` also returns ``(head, tail)``, the contributions of
    ``T1 < T_c`` and ``T1 > T_c``.
    """
    validate_rates(r, "solver")
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be finite and > 0, got {delta!r}")
    sd = spectral(r)
    b = delta * find_tc(r).value

    def rule(n):
        edges, u_end = _layout(sd, delta, breaks=(b,))
        panels, tail = _panel_integrals(
            lambda u: np.abs(log_mean_persistent(sd, u / delta)), edges, u_end, n
        )
        below = edges[1:] <= b
        head = float(panels[below].sum())
        upper = float(panels[~below].sum()) + (tail if u_end >= b else 0.0)
        return np.array([head, upper])

    head, tail = _refine(rule, q, f"E|ln y| at delta={delta}")
    if return_parts:
        return head + tail, (head, tail)
    return head + tail
