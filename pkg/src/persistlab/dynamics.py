"""Closed-form mean dynamics started from one persistent and no normal cells.

With ``x`` the expected number of normal cells and ``y`` the expected number
of persistents (no killing),

    x' = (lam - a) x + b y,    y' = a x - b y,    x(0) = 0, y(0) = 1,

whose solution is ``y(t) = c1 exp(nu2 t) + c2 exp(nu1 t)`` and
``x(t) = (b / sqrt(disc)) (exp(nu1 t) - exp(nu2 t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PersistLabError, Rates, validate_rates

# exp(nu1 * t) is refused beyond half of the double exponent range
SATURATION_EXPONENT = 0.5 * math.log(np.finfo(float).max)


class DegenerateRate(PersistLabError, ValueError):
    pass


class Underflow(PersistLabError, ArithmeticError):
    pass


class Saturation(PersistLabError, OverflowError):
    def __init__(self, exponent: float):
        super().__init__(
            f"nu1*t = {exponent:.6g} exceeds the saturation exponent {SATURATION_EXPONENT:.6g}"
        )
        self.exponent = exponent


@dataclass(frozen=True)
class SpectralData:
    disc: float
    nu1: float
    nu2: float
    c1: float
    c2: float
    rates: Rates

    @property
    def sqrt_disc(self) -> float:
        return math.sqrt(self.disc)

    @property
    def K(self) -> float:
        """Constant of the exponential envelope ``y'' <= K exp(nu1 t)``."""
        return 2.0 * max(self.c1 * self.nu2**2, self.c2 * self.nu1**2)


def spectral(r: Rates) -> SpectralData:
    """Eigenvalues of the mean matrix and the coefficients of ``y``.

    Every quantity is evaluated without subtractive cancellation, so tiny
    switch rates (``a`` near 1e-6) keep full relative precision in ``c2``
    and ``nu2``.
    """
    validate_rates(r, "analytic")
    lam, a, b = r.lam, r.a, r.b
    s = lam - a - b  # trace
    # disc = s^2 + 4 b lam, as a hypotenuse
    root = math.hypot(s, 2.0 * math.sqrt(b * lam))
    disc = root * root
    prod = -lam * b  # determinant = nu1 * nu2
    if s >= 0:
        nu1 = 0.5 * (s + root)
        nu2 = prod / nu1
    else:
        nu2 = 0.5 * (s - root)
        nu1 = prod / nu2
    # c1 = (root + w) / (2 root), c2 = (root - w) / (2 root), (root+w)(root-w) = 4ab
    w = lam + b - a
    if w >= 0:
        c1 = (root + w) / (2.0 * root)
        c2 = 2.0 * a * b / (root * (root + w))
    else:
        c2 = (root - w) / (2.0 * root)
        c1 = 2.0 * a * b / (root * (root - w))
    return SpectralData(disc=disc, nu1=nu1, nu2=nu2, c1=c1, c2=c2, rates=r)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(~np.isfinite(t)):
        raise ValueError("time must be finite and >= 0")
    return t


def _guard(sd: SpectralData, t: np.ndarray) -> None:
    worst = float(np.max(sd.nu1 * t)) if t.size else 0.0
    if worst > SATURATION_EXPONENT:
        raise Saturation(worst)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def mean_persistent(sd: SpectralData, t):
    """Expected persistent count ``y(t)``; accepts scalars or arrays."""
    t = _check_t(t)
    _guard(sd, t)
    return _out(sd.c1 * np.exp(sd.nu2 * t) + sd.c2 * np.exp(sd.nu1 * t))


def log_mean_persistent(sd: SpectralData, t):
    """``ln y(t)`` evaluated in log space; never overflows."""
    t = _check_t(t)
    with np.errstate(divide="ignore"):
        lc1 = np.log(sd.c1)
        lc2 = np.log(sd.c2)
    return _out(np.logaddexp(lc1 + sd.nu2 * t, lc2 + sd.nu1 * t))


def mean_normal(sd: SpectralData, t):
    """Expected normal count ``x(t)``.

    The textbook form divides by ``a``; the two ratios it contains collapse to
    ``b / sqrt(disc)``, which is what is evaluated here.
    """
    if sd.rates.a == 0:
        raise DegenerateRate("x(t) is only defined here for a > 0")
    t = _check_t(t)
    _guard(sd, t)
    # expm1 keeps small t accurate; past sqrt(disc) t = 1 there is no cancellation
    # and the factored form could overflow while x itself is finite
    st = sd.sqrt_disc * t
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.exp(sd.nu2 * t) * np.expm1(np.minimum(st, 1.0))
        large = np.exp(sd.nu1 * t) - np.exp(sd.nu2 * t)
    return _out(sd.rates.b / sd.sqrt_disc * np.where(st <= 1.0, small, large))


def mean_persistent_deriv(sd: SpectralData, t, order: int = 1):
    t = _check_t(t)
    _guard(sd, t)
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    return _out(
        sd.c1 * sd.nu2**order * np.exp(sd.nu2 * t) + sd.c2 * sd.nu1**order * np.exp(sd.nu1 * t)
    )


def envelope_bounds(sd: SpectralData, t) -> tuple:
    """``(c2 exp(nu1 t), exp(nu1 t))``, which bracket ``y(t)`` from below and above."""
    t = _check_t(t)
    _guard(sd, t)
    upper = np.exp(sd.nu1 * t)
    return _out(sd.c2 * upper), _out(upper)


def argmin_persistent(sd: SpectralData) -> float:
    """Unique minimiser ``t*`` of ``y``, where ``y'`` changes sign.

    Solves ``c1 nu2 exp(nu2 t) + c2 nu1 exp(nu1 t) = 0``; needs ``c2 > 0``.
    """
    if sd.c2 <= 0:
        if sd.rates.a > 0:
            raise Underflow(f"c2 underflows to 0 at a = {sd.rates.a!r}")
        raise DegenerateRate("y is monotone when c2 == 0 (a == 0)")
    return (math.log(-sd.c1 * sd.nu2) - math.log(sd.c2 * sd.nu1)) / sd.sqrt_disc
