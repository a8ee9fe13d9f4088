"""Shared domain types: rates, killing schedules, population state and seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Union

import numpy as np


class PersistLabError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveRate(PersistLabError, ValueError):
    def __init__(self, name: str, value: float):
        super().__init__(f"rate {name!r} must be > 0, got {value!r}")
        self.name = name
        self.value = value


class NonFinite(PersistLabError, ValueError):
    def __init__(self, name: str, value: float):
        super().__init__(f"rate {name!r} must be finite, got {value!r}")
        self.name = name
        self.value = value


@dataclass(frozen=True)
class Rates:
    """Birth rate of normal cells and the two switching rates.

    ``lam`` is the birth rate of normal (state-1) bacteria, ``a`` the
    normal -> persistent switch rate and ``b`` the persistent -> normal
    switch rate.
    """

    lam: float
    a: float
    b: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lam, self.a, self.b)


def validate_rates(r: Rates, context: Literal["solver", "analytic"] = "solver") -> Rates:
    """Check the positivity contract for ``context``.

    The ``"analytic"`` context admits ``a == 0`` (closed forms stay defined);
    solvers and simulators need all three rates strictly positive.
    """
    if context not in ("solver", "analytic"):
        raise ValueError(f"unknown validation context {context!r}")
    for name, value in (("lambda", r.lam), ("a", r.a), ("b", r.b)):
        if not math.isfinite(value):
            raise NonFinite(name, value)
    for name, value in (("lambda", r.lam), ("a", r.a), ("b", r.b)):
        if name == "a" and context == "analytic":
            if value < 0:
                raise NonPositiveRate(name, value)
            continue
        if value <= 0:
            raise NonPositiveRate(name, value)
    return r


@dataclass(frozen=True)
class DeterministicPeriod:
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"killing period must be finite and > 0, got {self.T!r}")

    @property
    def label(self) -> str:
        return "deterministic"

    @property
    def param(self) -> float:
        return self.T


@dataclass(frozen=True)
class PoissonIntensity:
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"killing intensity must be finite and > 0, got {self.delta!r}")

    @property
    def label(self) -> str:
        return "poisson"

    @property
    def param(self) -> float:
        return self.delta


KillingSchedule = Union[DeterministicPeriod, PoissonIntensity]


def killing_times(s: KillingSchedule, horizon: float, rng: np.random.Generator | None = None) -> list[float]:
    """Materialize the killing times in ``(0, horizon]``.

    Only meant for diagnostics and the graphical construction; the simulator
    draws inter-kill durations one at a time.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon!r}")
    if isinstance(s, DeterministicPeriod):
        n = int(math.floor(horizon / s.T))
        times = [k * s.T for k in range(1, n + 1)]
        # guard against k*T landing a rounding error past the horizon
        return [t for t in times if t <= horizon]
    if isinstance(s, PoissonIntensity):
        if rng is None:
            raise ValueError("a Poisson schedule needs a random generator")
        out: list[float] = []
        t = 0.0
        # draw gaps in blocks sized to the expected count
        block = max(16, int(s.delta * horizon * 1.1) + 16)
        while True:
            gaps = rng.exponential(1.0 / s.delta, size=block)
            for g in np.cumsum(gaps) + t:
                if g > horizon:
                    return out
                out.append(float(g))
            t = out[-1]
    raise TypeError(f"not a killing schedule: {s!r}")


@dataclass(frozen=True)
class PopulationState:
    n1: int
    n2: int
    t: float = 0.0

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError(f"negative counts: n1={self.n1}, n2={self.n2}")

    @property
    def total(self) -> int:
        return self.n1 + self.n2

    def killed(self) -> "PopulationState":
        return replace(self, n1=0)


def apply_kill(state: PopulationState) -> PopulationState:
    """Mass killing: every normal cell dies, persistents are untouched."""
    return state.killed()


# Seeding

UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class Seed:
    master: int

    def __post_init__(self):
        if not (0 <= int(self.master) <= UINT64_MAX):
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master!r}")

    def replicate(self, i: int) -> np.random.Generator:
        return replicate_rng(self.master, i)


def replicate_rng(master: int, i: int) -> np.random.Generator:
    """Generator for replicate ``i`` of a run seeded with ``master``.

    The mixing function is numpy's ``SeedSequence`` hash of the entropy
    ``master`` together with the spawn key ``(i,)``; it depends on nothing but
    the pair, so any execution order yields the same stream per replicate.
    """
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(i),))
    return np.random.Generator(np.random.PCG64(ss))
