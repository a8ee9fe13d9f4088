"""Exact event-driven simulation of the two-type process with mass killings.

Between killings the population is a continuous-time Markov chain: each normal
cell divides at rate ``lam`` and turns persistent at rate ``a``, each persistent
turns normal at rate ``b``.  At a killing every normal cell dies.  Sampling
the persistent count at successive killings gives the embedded Galton-Watson
process (fixed period) or branching process in random environment
(exponential gaps).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .model import (
    DeterministicPeriod,
    KillingSchedule,
    PersistLabError,
    PoissonIntensity,
    PopulationState,
    Rates,
    Seed,
    apply_kill,
    replicate_rng,
    validate_rates,
)

DEFAULT_CAP = 10**8
# survival campaigns stop a replicate much earlier; see estimate_survival
CAMPAIGN_CAP = 10**4
WILSON_Z = 1.959963984540054


class PopulationCapExceeded(PersistLabError, RuntimeError):
    def __init__(self, state: PopulationState, cap: int):
        super().__init__(f"population passed the cap {cap} at t={state.t:.6g}")
        self.state = state
        self.cap = cap


class UniformStream:
    """Block-buffered uniforms drawn from one generator, consumed in order."""

    def __init__(self, rng: np.random.Generator, block: int = 64, max_block: int = 1 << 20):
        self.rng = rng
        self.block = block
        self.max_block = max_block
        self.buf = rng.random(block)
        self.pos = 0

    def refill(self) -> None:
        self.buf = np.concatenate([self.buf[self.pos :], self.rng.random(self.block)])
        self.pos = 0
        self.block = min(2 * self.block, self.max_block)

    def take(self) -> float:
        if self.pos >= self.buf.shape[0]:
            self.refill()
        u = float(self.buf[self.pos])
        self.pos += 1
        return u


def _as_stream(rng) -> UniformStream:
    return rng if isinstance(rng, UniformStream) else UniformStream(rng)


def run_interval(
    state: PopulationState,
    r: Rates,
    duration: float,
    rng,
    cap: Optional[int] = DEFAULT_CAP,
) -> PopulationState:
    """Evolve ``state`` for ``duration`` time units with no killing.

    ``rng`` is a numpy ``Generator`` or a shared :class:`UniformStream`.
    Raises :class:`PopulationCapExceeded` once ``n1 + n2`` would exceed ``cap``
    (``None`` disables the cap).
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration!r}")
    cap_ = np.iinfo(np.int64).max - 1 if cap is None else int(cap)
    if state.total > cap_:
        raise PopulationCapExceeded(state, cap_)
    stream = _as_stream(rng)
    n1, n2, remaining = state.n1, state.n2, float(duration)
    while True:
        n1, n2, remaining, stream.pos, status = _kernels.gillespie(
            n1, n2, remaining, r.lam, r.a, r.b, cap_, stream.buf, stream.pos
        )
        if status == _kernels.DONE:
            return PopulationState(int(n1), int(n2), state.t + duration)
        if status == _kernels.CAPPED:
            t = state.t + duration - remaining
            raise PopulationCapExceeded(PopulationState(int(n1), int(n2), t), cap_)
        stream.refill()


def sample_offspring(r: Rates, T: float, rng, cap: Optional[int] = DEFAULT_CAP) -> int:
    """One Galton-Watson offspring draw: persistents left at a killing after ``T``
    time units, starting from a single persistent."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T!r}")
    end = run_interval(PopulationState(0, 1), r, T, rng, cap)
    return apply_kill(end).n2


@dataclass
class EpochTrace:
    z: list[int]
    extinct_at: Optional[int] = None
    schedule_draws: list[float] = field(default_factory=list)
    capped: bool = False

    @property
    def alive(self) -> bool:
        return self.capped or (bool(self.z) and self.z[-1] >= 1)


def _next_gap(s: KillingSchedule, stream: UniformStream) -> float:
    if isinstance(s, DeterministicPeriod):
        return s.T
    if isinstance(s, PoissonIntensity):
        return -math.log1p(-stream.take()) / s.delta
    raise TypeError(f"not a killing schedule: {s!r}")


def run_epochs(
    r: Rates,
    s: KillingSchedule,
    init_n2: int,
    max_epochs: int,
    rng,
    cap: Optional[int] = DEFAULT_CAP,
) -> EpochTrace:
    """Persistent counts ``Z_0, Z_1, ...`` right after successive killings.

    The population starts as ``(0, init_n2)`` just after a killing.  The run
    stops at the first zero or after ``max_epochs`` killings; hitting the
    population cap ends it early with ``capped=True``, which counts as survival.
    """
    validate_rates(r, "solver")
    if init_n2 < 1:
        raise ValueError(f"init_n2 must be >= 1, got {init_n2}")
    stream = _as_stream(rng)
    trace = EpochTrace(z=[])
    state = PopulationState(0, int(init_n2))
    for k in range(max_epochs):
        gap = _next_gap(s, stream)
        if isinstance(s, PoissonIntensity):
            trace.schedule_draws.append(gap)
        try:
            state = apply_kill(run_interval(state, r, gap, stream, cap))
        except PopulationCapExceeded:
            trace.capped = True
            return trace
        trace.z.append(state.n2)
        if state.n2 == 0:
            trace.extinct_at = k
            return trace
    return trace


# replicate campaigns


def _chunk_worker(args):
    func, fargs, master, start, stop = args
    return [func(*fargs, replicate_rng(master, i)) for i in range(start, stop)]


def effective_threads(threads: Optional[int] = None) -> int:
    env = os.environ.get("PERSIST_LAB_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(threads or 1))


def map_replicates(func: Callable, fargs: Sequence, reps: int, seed: Seed, threads: int = 1) -> list:
    """``[func(*fargs, rng_i) for i in range(reps)]`` with per-replicate streams.

    Work is split into contiguous index chunks across processes; output order
    is the replicate index, so the result matches the serial run exactly.
    """
    threads = effective_threads(threads)
    if threads <= 1 or reps < 2 * threads:
        return _chunk_worker((func, tuple(fargs), seed.master, 0, reps))
    bounds = np.linspace(0, reps, threads + 1).astype(int)
    jobs = [(func, tuple(fargs), seed.master, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_chunk_worker, jobs))
    return [x for part in parts for x in part]


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))


def _offspring_draw(r, T, cap, rng):
    return sample_offspring(r, T, rng, cap)


def estimate_mean_offspring(
    r: Rates, T: float, reps: int, seed: Seed, threads: int = 1, cap: Optional[int] = DEFAULT_CAP
) -> tuple[float, float]:
    """Sample mean and standard error of ``reps`` offspring draws, i.e. of ``E(Z_1 | Z_0 = 1)``."""
    validate_rates(r, "solver")
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    draws = np.asarray(map_replicates(_offspring_draw, (r, T, cap), reps, seed, threads), dtype=float)
    return _mean_se(draws)


def _free_run(r, init, t, cap, rng):
    end = run_interval(init, r, t, rng, cap)
    return end.n1, end.n2


def simulate_counts(
    r: Rates, t: float, reps: int, seed: Seed, init: PopulationState = PopulationState(0, 1), threads: int = 1
) -> np.ndarray:
    """``(reps, 2)`` array of ``(n1, n2)`` at time ``t`` with no killing."""
    return np.asarray(map_replicates(_free_run, (r, init, t, DEFAULT_CAP), reps, seed, threads), dtype=np.int64)


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    survived: bool
    capped: bool
    epochs_run: int
    extinct_at: Optional[int]
    final_z: int


@dataclass(frozen=True)
class SurvivalEstimate:
    p_hat: float
    stderr: float
    ci95: tuple[float, float]
    reps: int
    epochs: int
    survivors: int
    capped: int
    cap: Optional[int]
    alive_definition: str = "Z_epochs >= 1"


def wilson_interval(successes: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _survival_replicate(r, s, init_n2, max_epochs, cap, rng):
    tr = run_epochs(r, s, init_n2, max_epochs, rng, cap)
    return tr.alive, tr.capped, len(tr.z), tr.extinct_at, (tr.z[-1] if tr.z else init_n2)


def survival_replicates(
    r: Rates,
    s: KillingSchedule,
    reps: int,
    max_epochs: int,
    seed: Seed,
    init_n2: int = 1,
    cap: Optional[int] = CAMPAIGN_CAP,
    threads: int = 1,
) -> list[ReplicateOutcome]:
    rows = map_replicates(_survival_replicate, (r, s, init_n2, max_epochs, cap), reps, seed, threads)
    return [ReplicateOutcome(i, *row) for i, row in enumerate(rows)]


def summarize_survival(
    outcomes: Sequence[ReplicateOutcome], max_epochs: int, cap: Optional[int]
) -> SurvivalEstimate:
    n = len(outcomes)
    k = sum(o.survived for o in outcomes)
    p = k / n
    return SurvivalEstimate(
        p_hat=p,
        stderr=math.sqrt(p * (1 - p) / n),
        ci95=wilson_interval(k, n),
        reps=n,
        epochs=max_epochs,
        survivors=k,
        capped=sum(o.capped for o in outcomes),
        cap=cap,
    )


def estimate_survival(
    r: Rates,
    s: KillingSchedule,
    reps: int,
    max_epochs: int,
    seed: Seed,
    init_n2: int = 1,
    cap: Optional[int] = CAMPAIGN_CAP,
    threads: int = 1,
) -> SurvivalEstimate:
    """Fraction of replicates still alive after ``max_epochs`` killings.

    Survival forever is approximated by survival to a finite depth, which can
    only overstate it.  A replicate whose population passes ``cap`` is counted
    alive at once; the count of such replicates is reported in ``capped``.
    Pass ``cap=None`` to simulate every replicate to the end.
    """
    validate_rates(r, "solver")
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    if max_epochs < 1:
        raise ValueError(f"max_epochs must be >= 1, got {max_epochs}")
    outcomes = survival_replicates(r, s, reps, max_epochs, seed, init_n2, cap, threads)
    return summarize_survival(outcomes, max_epochs, cap)
