"""Graphical construction of the persistence process on a random binary tree.

Nodes are words over ``{0, 1}`` (root = empty word).  Node ``v`` lives for an
``Exp(lam)`` time ``S_v`` and then splits into ``v0`` and ``v1``.  Each branch
carries two Poisson mark processes: to-persistent marks at rate ``a`` and
to-normal marks at rate ``b``.  Colour follows the marks (white = normal,
red = persistent).  A red split drops the child ``v1``.  A killing severs every
white branch crossing it together with its subtree.

Killing times at intensity ``delta`` are obtained from those at ``delta_high``
by independent thinning, so the ``delta_high`` tree is a subtree of the
``delta`` tree.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .model import PersistLabError, PoissonIntensity, Rates, Seed, killing_times, validate_rates
from .simulate import UniformStream, map_replicates

NODE_BUDGET = 10**7
# coupled runs stop growing the low-intensity tree at this many nodes
COUPLED_NODE_BUDGET = 1000

INF = math.inf


class NodeBudgetExceeded(PersistLabError, RuntimeError):
    pass


@dataclass(frozen=True)
class SplittingTree:
    """Nodes in breadth-first order: parents always precede children."""

    parent: np.ndarray
    bit: np.ndarray
    birth: np.ndarray
    lifetime: np.ndarray
    horizon: float

    def __len__(self) -> int:
        return self.parent.shape[0]

    @property
    def split_time(self) -> np.ndarray:
        return self.birth + self.lifetime

    def word(self, i: int) -> str:
        out = []
        while i > 0:
            out.append(str(int(self.bit[i])))
            i = int(self.parent[i])
        return "".join(reversed(out))

    @property
    def words(self) -> list[str]:
        return [self.word(i) for i in range(len(self))]

    def alive_count(self, t: float) -> int:
        return int(np.count_nonzero((self.birth <= t) & (t < self.split_time)))


def build_splitting_tree(
    lam: float, horizon: float, rng: np.random.Generator, node_budget: int = NODE_BUDGET
) -> SplittingTree:
    """All nodes of the rate-``lam`` binary splitting tree born by ``horizon``."""
    if not (lam > 0 and horizon > 0):
        raise ValueError("lam and horizon must be > 0")
    parent, bit, birth, life = [np.array([-1])], [np.array([0])], [np.array([0.0])], []
    front_idx = np.array([0])
    front_birth = np.array([0.0])
    n = 1
    while front_idx.size:
        s = rng.exponential(1.0 / lam, size=front_idx.size)
        life.append(s)
        split = front_birth + s
        splitting = split <= horizon
        k = int(np.count_nonzero(splitting))
        if k == 0:
            break
        if n + 2 * k > node_budget:
            raise NodeBudgetExceeded(f"splitting tree exceeds {node_budget} nodes")
        par = np.repeat(front_idx[splitting], 2)
        parent.append(par)
        bit.append(np.tile([0, 1], k))
        front_birth = np.repeat(split[splitting], 2)
        birth.append(front_birth)
        front_idx = np.arange(n, n + 2 * k)
        n += 2 * k
    return SplittingTree(
        parent=np.concatenate(parent),
        bit=np.concatenate(bit).astype(np.int8),
        birth=np.concatenate(birth),
        lifetime=np.concatenate(life),
        horizon=float(horizon),
    )


@dataclass(frozen=True)
class ColoredTree:
    """A splitting tree carrying switch marks and colour segments, after pruning.

    ``segments[i]`` lists ``(start, end, red)`` pieces of node ``i`` over its
    lived interval; ``red_erased`` marks nodes dropped at a red split (or
    under one); ``cut`` holds the killing time that severed a white branch
    (``inf`` if none) and ``present`` whether the node survives all pruning.
    """

    base: SplittingTree
    to_red: tuple
    to_white: tuple
    segments: tuple
    red_erased: np.ndarray
    cut: np.ndarray
    present: np.ndarray

    def end(self, i: int) -> float:
        return min(float(self.base.split_time[i]), self.base.horizon)

    def is_red(self, i: int, t: float) -> bool:
        for t0, t1, red in self.segments[i]:
            if t0 <= t <= t1:
                return red
        raise ValueError(f"time {t} outside node {i}'s lifetime")

    def counts(self, t: float) -> tuple[int, int]:
        """``(white, red)`` branches crossing time ``t``."""
        white = red = 0
        split = self.base.split_time
        for i in np.flatnonzero(self.present):
            if self.base.birth[i] <= t < min(split[i], self.cut[i]):
                if self.is_red(i, t):
                    red += 1
                else:
                    white += 1
        return white, red

    def alive_at_horizon(self) -> bool:
        h = self.base.horizon
        reach = (self.base.split_time > h) & (self.cut == INF) & self.present
        return bool(np.any(reach))


def _segments(t0: float, t1: float, red: bool, times: Sequence[float], kinds: Sequence[bool]):
    segs = []
    start = t0
    for t, k in zip(times, kinds):
        if k != red:
            segs.append((start, t, red))
            start, red = t, k
    segs.append((start, t1, red))
    return segs


def _draw_marks(stream: UniformStream, t0: float, t1: float, a: float, b: float):
    times: list[float] = []
    kinds: list[bool] = []
    rate = a + b
    t = t0
    while True:
        t -= math.log1p(-stream.take()) / rate
        if t >= t1:
            return times, kinds
        times.append(t)
        kinds.append(stream.take() * rate < a)  # True = to-persistent


def color_and_prune(
    tree: SplittingTree,
    a: float,
    b: float,
    initial: Literal["normal", "persistent"] = "persistent",
    rng=None,
) -> ColoredTree:
    """Draw switch marks on every lived branch and drop children of red splits."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be > 0")
    if initial not in ("normal", "persistent"):
        raise ValueError(f"initial must be 'normal' or 'persistent', got {initial!r}")
    stream = rng if isinstance(rng, UniformStream) else UniformStream(rng)
    n = len(tree)
    split = tree.split_time
    h = tree.horizon
    to_red: list = [()] * n
    to_white: list = [()] * n
    segs: list = [()] * n
    erased = np.zeros(n, dtype=bool)
    end_red = np.zeros(n, dtype=bool)
    for i in range(n):
        p = int(tree.parent[i])
        if p < 0:
            red0 = initial == "persistent"
        else:
            if erased[p] or (tree.bit[i] == 1 and end_red[p]):
                erased[i] = True
                continue
            red0 = bool(end_red[p])
        t0 = float(tree.birth[i])
        t1 = min(float(split[i]), h)
        times, kinds = _draw_marks(stream, t0, t1, a, b)
        to_red[i] = tuple(t for t, k in zip(times, kinds) if k)
        to_white[i] = tuple(t for t, k in zip(times, kinds) if not k)
        segs[i] = tuple(_segments(t0, t1, red0, times, kinds))
        end_red[i] = segs[i][-1][2]
    return ColoredTree(
        base=tree,
        to_red=tuple(to_red),
        to_white=tuple(to_white),
        segments=tuple(segs),
        red_erased=erased,
        cut=np.full(n, INF),
        present=~erased,
    )


def _first_white_kill(segs, t0: float, t1: float, kills: Sequence[float]) -> float:
    j = bisect.bisect_right(kills, t0)
    while j < len(kills) and kills[j] <= t1:
        k = kills[j]
        for s0, s1, red in segs:
            if s0 <= k <= s1:
                if not red:
                    return k
                break
        j += 1
    return INF


def apply_killings(ct: ColoredTree, kill_times: Sequence[float]) -> ColoredTree:
    """Sever white branches at each killing time and erase what lies beyond.

    Works from the unkilled colouring in ``ct``, so applying two kill sets to
    the same tree gives two independent views of it.
    """
    kills = [float(k) for k in kill_times if k <= ct.base.horizon]
    if any(k1 <= k0 for k0, k1 in zip(kills, kills[1:])):
        raise ValueError("kill times must be strictly increasing")
    tree = ct.base
    n = len(tree)
    present = ~ct.red_erased
    cut = np.full(n, INF)
    for i in range(n):
        p = int(tree.parent[i])
        if p >= 0 and not (present[p] and cut[p] == INF):
            present[i] = False
        if not present[i]:
            continue
        cut[i] = _first_white_kill(ct.segments[i], float(tree.birth[i]), ct.end(i), kills)
    return replace(ct, cut=cut, present=present)


def decimate(points: Sequence[float], keep_prob: float, rng) -> list[float]:
    """Keep each point independently with probability ``keep_prob``."""
    if not 0 < keep_prob <= 1:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob!r}")
    pts = list(points)
    if any(q <= p for p, q in zip(pts, pts[1:])):
        raise ValueError("points must be strictly increasing")
    if keep_prob == 1:
        return pts
    if isinstance(rng, UniformStream):
        keep = [rng.take() < keep_prob for _ in pts]
    else:
        keep = rng.random(len(pts)) < keep_prob
    return [p for p, k in zip(pts, keep) if k]


@dataclass(frozen=True)
class CoupledOutcome:
    alive_low: bool
    alive_high: bool
    containment_ok: bool
    truncated: bool = False
    truncated_high: bool = False
    nodes: int = 0


def _grow_coupled(
    r: Rates,
    initial_red: bool,
    horizon: float,
    low_kills: list[float],
    high_kills: list[float],
    stream: UniformStream,
    budget: int,
):
    """Materialize the nodes of the low-intensity killed tree, depth first.

    Past ``budget`` nodes only branches that are still present under the
    high-intensity kills are expanded (the low tree is then declared alive).
    If those outgrow another ``budget`` nodes, growth stops and the high tree
    is declared alive too.  Returns the raw node lists plus both truncation flags.
    """
    parent: list[int] = []
    bit: list[int] = []
    birth: list[float] = []
    life: list[float] = []
    to_red: list = []
    to_white: list = []
    segs: list = []
    lam, a, b = r.lam, r.a, r.b
    truncated = high_truncated = False
    high_limit = 0
    # stack entries: (parent index, bit, birth time, red at birth, present under high kills)
    stack = [(-1, 0, 0.0, initial_red, True)]
    while stack:
        p, bt, t0, red0, high_ok = stack.pop()
        if not truncated and len(parent) >= budget:
            truncated = True
            high_limit = len(parent) + budget
        if truncated:
            if not high_ok:
                continue
            if len(parent) >= high_limit:
                high_truncated = True
                break
        s = -math.log1p(-stream.take()) / lam
        t1 = min(t0 + s, horizon)
        times, kinds = _draw_marks(stream, t0, t1, a, b)
        seg = _segments(t0, t1, red0, times, kinds)
        i = len(parent)
        parent.append(p)
        bit.append(bt)
        birth.append(t0)
        life.append(s)
        to_red.append(tuple(t for t, k in zip(times, kinds) if k))
        to_white.append(tuple(t for t, k in zip(times, kinds) if not k))
        segs.append(tuple(seg))
        if t0 + s > horizon:
            continue
        if _first_white_kill(seg, t0, t1, low_kills) < INF:
            continue
        child_high = high_ok and _first_white_kill(seg, t0, t1, high_kills) == INF
        red_end = seg[-1][2]
        if not red_end:
            stack.append((i, 1, t0 + s, red_end, child_high))
        stack.append((i, 0, t0 + s, red_end, child_high))
    return parent, bit, birth, life, to_red, to_white, segs, truncated, high_truncated


def _bfs_tree(parent, bit, birth, life, to_red, to_white, segs, horizon) -> ColoredTree:
    # reorder depth-first output so parents precede children breadth first
    n = len(parent)
    children: list[list[int]] = [[] for _ in range(n)]
    for i in range(1, n):
        children[parent[i]].append(i)
    order = [0]
    for i in order:
        order.extend(sorted(children[i], key=lambda c: bit[c]))
    new = {old: k for k, old in enumerate(order)}
    par = np.array([-1 if parent[o] < 0 else new[parent[o]] for o in order])
    base = SplittingTree(
        parent=par,
        bit=np.array([bit[o] for o in order], dtype=np.int8),
        birth=np.array([birth[o] for o in order]),
        lifetime=np.array([life[o] for o in order]),
        horizon=float(horizon),
    )
    return ColoredTree(
        base=base,
        to_red=tuple(to_red[o] for o in order),
        to_white=tuple(to_white[o] for o in order),
        segments=tuple(segs[o] for o in order),
        red_erased=np.zeros(n, dtype=bool),
        cut=np.full(n, INF),
        present=np.ones(n, dtype=bool),
    )


def contained(sub: ColoredTree, sup: ColoredTree) -> bool:
    """Every edge of ``sub`` is an edge of ``sup``: presence implies presence
    and each branch of ``sub`` ends no later than in ``sup``."""
    if sub.base is not sup.base:
        raise ValueError("trees must share the same base")
    if np.any(sub.present & ~sup.present):
        return False
    both = sub.present & sup.present
    return bool(np.all(sub.cut[both] <= sup.cut[both]))


def coupled_run(
    r: Rates,
    delta: float,
    delta_high: float,
    horizon: float,
    rng,
    initial: Literal["normal", "persistent"] = "persistent",
    node_budget: int = COUPLED_NODE_BUDGET,
) -> CoupledOutcome:
    """One replicate of the thinning coupling between intensities ``delta < delta_high``.

    Kill times at ``delta_high`` are drawn first; keeping each with probability
    ``delta / delta_high`` gives the ``delta`` kill times.  Both kill sets are
    applied to the same coloured tree and the ``delta_high`` tree is checked
    edge by edge to be a subtree of the ``delta`` tree.

    Only the part of the tree alive under the ``delta`` kills is generated.
    If it outgrows ``node_budget`` nodes it is declared alive at the horizon
    (``truncated=True``) and only the ``delta_high`` tree is followed further;
    if that one also outgrows ``node_budget`` more nodes it is declared alive
    as well (``truncated_high=True``).  Containment is checked on every node
    that was generated.
    """
    validate_rates(r, "solver")
    if not 0 < delta < delta_high:
        raise ValueError(f"need 0 < delta < delta_high, got {delta}, {delta_high}")
    gen = rng.rng if isinstance(rng, UniformStream) else rng
    high_kills = killing_times(PoissonIntensity(delta_high), horizon, gen)
    stream = rng if isinstance(rng, UniformStream) else UniformStream(gen)
    low_kills = decimate(high_kills, delta / delta_high, stream)
    *nodes, truncated, truncated_high = _grow_coupled(
        r, initial == "persistent", horizon, low_kills, high_kills, stream, node_budget
    )
    ct = _bfs_tree(*nodes, horizon)
    low = apply_killings(ct, low_kills)
    high = apply_killings(ct, high_kills)
    alive_high = True if truncated_high else high.alive_at_horizon()
    alive_low = True if truncated else low.alive_at_horizon()
    ok = set(low_kills) <= set(high_kills) and contained(high, low)
    return CoupledOutcome(
        alive_low=alive_low,
        alive_high=alive_high,
        containment_ok=ok,
        truncated=truncated,
        truncated_high=truncated_high,
        nodes=len(ct.base),
    )


def _coupled_replicate(r, delta, delta_high, horizon, initial, node_budget, rng):
    return coupled_run(r, delta, delta_high, horizon, rng, initial, node_budget)


def coupling_campaign(
    r: Rates,
    delta: float,
    delta_high: float,
    horizon: float,
    reps: int,
    seed: Seed,
    threads: int = 1,
    node_budget: int = COUPLED_NODE_BUDGET,
    initial: Literal["normal", "persistent"] = "persistent",
) -> list[CoupledOutcome]:
    return map_replicates(
        _coupled_replicate, (r, delta, delta_high, horizon, initial, node_budget), reps, seed, threads
    )
