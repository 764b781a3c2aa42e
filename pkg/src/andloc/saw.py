"""Exact enumeration of self-avoiding walks on Z^d and fugacity series.

A self-avoiding walk (SAW) of length n is a nearest-neighbor path
(w_0 = 0, w_1, ..., w_n) visiting n+1 distinct lattice points.  This module
counts them exactly and evaluates the generating functions that control the
fractional-moment bounds elsewhere in the package:

    C_gamma(x) = sum_n gamma^n #S_n(x, 0)      (endpoint-resolved correlation)
    chi(gamma) = sum_n gamma^n c_n             (susceptibility)

with c_n the number of length-n SAWs from the origin and #S_n(y, x) the number
ending at y.  Counts are Python integers, so they are exact at any length and
overflow is impossible.

Counting is submultiplicative, c_{m+n} <= c_m * c_n, hence c_n^{1/n} converges
(Fekete) to the connective constant mu_d and every finite c_n^{1/n} is a
rigorous upper bound for mu_d.  The same inequality powers a closed-form bound
on the truncated series tail: with r = N_max, writing n = q*r + s,

    sum_{n>r} gamma^n c_n <= sum_{q>=1} (c_r gamma^r)^q * sum_{s<r} c_s gamma^s
                          = (t / (1 - t)) * P_{r-1},   t = c_r gamma^r,

valid whenever t < 1, i.e. gamma * c_r^{1/r} < 1.  Since #S_n(y, x) <= c_n the
same expression bounds the tail of C_gamma at any point.

The enumerator walks the SAW tree depth first with a backtracking occupancy
set.  Only walks whose first step is +e_1 are generated; the full endpoint
map is recovered by pushing the counts forward through one signed coordinate
permutation per first-step direction (a 2d-fold reduction, exact by lattice
symmetry).  Positions are encoded as single integers in a box of halfwidth
N_max, which a length-N walk cannot leave.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .parallel import map_ordered, resolve_workers

Point = tuple[int, ...]

#: default series length per dimension; beyond this the tree gets expensive
_DEFAULT_MAX_LENGTH = {1: 20, 2: 14, 3: 10}

DEFAULT_MEMORY_BUDGET = 2 << 30  # bytes

_PREFIX_DEPTH = 3  # split depth for parallel enumeration


class BudgetExceededError(Exception):
    """Endpoint map for the requested length does not fit the memory budget."""


def default_max_length(dimension: int) -> int:
    return _DEFAULT_MAX_LENGTH.get(dimension, 8)


def ball_size(dimension: int, radius: int) -> int:
    """Number of points of Z^d with l1 norm <= radius."""
    if radius < 0:
        return 0
    d = dimension
    return sum(
        2**k * math.comb(d, k) * math.comb(radius, k)
        for k in range(0, min(d, radius) + 1)
    )


# --- series container ---


@dataclass
class WalkSeries:
    """Exact SAW counts up to max_length: totals c_n and endpoint counts.

    endpoints maps a lattice point y to the list [#S_0(y,0), ..., #S_N(y,0)].
    Points never hit by a walk of length <= N do not appear.
    """

    dimension: int
    max_length: int
    totals: list[int]
    endpoints: dict[Point, list[int]]

    def endpoint_counts(self, point: Point) -> list[int]:
        return list(self.endpoints.get(tuple(point), [0] * (self.max_length + 1)))

    def to_json_dict(self) -> dict:
        eps = sorted(self.endpoints.items())
        return {
            "dimension": self.dimension,
            "max_length": self.max_length,
            # decimal strings: exact counts outgrow 64-bit JSON integers
            "totals": [str(c) for c in self.totals],
            "endpoints": [
                {"point": list(p), "counts": [str(c) for c in cs]} for p, cs in eps
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "WalkSeries":
        d = int(doc["dimension"])
        n = int(doc["max_length"])
        totals = [int(c) for c in doc["totals"]]
        endpoints = {}
        for entry in doc["endpoints"]:
            p = tuple(int(v) for v in entry["point"])
            if len(p) != d:
                raise ValueError(f"endpoint {p} does not have dimension {d}")
            endpoints[p] = [int(c) for c in entry["counts"]]
        if len(totals) != n + 1:
            raise ValueError("totals length does not match max_length")
        return cls(dimension=d, max_length=n, totals=totals, endpoints=endpoints)

    @classmethod
    def from_json(cls, text: str) -> "WalkSeries":
        return cls.from_json_dict(json.loads(text))


@dataclass
class CorrelationValue:
    """Truncated fugacity series plus a rigorous tail bound.

    partial_sum is exact given exact gamma (Fraction passes through); the tail
    bound is evaluated in floats.  converged is False when
    gamma * c_N^{1/N} >= 1, in which case tail_bound is +inf.
    """

    gamma: float
    point: Optional[Point]
    partial_sum: float
    tail_bound: float
    converged: bool

    @property
    def upper_bound(self) -> float:
        return float(self.partial_sum) + self.tail_bound


# --- enumeration ---


def _group_maps(dimension: int):
    """One signed permutation per unit direction u, mapping +e_1 to u."""
    maps = []
    for i in range(dimension):
        def swap(w, i=i):
            if i == 0:
                return w
            l = list(w)
            l[0], l[i] = l[i], l[0]
            return tuple(l)

        def swapneg(w, i=i):
            l = list(w)
            l[0], l[i] = l[i], l[0]
            l[i] = -l[i]
            return tuple(l)

        maps.append(swap)
        maps.append(swapneg)
    return maps


def _estimate_bytes(dimension: int, max_length: int) -> int:
    # key tuple + count list + integer objects + dict slot, times 1.5 for the
    # first-step intermediate map; deliberately rough
    per_entry = 220 + 8 * dimension + 36 * (max_length + 1)
    return int(1.5 * ball_size(dimension, max_length) * per_entry)


def _dfs_counts(d: int, n_max: int, start: int, start_depth: int,
                visited: set[int], deltas: list[int]) -> list[dict[int, int]]:
    """Counts per depth for SAW continuations of a fixed prefix.

    Returns dicts for depths start_depth+1 .. n_max (indexed from 0).
    """
    counts: list[dict[int, int]] = [dict() for _ in range(n_max - start_depth)]

    def dfs(pos: int, depth: int) -> None:
        nxt = depth + 1
        cn = counts[nxt - start_depth - 1]
        for dp in deltas:
            q = pos + dp
            if q in visited:
                continue
            cn[q] = cn.get(q, 0) + 1
            if nxt < n_max:
                visited.add(q)
                dfs(q, nxt)
                visited.discard(q)

    if start_depth < n_max:
        dfs(start, start_depth)
    return counts


def _suffix_job(args) -> list[dict[int, int]]:
    d, n_max, path = args
    w = 2 * n_max + 1
    strides = [w**i for i in range(d)]
    deltas = [s for t in strides for s in (t, -t)]
    return _dfs_counts(d, n_max, path[-1], len(path) - 1, set(path), deltas)


def _first_step_counts(dimension: int, max_length: int, workers: int):
    """Per-depth {encoded point: count} for walks with first step +e_1."""
    d, n_max = dimension, max_length
    w = 2 * n_max + 1
    strides = [w**i for i in range(d)]
    deltas = [s for t in strides for s in (t, -t)]
    origin = sum(n_max * s for s in strides)
    counts: list[dict[int, int]] = [dict() for _ in range(n_max + 1)]
    counts[0][origin] = 1
    if n_max == 0:
        return counts, origin, strides
    first = origin + strides[0]
    counts[1][first] = 1

    split = min(_PREFIX_DEPTH, n_max)
    if workers <= 1 or n_max <= split:
        visited = {origin, first}
        for i, cn in enumerate(_dfs_counts(d, n_max, first, 1, visited, deltas)):
            counts[2 + i] = cn
        return counts, origin, strides

    # parallel path: enumerate prefixes of depth `split` (counting the prefix
    # nodes once along the way), then farm the suffix subtrees out and merge
    # the partial maps in prefix order.  Counts are exact integers, so the
    # result is identical to the sequential one for any worker count.
    prefixes: list[tuple[int, ...]] = []

    def prefix_dfs(path: list[int], visited: set[int]) -> None:
        depth = len(path) - 1
        if depth == split:
            prefixes.append(tuple(path))
            return
        cn = counts[depth + 1]
        for dp in deltas:
            q = path[-1] + dp
            if q in visited:
                continue
            cn[q] = cn.get(q, 0) + 1
            visited.add(q)
            path.append(q)
            prefix_dfs(path, visited)
            path.pop()
            visited.discard(q)

    prefix_dfs([origin, first], {origin, first})
    prefixes.sort()
    jobs = [(d, n_max, p) for p in prefixes]
    for partial in map_ordered(_suffix_job, jobs, workers):
        for i, cn in enumerate(partial):
            tgt = counts[split + 1 + i]
            for q, c in cn.items():
                tgt[q] = tgt.get(q, 0) + c
    return counts, origin, strides


def enumerate_walks(dimension: int, max_length: Optional[int] = None, *,
                    memory_budget: Optional[int] = DEFAULT_MEMORY_BUDGET,
                    workers: Optional[int] = None) -> WalkSeries:
    """Enumerate all SAWs from the origin up to max_length, exactly.

    Results are deterministic and independent of the worker count.  Raises
    BudgetExceededError when the estimated endpoint-map footprint exceeds
    memory_budget (pass None to disable the check).
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if max_length is None:
        max_length = default_max_length(dimension)
    if max_length < 0:
        raise ValueError("max_length must be >= 0")
    if memory_budget is not None:
        need = _estimate_bytes(dimension, max_length)
        if need > memory_budget:
            raise BudgetExceededError(
                f"endpoint map for d={dimension}, N={max_length} needs about "
                f"{need} bytes, budget is {memory_budget}")

    workers = resolve_workers(workers)
    counts, origin, strides = _first_step_counts(dimension, max_length, workers)

    n_max = max_length
    w = 2 * n_max + 1 if n_max > 0 else 1

    def decode(code: int) -> Point:
        out = []
        for _ in range(dimension):
            code, r = divmod(code, w)
            out.append(r - n_max)
        return tuple(out)

    totals = [1] + [2 * dimension * sum(cn.values()) for cn in counts[1:]]
    zero = (0,) * dimension
    endpoints: dict[Point, list[int]] = {zero: [0] * (n_max + 1)}
    endpoints[zero][0] = 1
    maps = _group_maps(dimension)
    for n in range(1, n_max + 1):
        for code, c in counts[n].items():
            p = decode(code)
            for g in maps:
                y = g(p)
                row = endpoints.get(y)
                if row is None:
                    row = [0] * (n_max + 1)
                    endpoints[y] = row
                row[n] += c
    return WalkSeries(dimension=dimension, max_length=n_max,
                      totals=totals, endpoints=endpoints)


# --- series evaluation ---


def _tail_bound(series: WalkSeries, gamma) -> tuple[float, bool]:
    g = float(gamma)
    if g < 0:
        raise ValueError("gamma must be >= 0")
    if g == 0.0:
        return 0.0, True
    r = series.max_length
    if r < 1:
        return math.inf, False  # nothing to extrapolate from
    c_r = series.totals[r]
    b = math.exp(math.log(c_r) / r)
    if g * b >= 1.0:
        return math.inf, False
    t = c_r * g**r  # == (g*b)^r < 1
    head = sum(float(series.totals[s]) * g**s for s in range(r))
    return (t / (1.0 - t)) * head, True


def _partial(counts: Iterable[int], gamma):
    # duck-typed so Fraction gamma gives an exact rational partial sum
    if isinstance(gamma, Fraction):
        acc = Fraction(0)
    else:
        acc = 0.0
    power = gamma**0
    for c in counts:
        if c:
            acc += power * c
        power = power * gamma
    return acc


def correlation(series: WalkSeries, gamma, point) -> CorrelationValue:
    """Truncated C_gamma(point) with a rigorous tail bound.

    The tail bound is the susceptibility tail (valid since #S_n(y) <= c_n);
    converged=False means gamma * c_N^{1/N} >= 1 and the bound is +inf.
    """
    p = tuple(int(v) for v in point)
    if len(p) != series.dimension:
        raise ValueError(f"point {p} does not have dimension {series.dimension}")
    counts = series.endpoints.get(p, None)
    partial = _partial(counts, gamma) if counts else (0 * gamma if isinstance(gamma, Fraction) else 0.0)
    tail, ok = _tail_bound(series, gamma)
    return CorrelationValue(gamma=gamma, point=p, partial_sum=partial,
                            tail_bound=tail, converged=ok)


def susceptibility(series: WalkSeries, gamma) -> CorrelationValue:
    """Truncated chi(gamma) = sum_n gamma^n c_n with the same tail bound."""
    partial = _partial(series.totals, gamma)
    tail, ok = _tail_bound(series, gamma)
    return CorrelationValue(gamma=gamma, point=None, partial_sum=partial,
                            tail_bound=tail, converged=ok)


@dataclass
class ConnectiveBounds:
    """Rigorous upper bounds on the connective constant mu_d."""

    dimension: int
    pairs: list[tuple[int, float]]  # (n, c_n^{1/n})
    trivial: float                  # 2d - 1, from c_n <= 2d (2d-1)^{n-1}

    @property
    def best(self) -> float:
        return min(b for _, b in self.pairs)


def connective_upper_bounds(series: WalkSeries) -> ConnectiveBounds:
    """All finite-n bounds c_n^{1/n} >= mu_d (Fekete), plus the trivial 2d-1.

    Monotonicity in n is not guaranteed pointwise, only along divisors; the
    largest available n is usually the sharpest.
    """
    if series.max_length < 1:
        raise ValueError("need at least length-1 counts")
    pairs = [
        (n, math.exp(math.log(series.totals[n]) / n))
        for n in range(1, series.max_length + 1)
    ]
    return ConnectiveBounds(dimension=series.dimension, pairs=pairs,
                            trivial=2.0 * series.dimension - 1.0)
