"""Certified order-n transversality.

For a point ``x`` of the base circle, each n-step preimage branch
``w_k = (x + k) / m^n`` carries an image cone ``Df^n(C_u(w_k))``: slopes
within ``W / m^n`` of ``c_n(w_k)``.  Two such open cones meet only in the
zero vector iff their centers are at least ``2 W / m^n`` apart.  The
certifier covers ``[0, 1]`` with subintervals, each carrying a pair of
branches whose centers are separated by more than that over the whole
subinterval, as checked in interval arithmetic.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    SkewProductMap,
    all_branch_centers,
    branch_count,
    branch_slope_center,
    cone_admissibility,
    h_n,
    h_n_deriv,
    slope_center,
)
from .interval import PI, Interval, add_up, sub_down

log = logging.getLogger(__name__)

DEFAULT_MIN_WIDTH = 2.0**-40
DEFAULT_MAX_DEPTH = 48
DEFAULT_MAX_NODES = 100_000
CANDIDATE_PAIRS = 5
# normalized margins closer than this are treated as ties
_TIE_DIGITS = 6


class Status(str, enum.Enum):
    CERTIFIED = "CERTIFIED"
    FAILED = "FAILED"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class SlopeCone:
    """Open slope set ``(center - half_width, center + half_width)``."""

    center: float | Interval
    half_width: float | Interval

    def __post_init__(self):
        hw = self.half_width
        if (hw.lo if isinstance(hw, Interval) else hw) <= 0:
            raise ValueError("half-width must be positive")

    def disjoint_from(self, other: SlopeCone) -> bool:
        """Float test; the cones meet only at the zero vector."""
        c1, c2 = _as_float(self.center), _as_float(other.center)
        return abs(c1 - c2) >= _as_float(self.half_width) + _as_float(other.half_width)


def _as_float(v) -> float:
    return v.mid if isinstance(v, Interval) else float(v)


@dataclass(frozen=True, order=True)
class WitnessPair:
    i: int
    j: int

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ValueError(f"witness pair needs 0 <= i < j, got ({self.i}, {self.j})")

    @classmethod
    def of(cls, a: int, b: int) -> WitnessPair:
        return cls(min(a, b), max(a, b))


@dataclass(frozen=True)
class Leaf:
    x_lo: float
    x_hi: float
    pair: WitnessPair
    margin: float

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError("leaf needs x_lo < x_hi")
        if not self.margin > 0:
            raise ValueError("leaf margin must be positive")


@dataclass
class CertifyStats:
    leaf_count: int = 0
    max_depth: int = 0
    nodes: int = 0
    wall_ms: float = 0.0


@dataclass
class Certificate:
    fmap: SkewProductMap
    half_width: float
    n: int
    threshold: float
    leaves: list[Leaf]
    status: Status
    stats: CertifyStats = field(default_factory=CertifyStats)
    refutation: Optional[Interval] = None
    undecided: list[tuple[float, float]] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.fmap.m

    def witness_pairs(self) -> list[tuple[int, int]]:
        return [(lf.pair.i, lf.pair.j) for lf in self.leaves]

    def structure(self) -> list[tuple[float, float, int, int]]:
        return [(lf.x_lo, lf.x_hi, lf.pair.i, lf.pair.j) for lf in self.leaves]


# ---------------------------------------------------------------------------
# cones and margins
# ---------------------------------------------------------------------------


def threshold_enclosure(fmap: SkewProductMap, half_width: float, n: int) -> Interval:
    """Enclosure of ``2 W / m^n``, the minimal center separation."""
    t = threshold_value(fmap, half_width, n)
    if Fraction(t) * fmap.m**n == 2 * Fraction(half_width):
        return Interval(t)
    return Interval(half_width).scale(2.0) / (fmap.m**n)


def threshold_value(fmap: SkewProductMap, half_width: float, n: int) -> float:
    return 2.0 * half_width / fmap.m**n


def image_cone(fmap: SkewProductMap, half_width: float, w, n: int) -> SlopeCone:
    """``Df^n_w`` applied to the cone ``|slope| < W`` at the point ``w``."""
    cone_admissibility(fmap, half_width)
    if isinstance(w, Interval):
        hw = Interval(half_width) / (fmap.m**n)
    else:
        hw = half_width / fmap.m**n
    return SlopeCone(slope_center(fmap, w, n), hw)


def _margin_from_enclosure(G: Interval, thr: Interval) -> float:
    # lower bound of |g| over the interval, minus the threshold
    return sub_down(G.mig, thr.hi)


def pair_margin(
    fmap: SkewProductMap, half_width: float, x: Interval, pair: WitnessPair, n: int
) -> float:
    """Certified lower bound of ``|c_n(w_i) - c_n(w_j)| - 2W/m^n`` over ``x``.

    A positive value certifies disjoint image cones for every point of
    ``x``.  When the sign of the difference is not determined on ``x`` the
    lower bound of ``|difference|`` is zero and the result is
    ``-threshold``.
    """
    count = branch_count(fmap, n)
    if not pair.j < count:
        raise ValueError(f"pair {pair} out of range for {count} branches")
    if not isinstance(x, Interval):
        x = Interval(x)
    G = branch_slope_center(fmap, x, pair.i, n) - branch_slope_center(fmap, x, pair.j, n)
    return _margin_from_enclosure(G, threshold_enclosure(fmap, half_width, n))


def _normalized(v: float, thr: float) -> float:
    return round(v / thr, _TIE_DIGITS)


def candidate_pairs(
    centers: np.ndarray, threshold: float, limit: int = CANDIDATE_PAIRS
) -> list[WitnessPair]:
    """Branch pairs ordered by float spread, widest first.

    Values are compared after normalizing by the threshold and rounding, so
    the ordering does not change when the map and the cone are scaled
    together.
    """
    q = np.round(centers / threshold, _TIE_DIGITS)
    k = np.arange(len(q))
    top = np.lexsort((k, -q))[:3]
    bottom = np.lexsort((k, q))[:3]
    pairs = set()
    for a in top:
        for b in bottom:
            if a != b:
                pairs.add(WitnessPair.of(int(a), int(b)))
    ranked = sorted(
        pairs, key=lambda p: (-round(abs(q[p.i] - q[p.j]), _TIE_DIGITS), p.i, p.j)
    )
    return ranked[:limit]


def _branch_enclosures(fmap, X: Interval, n: int, indices) -> dict[int, Interval]:
    return {k: branch_slope_center(fmap, X, k, n) for k in indices}


def refutes(fmap: SkewProductMap, X: Interval, n: int, thr: Interval) -> bool:
    """True iff every branch pair is certified to be closer than the threshold on ``X``."""
    lo = math.inf
    hi = -math.inf
    for k in range(branch_count(fmap, n)):
        C = branch_slope_center(fmap, X, k, n)
        lo = min(lo, C.lo)
        hi = max(hi, C.hi)
        if add_up(hi, -lo) >= thr.lo:
            return False
    return True


# ---------------------------------------------------------------------------
# certification by adaptive bisection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Node:
    lo: float
    hi: float
    depth: int


@dataclass(frozen=True)
class _Outcome:
    kind: str  # "leaf", "refuted", "split", "undecided"
    leaf: Optional[Leaf] = None


def _process(fmap, W, n, thr, thr_f, node: _Node, min_width, max_depth, try_refute):
    X = Interval(node.lo, node.hi)
    mid = 0.5 * (node.lo + node.hi)
    centers = all_branch_centers(fmap, mid, n)
    pairs = candidate_pairs(centers, thr_f)
    cache = _branch_enclosures(fmap, X, n, {k for p in pairs for k in (p.i, p.j)})
    best = None
    for p in pairs:
        G = cache[p.i] - cache[p.j]
        margin = _margin_from_enclosure(G, thr)
        if margin > 0:
            key = (-_normalized(margin, thr_f), p.i, p.j)
            if best is None or key < best[0]:
                best = (key, p, margin)
    if best is not None:
        return _Outcome("leaf", Leaf(node.lo, node.hi, best[1], best[2]))
    if try_refute:
        ends = all_branch_centers(fmap, np.array([node.lo, mid, node.hi]), n)
        spreads = ends.max(axis=1) - ends.min(axis=1)
        if np.all(spreads < thr_f) and refutes(fmap, X, n, thr):
            return _Outcome("refuted")
    if node.depth >= max_depth or (node.hi - node.lo) / 2 < min_width:
        return _Outcome("undecided")
    return _Outcome("split")


def certify(
    fmap: SkewProductMap,
    half_width: float | str,
    n: int,
    *,
    min_width: float = DEFAULT_MIN_WIDTH,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_nodes: int = DEFAULT_MAX_NODES,
    refute_on_failure: bool = True,
    workers: int = 1,
) -> Certificate:
    """Certify order-``n`` transversality for the constant cone of half-width ``W``.

    Subintervals are processed breadth first, one depth level at a time, so
    the result does not depend on how a level is scheduled across workers.
    FAILED is only reported together with a rigorous refutation; running
    out of depth or nodes gives UNDECIDED.
    """
    t0 = time.perf_counter()
    W = cone_admissibility(fmap, half_width).half_width
    if n < 1:
        raise ValueError("n must be >= 1")
    branch_count(fmap, n)
    thr = threshold_enclosure(fmap, W, n)
    thr_f = threshold_value(fmap, W, n)

    stats = CertifyStats()
    leaves: list[Leaf] = []
    undecided: list[tuple[float, float]] = []
    refuted: Optional[Interval] = None
    level = [_Node(0.0, 1.0, 0)]
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while level:
            stats.nodes += len(level)
            stats.max_depth = max(stats.max_depth, level[0].depth)
            args = (fmap, W, n, thr, thr_f)

            def run(node, args=args):
                return _process(*args, node, min_width, max_depth, refute_on_failure)

            outcomes = list(pool.map(run, level)) if pool else [run(nd) for nd in level]
            nxt = []
            for node, out in zip(level, outcomes):
                if out.kind == "leaf":
                    leaves.append(out.leaf)
                elif out.kind == "refuted":
                    if refuted is None:
                        refuted = Interval(node.lo, node.hi)
                elif out.kind == "undecided":
                    undecided.append((node.lo, node.hi))
                else:
                    mid = 0.5 * (node.lo + node.hi)
                    nxt += [_Node(node.lo, mid, node.depth + 1), _Node(mid, node.hi, node.depth + 1)]
            if refuted is not None:
                break
            if stats.nodes + len(nxt) > max_nodes:
                undecided.extend((nd.lo, nd.hi) for nd in nxt)
                break
            level = nxt
    finally:
        if pool:
            pool.shutdown()

    leaves.sort(key=lambda lf: lf.x_lo)
    undecided.sort()
    if refuted is not None:
        status = Status.FAILED
    elif undecided:
        status = Status.UNDECIDED
        if refute_on_failure:
            found = refute(fmap, W, n, regions=undecided)
            if found is not None:
                status, refuted = Status.FAILED, found
    else:
        status = Status.CERTIFIED
    stats.leaf_count = len(leaves)
    stats.wall_ms = 1000.0 * (time.perf_counter() - t0)
    log.info("n=%d W=%r: %s with %d leaves", n, W, status.value, len(leaves))
    return Certificate(
        fmap=fmap,
        half_width=W,
        n=n,
        threshold=thr_f,
        leaves=leaves,
        status=status,
        stats=stats,
        refutation=refuted,
        undecided=undecided,
    )


# ---------------------------------------------------------------------------
# refutation
# ---------------------------------------------------------------------------


def max_spread(fmap: SkewProductMap, x, n: int) -> np.ndarray | float:
    """Float value of ``max_k c_n(w_k) - min_k c_n(w_k)`` at ``x``."""
    c = all_branch_centers(fmap, x, n)
    out = c.max(axis=-1) - c.min(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def refute(
    fmap: SkewProductMap,
    half_width: float | str,
    n: int,
    regions: Sequence[tuple[float, float]] = ((0.0, 1.0),),
    grid: int | None = None,
    tries: int = 8,
) -> Optional[Interval]:
    """Find a thin interval of ``x`` on which no branch pair is transverse.

    A float grid scan proposes the points of smallest spread; each is then
    confirmed rigorously on shrinking neighbourhoods.  Returns ``None``
    when nothing confirms.
    """
    W = cone_admissibility(fmap, half_width).half_width
    thr = threshold_enclosure(fmap, W, n)
    count = branch_count(fmap, n)
    if grid is None:
        grid = int(min(4096, max(16, 2**22 // count)))
    pts = []
    for lo, hi in regions:
        pts.append(np.linspace(lo, hi, max(2, int(grid * (hi - lo)) + 2)))
    xs = np.unique(np.concatenate(pts))
    spreads = np.empty(len(xs))
    chunk = max(1, 2**22 // count)
    for s in range(0, len(xs), chunk):
        spreads[s : s + chunk] = max_spread(fmap, xs[s : s + chunk], n)
    order = np.lexsort((xs, spreads))
    for idx in order[:tries]:
        if spreads[idx] >= thr.lo:
            break
        x0 = float(xs[idx])
        for delta in (1e-6, 1e-9, 1e-12, 0.0):
            X = Interval(max(0.0, x0 - delta), min(1.0, x0 + delta))
            if refutes(fmap, X, n, thr):
                return X
    return None


# ---------------------------------------------------------------------------
# order search and the explicit pair family
# ---------------------------------------------------------------------------


@dataclass
class OrderResult:
    n: int
    status: Status
    certificate: Certificate


@dataclass
class OrderTable:
    half_width: float
    rows: list[OrderResult]

    @property
    def minimal_certified(self) -> Optional[int]:
        return next((r.n for r in self.rows if r.status is Status.CERTIFIED), None)

    def statuses(self) -> dict[int, Status]:
        return {r.n: r.status for r in self.rows}


def min_order(fmap: SkewProductMap, half_width: float | str, n_max: int, **opts) -> OrderTable:
    """Run the certifier independently for every ``n = 1..n_max``."""
    if not 1 <= n_max <= 20:
        raise ValueError("n_max must be in 1..20")
    W = cone_admissibility(fmap, half_width).half_width
    rows = []
    for n in range(1, n_max + 1):
        cert = certify(fmap, W, n, **opts)
        rows.append(OrderResult(n, cert.status, cert))
    return OrderTable(W, rows)


@dataclass
class PaperPairResult:
    """Outcome of checking ``h_n(x/2^n) - h_n(x/2^n + 1/8) > 1/2^(n-3)`` on [0, 1]."""

    n: int
    pair: WitnessPair
    threshold: float
    status: Status
    leaves: list[Leaf]
    infimum: Interval
    hand_bound: float
    scale: Interval

    @property
    def consistent_with_hand_bound(self) -> bool:
        # the infimum cannot lie below a valid lower bound
        return self.infimum.hi >= self.hand_bound * self.scale.lo


def paper_hand_bound(n: int) -> float:
    return 1.8 / 2 ** (n - 3) + (2.7 - math.sqrt(2) / 2) / 2 ** (n - 1)


def _pair_difference(n: int, offset: int):
    N = 2**n

    def fn(X: Interval) -> Interval:
        return h_n(X / N, n) - h_n((X + offset) / N, n)

    def dfn(X: Interval) -> Interval:
        return (h_n_deriv(X / N, n) - h_n_deriv((X + offset) / N, n)) / N

    return fn, dfn


def _mean_value(fn, dfn, X: Interval) -> Interval:
    c = Interval(X.mid)
    nat = fn(X)
    cen = fn(c) + dfn(X) * (X - c)
    lo, hi = max(nat.lo, cen.lo), min(nat.hi, cen.hi)
    return Interval(lo, hi) if lo <= hi else nat


def _certified_min(fn, dfn, atol: float = 1e-10, max_nodes: int = 200_000) -> Interval:
    pieces = 64
    best_hi = math.inf
    heap = []
    for i in range(pieces):
        X = Interval(i / pieces, (i + 1) / pieces)
        heapq.heappush(heap, (_mean_value(fn, dfn, X).lo, X.lo, X.hi))
        best_hi = min(best_hi, fn(Interval(X.lo)).hi, fn(Interval(X.hi)).hi)
    nodes = 0
    while heap and nodes < max_nodes:
        low = heap[0][0]
        if best_hi - low <= atol:
            break
        _, a, b = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not a < mid < b:
            heapq.heappush(heap, (low, a, b))
            break
        best_hi = min(best_hi, fn(Interval(mid)).hi)
        for lo, hi in ((a, mid), (mid, b)):
            v = _mean_value(fn, dfn, Interval(lo, hi)).lo
            if v < best_hi:
                heapq.heappush(heap, (v, lo, hi))
        nodes += 1
    low = heap[0][0] if heap else best_hi
    return Interval(min(low, best_hi), best_hi)


def verify_paper_pair(
    n: int, lam: float | None = None, *, max_depth: int = 40
) -> PaperPairResult:
    """Check the fixed pair ``y = x/2^n``, ``z = y + 1/8`` over all ``x``.

    With ``lam=None`` the check is the normalized one on ``h_n`` against
    ``1/2^(n-3)``; otherwise both sides are multiplied by ``pi * lam``.
    """
    if n < 4:
        raise ValueError("the pair family needs n >= 4")
    offset = 2 ** (n - 3)
    pair = WitnessPair(0, offset)

    scale = Interval(1.0) if lam is None else PI * abs(float(lam))
    thr = Interval(1.0 / offset) * scale
    fn0, dfn0 = _pair_difference(n, offset)

    def fn(X):
        return fn0(X) * scale

    def dfn(X):
        return dfn0(X) * scale

    leaves: list[Leaf] = []
    stack = [(0.0, 1.0, 0)]
    status = Status.CERTIFIED
    while stack:
        a, b, d = stack.pop()
        margin = sub_down(_mean_value(fn, dfn, Interval(a, b)).lo, thr.hi)
        if margin > 0:
            leaves.append(Leaf(a, b, pair, margin))
        elif d >= max_depth:
            status = Status.UNDECIDED
            break
        else:
            mid = 0.5 * (a + b)
            stack += [(mid, b, d + 1), (a, mid, d + 1)]
    leaves.sort(key=lambda lf: lf.x_lo)
    inf = _certified_min(fn, dfn)
    if inf.hi < thr.lo:
        status = Status.FAILED
    return PaperPairResult(
        n=n,
        pair=pair,
        threshold=1.0 / offset if lam is None else thr.mid,
        status=status,
        leaves=leaves,
        infimum=inf,
        hand_bound=paper_hand_bound(n),
        scale=scale,
    )
