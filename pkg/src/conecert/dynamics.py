"""Skew-product endomorphisms of the 2-torus.

The maps studied here are ``f(x, y) = (m*x mod 1, y + tau(x) mod 1)`` with
``tau`` a real trigonometric polynomial.  Functions that take a coordinate
accept either a float (plain floating-point evaluation, numpy arrays are
fine too) or an :class:`~conecert.interval.Interval` (rigorous enclosure).

Derivative computations work on the universal cover: ``Df`` does not depend
on the integer part of ``x``, so no reduction mod 1 is applied to slopes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .interval import TWO_PI, Interval, cos_enclose, sin_enclose

MAX_DEGREE = 64
MAX_BRANCHES = 2**24


class InadmissibleCone(ValueError):
    """The requested cone half-width is not forward invariant."""


@dataclass(frozen=True)
class Harmonic:
    freq: int
    cos: float = 0.0
    sin: float = 0.0


@dataclass(frozen=True)
class TrigPolynomial:
    """``tau(x) = sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x)``."""

    harmonics: tuple[Harmonic, ...] = ()

    def __post_init__(self):
        hs = tuple(sorted(self.harmonics, key=lambda h: h.freq))
        object.__setattr__(self, "harmonics", hs)
        freqs = [h.freq for h in hs]
        for h in hs:
            if not isinstance(h.freq, (int, np.integer)) or h.freq < 1:
                raise ValueError(f"frequency must be a positive integer, got {h.freq!r}")
            if h.freq > MAX_DEGREE:
                raise ValueError(f"frequency {h.freq} exceeds maximum degree {MAX_DEGREE}")
            if not (math.isfinite(h.cos) and math.isfinite(h.sin)):
                raise ValueError("coefficients must be finite")
        if len(set(freqs)) != len(freqs):
            raise ValueError(f"duplicate frequencies in {freqs}")

    @classmethod
    def sine(cls, lam: float, freq: int = 1) -> TrigPolynomial:
        """``lam * sin(2 pi freq x)``; the doubling-map example uses freq 1."""
        return cls((Harmonic(freq, 0.0, float(lam)),))

    @classmethod
    def zero(cls) -> TrigPolynomial:
        return cls(())

    @property
    def is_zero(self) -> bool:
        return all(h.cos == 0.0 and h.sin == 0.0 for h in self.harmonics)

    @property
    def degree(self) -> int:
        return max((h.freq for h in self.harmonics), default=0)

    def scaled(self, s: float) -> TrigPolynomial:
        return TrigPolynomial(
            tuple(Harmonic(h.freq, h.cos * s, h.sin * s) for h in self.harmonics)
        )


@dataclass(frozen=True)
class SkewProductMap:
    """``f(x, y) = (m x mod 1, y + tau(x) mod 1)`` on the torus."""

    m: int
    tau: TrigPolynomial

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise ValueError(f"base multiplier must be an integer >= 2, got {self.m!r}")

    @classmethod
    def paper(cls, lam: float) -> SkewProductMap:
        """``(2x, y + lam sin(2 pi x))``."""
        return cls(2, TrigPolynomial.sine(lam))


@dataclass(frozen=True)
class ConeField:
    """Constant slope cone ``{(t, t*eta) : |eta| < half_width}``."""

    half_width: float

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError("cone half-width must be positive and finite")

    def contains_slope(self, s: float) -> bool:
        return abs(s) < self.half_width


@dataclass(frozen=True)
class HyperbolicityBounds:
    """Growth exponents for the unstable cone and the center direction.

    ``chi_u`` and ``chi_c`` are the asymptotic values.  Over ``n`` steps a
    cone vector grows at least like ``exp(n * chi_u - correction)``, so the
    finite-horizon exponent is :meth:`chi_u_at`.
    """

    chi_u: float
    chi_c: float
    correction: float

    def __post_init__(self):
        if not self.chi_c < self.chi_u:
            raise ValueError("need chi_c < chi_u")

    def chi_u_at(self, n: int) -> float:
        return self.chi_u - self.correction / n

    @property
    def valid_from(self) -> int:
        """Smallest n with ``chi_u_at(n) > chi_c``."""
        return math.floor(self.correction / (self.chi_u - self.chi_c)) + 1


@dataclass(frozen=True)
class Admissibility:
    half_width: float
    bounds: HyperbolicityBounds
    sup_tau_deriv: Interval


# ---------------------------------------------------------------------------
# evaluation of tau and its derivatives
# ---------------------------------------------------------------------------


def _is_interval(x) -> bool:
    return isinstance(x, Interval)


def _floatify(v):
    return float(v) if np.ndim(v) == 0 else v


def _sum_intervals(terms: Iterable[Interval]) -> Interval:
    acc = None
    for t in terms:
        acc = t if acc is None else acc + t
    return Interval(0.0) if acc is None else acc


def _eval(tau: TrigPolynomial, x, order: int):
    # order-th derivative of tau; d^r/dx^r of (a cos + b sin)(2 pi j x)
    # cycles through (a, b) -> (b, -a) -> (-a, -b) -> (-b, a) scaled by (2 pi j)^r
    if _is_interval(x):
        terms = []
        for h in tau.harmonics:
            a, b = h.cos, h.sin
            for _ in range(order):
                a, b = b, -a
            if a == 0.0 and b == 0.0:
                continue
            ang = x * (TWO_PI * h.freq)
            t = None
            if a != 0.0:
                t = cos_enclose(ang) * a
            if b != 0.0:
                s = sin_enclose(ang) * b
                t = s if t is None else t + s
            if order:
                t = t * _two_pi_pow(h.freq, order)
            terms.append(t)
        return _sum_intervals(terms)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for h in tau.harmonics:
        a, b = h.cos, h.sin
        for _ in range(order):
            a, b = b, -a
        ang = 2.0 * math.pi * h.freq * x
        out = out + (2.0 * math.pi * h.freq) ** order * (a * np.cos(ang) + b * np.sin(ang))
    return _floatify(out)


@lru_cache(maxsize=None)
def _two_pi_pow(j: int, r: int) -> Interval:
    out = Interval(1.0)
    for _ in range(r):
        out = out * (TWO_PI * j)
    return out


def eval_tau(tau_or_map, x):
    """``tau(x)``; interval in, enclosure out."""
    return _eval(_tau_of(tau_or_map), x, 0)


def eval_tau_deriv(tau_or_map, x):
    """``tau'(x) = sum_j 2 pi j (-a_j sin(2 pi j x) + b_j cos(2 pi j x))``."""
    return _eval(_tau_of(tau_or_map), x, 1)


def eval_tau_deriv2(tau_or_map, x):
    return _eval(_tau_of(tau_or_map), x, 2)


def _tau_of(obj) -> TrigPolynomial:
    return obj.tau if isinstance(obj, SkewProductMap) else obj


# ---------------------------------------------------------------------------
# the map, its preimages and the derivative cocycle
# ---------------------------------------------------------------------------


def apply(fmap: SkewProductMap, p: tuple[float, float]) -> tuple[float, float]:
    x, y = p
    nx = (fmap.m * x) % 1.0
    ny = (y + eval_tau(fmap.tau, x)) % 1.0
    # (-tiny) % 1.0 rounds to 1.0
    return (0.0 if nx >= 1.0 else nx, 0.0 if ny >= 1.0 else ny)


def branch_count(fmap: SkewProductMap, n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    count = fmap.m**n
    if count > MAX_BRANCHES:
        raise ValueError(f"{fmap.m}^{n} branches exceeds the limit of {MAX_BRANCHES}")
    return count


def preimage_branches(fmap: SkewProductMap, x, n: int) -> list:
    """First coordinates of ``f^{-n}(x, .)``: ``(x + k) / m^n``, k ascending."""
    count = branch_count(fmap, n)
    return [(x + k) / count for k in range(count)]


def slope_center(fmap: SkewProductMap, w, n: int):
    """Slope of ``Df^n_w (1, 0)``: ``sum_{k<n} tau'(m^k w) / m^(n-k)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = fmap.m
    if _is_interval(w):
        return _sum_intervals(
            eval_tau_deriv(fmap.tau, w * (m**k)) / (m ** (n - k)) for k in range(n)
        )
    # tau' has period one, so the float path may reduce m^k w as it goes
    u = np.asarray(w, dtype=float)
    out = 0.0
    for k in range(n):
        out = out + eval_tau_deriv(fmap.tau, u) / (m ** (n - k))
        u = np.mod(m * u, 1.0)
    return _floatify(out)


def branch_slope_center(fmap: SkewProductMap, x, index: int, n: int):
    """``slope_center`` at the branch ``(x + index) / m^n``.

    ``m^k`` times the branch point is ``(x + index) / m^(n-k)``, and the integer
    part of ``index / m^(n-k)`` can be dropped since ``tau'`` has period one;
    this keeps interval arguments narrow.
    """
    m = fmap.m
    tau = fmap.tau
    if _is_interval(x):
        terms = []
        for k in range(n):
            d = m ** (n - k)
            u = (x + (index % d)) / d
            terms.append(eval_tau_deriv(tau, u) / d)
        return _sum_intervals(terms)
    x = np.asarray(x, dtype=float)
    out = 0.0
    for k in range(n):
        d = m ** (n - k)
        out = out + eval_tau_deriv(tau, (x + (index % d)) / d) / d
    return _floatify(out)


def all_branch_centers(fmap: SkewProductMap, x: float | np.ndarray, n: int) -> np.ndarray:
    """Float centers for every branch; shape ``(m^n,)``, or ``(len(x), m^n)`` for arrays."""
    count = branch_count(fmap, n)
    k = np.arange(count, dtype=float)
    x = np.asarray(x, dtype=float)
    xs = x[..., None] if x.ndim else x
    out = np.zeros(np.broadcast(xs, k).shape)
    for step in range(n):
        d = fmap.m ** (n - step)
        u = (xs + np.mod(k, d)) / d
        out += np.asarray(eval_tau_deriv(fmap.tau, u)) / d
    return out


def slope_step(fmap: SkewProductMap, x: float, s: float) -> float:
    """One step of the projective cocycle: slope ``s`` at ``x`` maps to ``(s + tau'(x)) / m``."""
    return (s + eval_tau_deriv(fmap.tau, x)) / fmap.m


def h_n(x, n: int):
    """``sum_{k=1}^n cos(2^k pi x) / 2^(n-k)``.

    For ``tau = lam sin(2 pi x)`` and ``m = 2`` this is the slope center
    divided by ``pi * lam``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if _is_interval(x):
        return _sum_intervals(
            cos_enclose(x * (TWO_PI * 2 ** (k - 1))) / 2 ** (n - k) for k in range(1, n + 1)
        )
    x = np.asarray(x, dtype=float)
    out = sum(np.cos(2.0**k * math.pi * x) / 2.0 ** (n - k) for k in range(1, n + 1))
    return _floatify(out)


def h_n_deriv(x, n: int):
    """Derivative of :func:`h_n` in ``x``."""
    if _is_interval(x):
        return _sum_intervals(
            -(sin_enclose(x * (TWO_PI * 2 ** (k - 1))) * (TWO_PI * 2 ** (k - 1)))
            / 2 ** (n - k)
            for k in range(1, n + 1)
        )
    x = np.asarray(x, dtype=float)
    out = sum(
        -(2.0**k * math.pi) * np.sin(2.0**k * math.pi * x) / 2.0 ** (n - k)
        for k in range(1, n + 1)
    )
    return _floatify(out)


# ---------------------------------------------------------------------------
# cone admissibility
# ---------------------------------------------------------------------------


def _mean_value_abs(fn, dfn, X: Interval) -> Interval:
    c = Interval(X.mid)
    natural = fn(X)
    centered = fn(c) + dfn(X) * (X - c)
    lo, hi = max(natural.lo, centered.lo), min(natural.hi, centered.hi)
    return abs(Interval._raw(lo, hi) if lo <= hi else natural)


def certified_max_abs(
    fn, dfn, pieces: int = 64, rtol: float = 1e-12, max_nodes: int = 200_000
) -> Interval:
    """Enclosure of ``max_{x in [0,1]} |fn(x)|`` by branch and bound.

    ``fn`` and ``dfn`` map intervals to enclosures of the function and its
    derivative; the derivative powers a mean-value form that gives quadratic
    convergence near interior maxima.
    """
    best_lo = 0.0
    heap: list[tuple[float, float, float]] = []
    for i in range(pieces):
        X = Interval(i / pieces, (i + 1) / pieces)
        up = _mean_value_abs(fn, dfn, X).hi
        heapq.heappush(heap, (-up, X.lo, X.hi))
        best_lo = max(best_lo, abs(fn(Interval(X.mid))).lo)
    nodes = 0
    while heap:
        up = -heap[0][0]
        if up - best_lo <= rtol * best_lo or up == 0.0 or nodes >= max_nodes:
            break
        _, lo, hi = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            heapq.heappush(heap, (-up, lo, hi))
            break
        for a, b in ((lo, mid), (mid, hi)):
            X = Interval(a, b)
            best_lo = max(best_lo, abs(fn(Interval(X.mid))).lo)
            u = _mean_value_abs(fn, dfn, X).hi
            if u > best_lo:
                heapq.heappush(heap, (-u, a, b))
        nodes += 1
    top = -heap[0][0] if heap else best_lo
    return Interval(best_lo, max(best_lo, top))


@lru_cache(maxsize=256)
def sup_tau_deriv(tau: TrigPolynomial) -> Interval:
    """Certified enclosure of ``max |tau'|`` over the circle."""
    if tau.is_zero:
        return Interval(0.0)
    return certified_max_abs(
        lambda X: eval_tau_deriv(tau, X),
        lambda X: eval_tau_deriv2(tau, X),
        pieces=max(64, 16 * tau.degree),
    )


def minimal_half_width(fmap: SkewProductMap) -> float:
    """Upper bound on ``sup|tau'| / (m - 1)``; admissible widths exceed it."""
    return (sup_tau_deriv(fmap.tau) / (fmap.m - 1)).hi


def cone_admissibility(fmap: SkewProductMap, half_width: float | str = "auto") -> Admissibility:
    """Check forward invariance of the closed cone ``|slope| <= W``.

    The slope map ``s -> (s + tau'(x)) / m`` sends ``[-W, W]`` into
    ``(-W, W)`` exactly when ``W > sup|tau'| / (m - 1)``.  ``"auto"`` picks
    twice that bound (or 1 when ``tau`` vanishes).
    """
    S = sup_tau_deriv(fmap.tau)
    if half_width == "auto":
        if S.hi == 0.0:
            W = 1.0
        else:
            W = (S.scale(2.0) / (fmap.m - 1)).hi
    else:
        W = float(half_width)
        if not (W > 0 and math.isfinite(W)):
            raise InadmissibleCone(f"cone half-width must be positive, got {half_width!r}")
    if not (Interval(W) * (fmap.m - 1)).lo > S.hi:
        raise InadmissibleCone(
            f"W={W!r} does not exceed sup|tau'|/(m-1) <= {minimal_half_width(fmap)!r}"
        )
    correction = 0.5 * math.log1p(W * W)
    bounds = HyperbolicityBounds(chi_u=math.log(fmap.m), chi_c=0.0, correction=correction)
    return Admissibility(half_width=W, bounds=bounds, sup_tau_deriv=S)


def iterate(fmap: SkewProductMap, p: tuple[float, float], n: int) -> tuple[float, float]:
    for _ in range(n):
        p = apply(fmap, p)
    return p
