"""Orbit experiments: box coverage and Birkhoff averages.

These are statistical evidence, not proofs, and use plain floating point
for the fiber coordinate.  The base coordinate needs more care: iterating
``x -> m x mod 1`` on doubles throws away one binary digit per step for
m = 2, so every float orbit collapses onto the fixed point 0 within about
55 steps.  Orbits here therefore follow real points whose base-m digits
are known exactly: explicit starting points are treated as the exact dyadic
rationals they are, and random starting points get an infinite
pseudo-random tail of digits from the seeded generator.

Random numbers come from numpy's PCG64 bit generator
(``numpy.random.default_rng(seed)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .dynamics import SkewProductMap, eval_tau

MAX_GRID = 4096
MAX_SAMPLES = 10**7
MAX_STEPS = 10**9
_TWO64 = 2.0**64
_CHUNK = 1 << 16


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValueError(f"box {self} is not a nonempty subset of [0,1)^2")


@dataclass
class CoverageReport:
    grid_size: int
    sample_count: int
    iterations: int
    covered_fraction: list[float]
    first_full_coverage: Optional[int]
    visited: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "sample_count": self.sample_count,
            "iterations": self.iterations,
            "covered_fraction": list(self.covered_fraction),
            "first_full_coverage_iterate": self.first_full_coverage,
        }


@dataclass(frozen=True)
class Observable:
    """``cos(2 pi (p x + q y))`` or ``sin(2 pi (p x + q y))``."""

    kind: str
    p: int
    q: int

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError("observable kind must be 'cos' or 'sin'")
        if abs(self.p) > 4 or abs(self.q) > 4:
            raise ValueError("observable frequencies must satisfy |p|, |q| <= 4")

    @classmethod
    def parse(cls, text: str) -> Observable:
        kind, p, q = text.split(":")
        return cls(kind, int(p), int(q))

    @property
    def label(self) -> str:
        return f"{self.kind}(2pi({self.p}x+{self.q}y))"

    @property
    def space_average(self) -> float:
        return 1.0 if (self.kind == "cos" and self.p == 0 and self.q == 0) else 0.0

    def __call__(self, x, y):
        fn = np.cos if self.kind == "cos" else np.sin
        return fn(2.0 * np.pi * (self.p * x + self.q * y))


@dataclass
class BirkhoffReport:
    observable: str
    steps: int
    start: tuple[float, float]
    running_average: list[tuple[int, float]]
    final_average: float
    reference_space_average: float

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "steps": self.steps,
            "start": list(self.start),
            "running_average": [list(r) for r in self.running_average],
            "final_average": self.final_average,
            "reference_space_average": self.reference_space_average,
        }


# ---------------------------------------------------------------------------
# box coverage
# ---------------------------------------------------------------------------


def orbit_points(
    fmap: SkewProductMap, box: Box, samples: int, iterations: int, rng_seed: int = 0
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(x, y)`` arrays for iterates ``0..iterations`` of random seeds in ``box``.

    ``x`` is carried as a 64-bit fixed-point fraction.  Each step multiplies
    by ``m`` modulo 2^64 (one digit leaves at the top) and adds a random
    integer in ``[0, m)`` at the bottom, standing in for the unknown tail
    of a uniformly random real.
    """
    rng = np.random.default_rng(rng_seed)
    lo = int(box.x0 * _TWO64)
    hi = int(box.x1 * _TWO64)
    X = rng.integers(lo, hi, size=samples, dtype=np.uint64, endpoint=False)
    y = rng.uniform(box.y0, box.y1, size=samples)
    m = np.uint64(fmap.m)
    for t in range(iterations + 1):
        x = X.astype(np.float64) / _TWO64
        yield x, y
        if t == iterations:
            break
        y = np.mod(y + np.asarray(eval_tau(fmap.tau, x)), 1.0)
        X = X * m + rng.integers(0, fmap.m, size=samples, dtype=np.uint64)


def _cells(v: np.ndarray, G: int) -> np.ndarray:
    return np.minimum((v * G).astype(np.int64), G - 1)


def box_coverage(
    fmap: SkewProductMap,
    seed_box: Box,
    grid: int = 128,
    samples: int = 10**6,
    iterations: int = 40,
    rng_seed: int = 0,
) -> CoverageReport:
    """Cumulative fraction of ``grid x grid`` cells hit by iterates of a seed box.

    Entry ``t`` of ``covered_fraction`` counts cells visited by any of the
    iterates ``0..t``.
    """
    if not 1 <= grid <= MAX_GRID:
        raise ValueError(f"grid must be in 1..{MAX_GRID}")
    if not 1 <= samples <= MAX_SAMPLES:
        raise ValueError(f"samples must be in 1..{MAX_SAMPLES}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    visited = np.zeros((grid, grid), dtype=bool)
    fractions = []
    first_full = None
    for t, (x, y) in enumerate(orbit_points(fmap, seed_box, samples, iterations, rng_seed)):
        visited[_cells(x, grid), _cells(y, grid)] = True
        frac = float(visited.mean())
        fractions.append(frac)
        if first_full is None and frac == 1.0:
            first_full = t
    return CoverageReport(grid, samples, iterations, fractions, first_full, visited)


# ---------------------------------------------------------------------------
# Birkhoff averages
# ---------------------------------------------------------------------------


class _DigitSource:
    """Base-``m`` digits of the starting point, served in overlapping chunks."""

    def __init__(self, m: int, start_x: Optional[float], rng: np.random.Generator):
        self.m = m
        self.window = math.ceil(64 / math.log2(m)) + 1
        self.rng = rng
        if start_x is None:
            self.frac = None
            self.tail = rng.integers(0, m, size=self.window, dtype=np.int64)
        else:
            r = Fraction(start_x) % 1
            self.frac = [r.numerator, r.denominator]
            self.tail = self._exact(self.window)

    def _exact(self, count: int) -> np.ndarray:
        num, den = self.frac
        out = np.zeros(count, dtype=np.int64)
        for i in range(count):
            if num == 0:
                break
            num *= self.m
            out[i], num = divmod(num, den)
        self.frac[0] = num
        return out

    def take(self, count: int) -> np.ndarray:
        """Digits ``pos .. pos + count + window``; advances ``pos`` by ``count``."""
        if self.frac is None:
            new = self.rng.integers(0, self.m, size=count, dtype=np.int64)
        else:
            new = self._exact(count)
        digits = np.concatenate((self.tail, new))
        self.tail = digits[count:]
        return digits


def _window_values(digits: np.ndarray, m: int, count: int) -> np.ndarray:
    """``x_k = sum_i digits[k+i] m^-(i+1)`` for ``k < count``."""
    L = len(digits) - count
    out = np.zeros(count)
    # smallest terms first
    for i in range(L - 1, -1, -1):
        out += digits[i : i + count] * float(m) ** -(i + 1)
    return np.where(out >= 1.0, 0.0, out)


def base_orbit(
    m: int, steps: int, start_x: Optional[float] = None, rng_seed: int = 0
) -> np.ndarray:
    """``x_k = m^k x_0 mod 1`` for ``k < steps``, read off the digit expansion of ``x_0``.

    ``start_x=None`` stands for a random real with seeded digits.
    """
    src = _DigitSource(m, start_x, np.random.default_rng(rng_seed))
    return _window_values(src.take(steps), m, steps)


def birkhoff(
    fmap: SkewProductMap,
    observable: Observable,
    start: Optional[tuple[float, float]] = None,
    steps: int = 10**6,
    rng_seed: int = 0,
    samples: int = 50,
) -> BirkhoffReport:
    """Time average of ``observable`` along an orbit of length ``steps``.

    ``start=None`` draws a random point; the running average is recorded at
    about ``samples`` geometrically spaced times.
    """
    if not 1 <= steps <= MAX_STEPS:
        raise ValueError(f"steps must be in 1..{MAX_STEPS}")
    rng = np.random.default_rng(rng_seed)
    if start is None:
        y = float(rng.uniform())
        src = _DigitSource(fmap.m, None, rng)
    else:
        y = float(start[1]) % 1.0
        src = _DigitSource(fmap.m, float(start[0]), rng)
    y_start = y
    marks = np.unique(np.geomspace(1, steps, samples).astype(np.int64)).tolist()
    if marks[-1] != steps:
        marks.append(steps)
    running: list[tuple[int, float]] = []
    x_start = None
    total = 0.0
    done = 0
    mi = 0
    while done < steps:
        size = min(_CHUNK, steps - done)
        xs = _window_values(src.take(size), fmap.m, size)
        if x_start is None:
            x_start = float(xs[0])
        incr = np.broadcast_to(np.asarray(eval_tau(fmap.tau, xs), dtype=float), (size,))
        # y_k = y_0 + sum_{i<k} tau(x_i), reduced once per chunk
        ys = np.mod(y + np.concatenate(([0.0], np.cumsum(incr[:-1]))), 1.0)
        y = float(np.mod(ys[-1] + incr[-1], 1.0))
        vals = np.broadcast_to(observable(xs, ys), (size,))
        csum = total + np.cumsum(vals)
        while mi < len(marks) and marks[mi] <= done + size:
            k = marks[mi]
            running.append((k, float(csum[k - done - 1] / k)))
            mi += 1
        total = float(csum[-1])
        done += size
    return BirkhoffReport(
        observable=observable.label,
        steps=steps,
        start=(x_start, y_start),
        running_average=running,
        final_average=total / steps,
        reference_space_average=observable.space_average,
    )
