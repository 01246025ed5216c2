"""Validated interval arithmetic.

Every operation returns an interval that contains the exact real result of
applying the operation to any points of its operands.  Rounding is handled
portably: after each floating-point operation the endpoints are pushed one
ulp outward with :func:`math.nextafter`, so no control of the hardware
rounding mode is needed.

Transcendental endpoints are taken from the platform libm (``math.cos`` /
``math.sin``), which is accurate to within one ulp on every mainstream
platform; those endpoints are widened by two ulps.
"""

from __future__ import annotations

import math
from typing import Union

__all__ = [
    "Interval",
    "IntervalError",
    "PI",
    "TWO_PI",
    "pi_enclose",
    "cos_enclose",
    "sin_enclose",
    "hull",
    "sub_down",
    "add_up",
]

_INF = math.inf
_nextafter = math.nextafter

# beyond this magnitude argument reduction is not attempted
MAX_TRIG_ARG = 2.0**20


class IntervalError(ValueError):
    """Raised for malformed intervals or undefined operations."""


def _down(x: float) -> float:
    return _nextafter(x, -_INF)


def _up(x: float) -> float:
    return _nextafter(x, _INF)


def sub_down(a: float, b: float) -> float:
    """Return a float ``<= a - b``, equal to ``a - b`` when that is exact."""
    s = a - b
    # two-sum error term: (a - b) - s exactly
    bb = s - a
    err = (a - (s - bb)) + (-b - bb)
    return _down(s) if err < 0 else s


def add_up(a: float, b: float) -> float:
    """Return a float ``>= a + b``, equal to ``a + b`` when that is exact."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return _up(s) if err > 0 else s


Number = Union[int, float]


class Interval:
    """A closed interval ``[lo, hi]`` of reals with float endpoints.

    Instances are immutable.  Arithmetic with plain ``int``/``float``
    operands treats the number as an exact point.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Number, hi: Number | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise IntervalError(f"non-finite endpoint in [{lo}, {hi}]")
        if lo > hi:
            raise IntervalError(f"empty interval: lo={lo!r} > hi={hi!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def _raw(cls, lo: float, hi: float) -> Interval:
        # trusted constructor for results of sound operations
        iv = object.__new__(cls)
        object.__setattr__(iv, "lo", lo)
        object.__setattr__(iv, "hi", hi)
        return iv

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    # -- inspection ---------------------------------------------------------

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other) -> bool:
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    @property
    def width(self) -> float:
        """Upper bound on ``hi - lo``."""
        return add_up(self.hi, -self.lo)

    @property
    def mid(self) -> float:
        return self.lo + 0.5 * (self.hi - self.lo)

    @property
    def mag(self) -> float:
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        """Smallest absolute value in the interval."""
        if self.lo > 0:
            return self.lo
        if self.hi < 0:
            return -self.hi
        return 0.0

    def is_point(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def subset(self, other: Interval) -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    # -- arithmetic ---------------------------------------------------------

    def __neg__(self) -> Interval:
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self) -> Interval:
        return self

    def __abs__(self) -> Interval:
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval._raw(0.0, self.mag)

    def __add__(self, other) -> Interval:
        if isinstance(other, Interval):
            return Interval._raw(_down(self.lo + other.lo), _up(self.hi + other.hi))
        c = float(other)
        return Interval._raw(_down(self.lo + c), _up(self.hi + c))

    __radd__ = __add__

    def __sub__(self, other) -> Interval:
        if isinstance(other, Interval):
            return Interval._raw(_down(self.lo - other.hi), _up(self.hi - other.lo))
        c = float(other)
        return Interval._raw(_down(self.lo - c), _up(self.hi - c))

    def __rsub__(self, other) -> Interval:
        c = float(other)
        return Interval._raw(_down(c - self.hi), _up(c - self.lo))

    def __mul__(self, other) -> Interval:
        if isinstance(other, Interval):
            a, b, c, d = self.lo, self.hi, other.lo, other.hi
            p = (a * c, a * d, b * c, b * d)
            return Interval._raw(_down(min(p)), _up(max(p)))
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, c: Number) -> Interval:
        """Multiply by an exact real ``c``."""
        c = float(c)
        if c >= 0:
            return Interval._raw(_down(self.lo * c), _up(self.hi * c))
        return Interval._raw(_down(self.hi * c), _up(self.lo * c))

    def __truediv__(self, other) -> Interval:
        if not isinstance(other, Interval):
            other = Interval(other)
        if other.lo <= 0.0 <= other.hi:
            raise IntervalError(f"division by an interval containing zero: {other!r}")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        q = (a / c, a / d, b / c, b / d)
        return Interval._raw(_down(min(q)), _up(max(q)))

    def __rtruediv__(self, other) -> Interval:
        return Interval(other) / self


def make(lo: Number, hi: Number) -> Interval:
    return Interval(lo, hi)


def hull(*parts: Interval) -> Interval:
    return Interval._raw(min(p.lo for p in parts), max(p.hi for p in parts))


# math.pi is the double just below pi; its successor is just above.
PI = Interval._raw(3.141592653589793, 3.1415926535897936)
TWO_PI = Interval._raw(6.283185307179586, 6.283185307179587)


def pi_enclose() -> Interval:
    return PI


def _widen2(v: float) -> tuple[float, float]:
    return _down(_down(v)), _up(_up(v))


def _trig_enclose(x: Interval, fn, phase: float) -> Interval:
    # Extrema of fn sit at (k + phase) * pi with value (-1)**k.
    if not isinstance(x, Interval):
        x = Interval(x)
    if max(abs(x.lo), abs(x.hi)) > MAX_TRIG_ARG:
        return Interval._raw(-1.0, 1.0)
    qlo = (Interval._raw(x.lo, x.lo) / PI).lo - phase
    qhi = (Interval._raw(x.hi, x.hi) / PI).hi - phase
    # any k with (k + phase) * pi in x satisfies ceil(qlo) <= k <= floor(qhi)
    k0 = math.ceil(_down(qlo))
    k1 = math.floor(_up(qhi))
    a_lo, a_hi = _widen2(fn(x.lo))
    if x.hi == x.lo:
        lo, hi = a_lo, a_hi
    else:
        b_lo, b_hi = _widen2(fn(x.hi))
        lo, hi = min(a_lo, b_lo), max(a_hi, b_hi)
    if k1 >= k0:
        if k1 > k0:
            return Interval._raw(-1.0, 1.0)
        if k0 % 2 == 0:
            hi = 1.0
        else:
            lo = -1.0
    return Interval._raw(max(lo, -1.0), min(hi, 1.0))


def cos_enclose(x: Interval) -> Interval:
    """Enclosure of ``{cos t : t in x}``."""
    return _trig_enclose(x, math.cos, 0.0)


def sin_enclose(x: Interval) -> Interval:
    """Enclosure of ``{sin t : t in x}``."""
    return _trig_enclose(x, math.sin, 0.5)
