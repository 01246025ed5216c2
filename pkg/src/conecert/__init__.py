"""Certified order-n transversality for skew products on the 2-torus."""

from .dynamics import (
    ConeField,
    Harmonic,
    HyperbolicityBounds,
    InadmissibleCone,
    SkewProductMap,
    TrigPolynomial,
    cone_admissibility,
    h_n,
    preimage_branches,
    slope_center,
)
from .interval import Interval, IntervalError, cos_enclose, pi_enclose, sin_enclose

__version__ = "0.1.0"

__all__ = [
    "ConeField",
    "Harmonic",
    "HyperbolicityBounds",
    "InadmissibleCone",
    "Interval",
    "IntervalError",
    "SkewProductMap",
    "TrigPolynomial",
    "cone_admissibility",
    "cos_enclose",
    "h_n",
    "pi_enclose",
    "preimage_branches",
    "sin_enclose",
    "slope_center",
]
