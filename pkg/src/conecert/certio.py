"""Certificate files: writing, reading and independent re-validation.

A certificate is a JSON document.  Floats are written with 17 significant
digits so every value reads back to the identical double.  :func:`check`
re-derives every leaf margin in interval arithmetic from the file alone,
without repeating the search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dynamics import (
    Harmonic,
    InadmissibleCone,
    SkewProductMap,
    TrigPolynomial,
    branch_count,
    cone_admissibility,
)
from .interval import Interval
from .transversality import (
    Certificate,
    Status,
    WitnessPair,
    pair_margin,
    refutes,
    threshold_enclosure,
    threshold_value,
)


def format_json(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """``json.dumps`` lookalike that prints floats as ``%.17g``."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)) and not isinstance(obj, float):
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float in certificate")
        return "%.17g" % obj
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {format_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(format_json(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + format_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def map_to_dict(fmap: SkewProductMap) -> dict:
    return {
        "m": fmap.m,
        "tau": [{"freq": h.freq, "cos": float(h.cos), "sin": float(h.sin)} for h in fmap.tau.harmonics],
    }


def map_from_dict(d: dict) -> SkewProductMap:
    tau = TrigPolynomial(
        tuple(Harmonic(int(h["freq"]), float(h["cos"]), float(h["sin"])) for h in d["tau"])
    )
    return SkewProductMap(int(d["m"]), tau)


def certificate_to_dict(cert: Certificate) -> dict:
    doc = {
        "map": map_to_dict(cert.fmap),
        "cone_half_width": float(cert.half_width),
        "n": cert.n,
        "threshold": float(cert.threshold),
        "status": cert.status.value,
        "leaves": [
            {"x_lo": lf.x_lo, "x_hi": lf.x_hi, "pair": [lf.pair.i, lf.pair.j], "margin": lf.margin}
            for lf in sorted(cert.leaves, key=lambda lf: lf.x_lo)
        ],
        "stats": {
            "leaf_count": cert.stats.leaf_count,
            "max_depth": cert.stats.max_depth,
            "wall_ms": float(cert.stats.wall_ms),
        },
    }
    if cert.refutation is not None:
        doc["refutation"] = {"x_lo": cert.refutation.lo, "x_hi": cert.refutation.hi}
    if cert.undecided:
        doc["undecided"] = [[float(a), float(b)] for a, b in cert.undecided]
    return doc


def emit_certificate(cert: Certificate, path: str | Path) -> None:
    Path(path).write_text(format_json(certificate_to_dict(cert)) + "\n", encoding="utf-8")


def load_certificate(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


@dataclass
class CheckResult:
    status: str
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def check(doc: dict) -> CheckResult:
    """Re-validate a certificate document.

    Structure is checked exactly (leaves chain from 0 to 1 with no gaps);
    each leaf's margin is recomputed rigorously and must be positive and at
    least the stored value.  A FAILED document must carry a refutation
    interval that re-verifies.
    """
    problems: list[str] = []
    status = str(doc.get("status"))
    try:
        fmap = map_from_dict(doc["map"])
        W = float(doc["cone_half_width"])
        n = int(doc["n"])
        count = branch_count(fmap, n)
        cone_admissibility(fmap, W)
    except (KeyError, TypeError, ValueError) as exc:
        kind = "inadmissible cone" if isinstance(exc, InadmissibleCone) else "malformed header"
        return CheckResult(status, [f"{kind}: {exc}"])
    if status not in {s.value for s in Status}:
        problems.append(f"unknown status {status!r}")

    thr = float(doc.get("threshold", math.nan))
    expected = threshold_value(fmap, W, n)
    if not abs(thr - expected) <= math.ulp(expected):
        problems.append(f"threshold {thr!r} differs from 2W/m^n = {expected!r}")

    leaves = doc.get("leaves", [])
    if doc.get("stats", {}).get("leaf_count", len(leaves)) != len(leaves):
        problems.append("stats.leaf_count does not match the number of leaves")
    prev_hi = None
    for idx, lf in enumerate(leaves):
        try:
            a, b = float(lf["x_lo"]), float(lf["x_hi"])
            i, j = (int(v) for v in lf["pair"])
            stored = float(lf["margin"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"leaf {idx}: malformed")
            continue
        if not 0.0 <= a < b <= 1.0:
            problems.append(f"leaf {idx}: bad interval [{a!r}, {b!r}]")
            continue
        if prev_hi is not None and a < prev_hi:
            problems.append(f"leaf {idx}: overlaps previous leaf")
        prev_hi = b
        if not 0 <= i < j < count:
            problems.append(f"leaf {idx}: invalid pair ({i}, {j})")
            continue
        if not stored > 0:
            problems.append(f"leaf {idx}: stored margin {stored!r} is not positive")
        margin = pair_margin(fmap, W, Interval(a, b), WitnessPair(i, j), n)
        if not margin > 0:
            problems.append(f"leaf {idx}: recomputed margin {margin!r} is not positive")
        elif stored > margin:
            problems.append(f"leaf {idx}: stored margin {stored!r} exceeds certified {margin!r}")

    if status == Status.CERTIFIED.value:
        if not leaves:
            problems.append("certified document has no leaves")
        else:
            if float(leaves[0]["x_lo"]) != 0.0 or float(leaves[-1]["x_hi"]) != 1.0:
                problems.append("leaves do not span [0, 1]")
            for k in range(1, len(leaves)):
                if float(leaves[k]["x_lo"]) != float(leaves[k - 1]["x_hi"]):
                    problems.append(f"gap or overlap between leaves {k - 1} and {k}")
    elif status == Status.FAILED.value:
        ref = doc.get("refutation")
        if not ref:
            problems.append("FAILED document carries no refutation")
        else:
            X = Interval(float(ref["x_lo"]), float(ref["x_hi"]))
            if not refutes(fmap, X, n, threshold_enclosure(fmap, W, n)):
                problems.append("refutation interval does not re-verify")
    return CheckResult(status, problems)


def check_file(path: str | Path) -> CheckResult:
    return check(load_certificate(path))
