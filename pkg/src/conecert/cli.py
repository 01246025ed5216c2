"""Command-line front end.

Exit codes: 0 certified / success, 1 failed (with refutation) or rejected
certificate, 2 undecided, 3 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import certio
from .dynamics import (
    Harmonic,
    InadmissibleCone,
    SkewProductMap,
    TrigPolynomial,
    cone_admissibility,
    h_n,
)
from .experiments import Box, Observable, birkhoff, box_coverage
from .transversality import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_NODES,
    DEFAULT_MIN_WIDTH,
    Status,
    certify,
    min_order,
    verify_paper_pair,
)

EXIT_OK, EXIT_FAILED, EXIT_UNDECIDED, EXIT_USAGE = 0, 1, 2, 3
_STATUS_EXIT = {Status.CERTIFIED: EXIT_OK, Status.FAILED: EXIT_FAILED, Status.UNDECIDED: EXIT_UNDECIDED}

log = logging.getLogger("conecert")


class UsageError(Exception):
    pass


def parse_tau(text: str) -> TrigPolynomial:
    """Parse ``sin:j:coeff`` / ``cos:j:coeff`` terms separated by commas.

    A ``sin`` and a ``cos`` term may share a frequency; repeating the same
    kind at the same frequency is an error.
    """
    coeffs: dict[int, dict[str, float]] = {}
    for raw in text.split(","):
        term = raw.strip()
        parts = term.split(":")
        if len(parts) != 3 or parts[0] not in ("sin", "cos"):
            raise UsageError(f"malformed tau term {term!r}; expected sin:j:coeff or cos:j:coeff")
        kind = parts[0]
        try:
            freq = int(parts[1])
            coeff = float(parts[2])
        except ValueError:
            raise UsageError(f"malformed tau term {term!r}") from None
        if freq < 1:
            raise UsageError(f"frequency must be >= 1 in {term!r}")
        slot = coeffs.setdefault(freq, {})
        if kind in slot:
            raise UsageError(f"duplicate term {kind}:{freq}")
        slot[kind] = coeff
    try:
        return TrigPolynomial(
            tuple(Harmonic(j, c.get("cos", 0.0), c.get("sin", 0.0)) for j, c in sorted(coeffs.items()))
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@dataclass
class RunConfig:
    command: str
    fmap: SkewProductMap
    cone: float | str = "auto"
    n: Optional[int] = None
    n_max: int = 8
    min_width: float = DEFAULT_MIN_WIDTH
    max_depth: int = DEFAULT_MAX_DEPTH
    max_nodes: int = DEFAULT_MAX_NODES
    refute: bool = True
    workers: int = 1
    out: Optional[Path] = None
    extra: dict[str, Any] = field(default_factory=dict)


# flag name -> (type, default); shared between argparse and config files
_COMMON = {
    "m": (int, 2),
    "tau": (str, "sin:1:1"),
    "cone": (str, "auto"),
    "out": (str, None),
}
_PER_COMMAND = {
    "verify": {
        "n": (int, 6),
        "min_width": (float, DEFAULT_MIN_WIDTH),
        "max_depth": (int, DEFAULT_MAX_DEPTH),
        "max_nodes": (int, DEFAULT_MAX_NODES),
        "no_refute": (bool, False),
    },
    "min-order": {
        "n_max": (int, 8),
        "min_width": (float, DEFAULT_MIN_WIDTH),
        "max_depth": (int, DEFAULT_MAX_DEPTH),
        "max_nodes": (int, DEFAULT_MAX_NODES),
    },
    "paper-pair": {"n": (int, 6), "lam": (float, None)},
    "admissibility": {},
    "dump-hn": {"n": (int, 6), "grid": (int, 1024)},
    "coverage": {
        "box": (str, "0.3,0.31,0.7,0.71"),
        "grid": (int, 128),
        "samples": (int, 10**6),
        "iterations": (int, 40),
        "seed": (int, 0),
    },
    "birkhoff": {
        "observable": (str, "cos:0:1"),
        "start": (str, None),
        "steps": (int, 10**6),
        "seed": (int, 0),
    },
    "check": {"certificate": (str, None)},
}
_HELP = {
    "verify": "certify order-n transversality and write a certificate",
    "min-order": "run the certifier for n = 1..n-max",
    "paper-pair": "check the fixed branch pair y = x/2^n, z = y + 1/8",
    "admissibility": "check the cone half-width and report hyperbolicity bounds",
    "dump-hn": "CSV of x, h_n(x) on a uniform grid",
    "coverage": "box-coverage experiment",
    "birkhoff": "Birkhoff average along one orbit",
    "check": "re-validate a certificate file",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conecert", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in _PER_COMMAND.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        for key, (typ, _) in {**_COMMON, **opts}.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None)
        if name == "check":
            p.add_argument("path", nargs="?", help="certificate file")
    return parser


def _load_config(path: str, command: str) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    allowed = {**_COMMON, **_PER_COMMAND[command]}
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in allowed:
            raise UsageError(f"unknown config key {key!r}")
        out[k] = value
    return out


def _workers() -> int:
    raw = os.environ.get("CONECERT_THREADS")
    if raw is None:
        return 1
    try:
        val = int(raw)
    except ValueError:
        val = 0
    if val < 1:
        raise UsageError("CONECERT_THREADS must be a positive integer")
    return val


def _parse_cone(value) -> float | str:
    if value == "auto":
        return "auto"
    try:
        return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"--cone must be a number or 'auto', got {value!r}") from None


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Merge flags over an optional config file and validate preconditions."""
    ns = build_parser().parse_args(argv)
    command = ns.command
    values = {k: v for k, v in vars(ns).items() if v is not None}
    if ns.config:
        merged = _load_config(ns.config, command)
        merged.update({k: v for k, v in values.items() if k in {**_COMMON, **_PER_COMMAND[command]}})
        values = {**values, **merged}
    for key, (typ, default) in {**_COMMON, **_PER_COMMAND[command]}.items():
        values.setdefault(key, default)
        if values[key] is not None and typ in (int, float) and not isinstance(values[key], bool):
            try:
                values[key] = typ(values[key])
            except (TypeError, ValueError):
                raise UsageError(f"{key} must be {typ.__name__}") from None

    if values["m"] < 2:
        raise UsageError("--m must be >= 2")
    try:
        fmap = SkewProductMap(values["m"], parse_tau(str(values["tau"])))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = RunConfig(command=command, fmap=fmap, cone=_parse_cone(values["cone"]))
    cfg.out = Path(values["out"]) if values.get("out") else None
    cfg.workers = _workers()
    if "n" in values and values["n"] is not None:
        cfg.n = values["n"]
        if cfg.n < 1:
            raise UsageError("--n must be >= 1")
    if command == "min-order":
        cfg.n_max = values["n_max"]
        if not 1 <= cfg.n_max <= 20:
            raise UsageError("--n-max must be in 1..20")
    for key in ("min_width", "max_depth", "max_nodes"):
        if key in values:
            setattr(cfg, key, values[key])
            if values[key] <= 0:
                raise UsageError(f"--{key.replace('_', '-')} must be positive")
    cfg.refute = not values.get("no_refute", False)
    if command == "paper-pair" and cfg.n < 4:
        raise UsageError("paper-pair needs --n >= 4")
    if command == "dump-hn" and values["grid"] < 1:
        raise UsageError("--grid must be >= 1")
    if command == "check":
        path = getattr(ns, "path", None) or values.get("certificate")
        if not path:
            raise UsageError("check needs a certificate path")
        values["certificate"] = path
    if command == "coverage":
        try:
            values["box"] = Box(*(float(v) for v in str(values["box"]).split(",")))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad --box: {exc}") from None
    if command == "birkhoff":
        try:
            values["observable"] = Observable.parse(values["observable"])
            if values["start"] is not None:
                sx, sy = (float(v) for v in values["start"].split(","))
                values["start"] = (sx, sy)
        except ValueError as exc:
            raise UsageError(f"bad birkhoff option: {exc}") from None
    cfg.extra = values
    return cfg


def _print(doc: dict) -> None:
    sys.stdout.write(certio.format_json(doc) + "\n")


def _cert_summary(cert) -> dict:
    doc = {
        "status": cert.status.value,
        "n": cert.n,
        "cone_half_width": cert.half_width,
        "threshold": cert.threshold,
        "leaf_count": cert.stats.leaf_count,
        "max_depth": cert.stats.max_depth,
        "wall_ms": cert.stats.wall_ms,
    }
    if cert.refutation is not None:
        doc["refutation"] = {"x_lo": cert.refutation.lo, "x_hi": cert.refutation.hi}
    return doc


def run(cfg: RunConfig) -> int:
    cmd = cfg.command
    ex = cfg.extra
    opts = dict(min_width=cfg.min_width, max_depth=cfg.max_depth, max_nodes=cfg.max_nodes, workers=cfg.workers)

    if cmd == "verify":
        cert = certify(cfg.fmap, cfg.cone, cfg.n, refute_on_failure=cfg.refute, **opts)
        if cfg.out:
            certio.emit_certificate(cert, cfg.out)
        _print(_cert_summary(cert))
        return _STATUS_EXIT[cert.status]

    if cmd == "min-order":
        table = min_order(cfg.fmap, cfg.cone, cfg.n_max, **opts)
        _print(
            {
                "cone_half_width": table.half_width,
                "orders": {str(r.n): r.status.value for r in table.rows},
                "minimal_certified": table.minimal_certified,
            }
        )
        if table.minimal_certified is not None:
            return EXIT_OK
        if all(r.status is Status.FAILED for r in table.rows):
            return EXIT_FAILED
        return EXIT_UNDECIDED

    if cmd == "paper-pair":
        res = verify_paper_pair(cfg.n, ex.get("lam"))
        _print(
            {
                "status": res.status.value,
                "n": res.n,
                "pair": [res.pair.i, res.pair.j],
                "threshold": res.threshold,
                "infimum": [res.infimum.lo, res.infimum.hi],
                "hand_bound": res.hand_bound,
                "consistent_with_hand_bound": res.consistent_with_hand_bound,
                "leaf_count": len(res.leaves),
            }
        )
        return _STATUS_EXIT[res.status]

    if cmd == "admissibility":
        adm = cone_admissibility(cfg.fmap, cfg.cone)
        b = adm.bounds
        _print(
            {
                "cone_half_width": adm.half_width,
                "sup_tau_deriv": [adm.sup_tau_deriv.lo, adm.sup_tau_deriv.hi],
                "minimal_half_width": adm.sup_tau_deriv.hi / (cfg.fmap.m - 1),
                "chi_u_asymptotic": b.chi_u,
                "chi_c": b.chi_c,
                "chi_u_correction": b.correction,
                "chi_u_valid_from_n": b.valid_from,
            }
        )
        return EXIT_OK

    if cmd == "dump-hn":
        n, grid = cfg.n, ex["grid"]
        xs = np.arange(grid + 1) / grid
        vals = h_n(xs, n)
        fh = open(cfg.out, "w", newline="", encoding="utf-8") if cfg.out else sys.stdout
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "h_n"])
            for x, v in zip(xs, vals):
                w.writerow([repr(float(x)), repr(float(v))])
        finally:
            if cfg.out:
                fh.close()
        return EXIT_OK

    if cmd == "coverage":
        rep = box_coverage(cfg.fmap, ex["box"], ex["grid"], ex["samples"], ex["iterations"], ex["seed"])
        doc = rep.to_dict()
        _write_or_print(doc, cfg.out)
        return EXIT_OK

    if cmd == "birkhoff":
        rep = birkhoff(cfg.fmap, ex["observable"], ex["start"], ex["steps"], ex["seed"])
        _write_or_print(rep.to_dict(), cfg.out)
        return EXIT_OK

    if cmd == "check":
        try:
            res = certio.check_file(ex["certificate"])
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read certificate: {exc}") from None
        _print({"status": res.status, "valid": res.ok, "problems": res.problems})
        if not res.ok:
            return EXIT_FAILED
        return _STATUS_EXIT.get(Status(res.status), EXIT_UNDECIDED)

    raise UsageError(f"unknown command {cmd!r}")


def _write_or_print(doc: dict, out: Optional[Path]) -> None:
    if out:
        out.write_text(certio.format_json(doc) + "\n", encoding="utf-8")
    _print(doc)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (UsageError, InadmissibleCone) as exc:
        sys.stderr.write(f"conecert: error: {exc}\n")
        return EXIT_USAGE
    except BrokenPipeError:
        # output consumer went away (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
