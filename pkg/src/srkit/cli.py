"""Command-line entry point.

Every command writes one report document (JSON, or CSV where tabular).
Exit status: 0 success, 2 configuration error, 3 violated numerical
invariant (named in the diagnostic).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import (
    Algebra, DirectSum, FullMatrix, SampledField, Tuple, algebra_from_doc, disk_field, interval_field,
    random_element,
)
from .errors import ContractViolation, FormulaError
from .linalg import matrix_to_doc


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def load_algebra(spec: str | None, mesh_res: int | None) -> Algebra:
    """Algebra from a JSON spec file or a built-in name.

    Built-ins: ``disk``, ``interval``, ``matrix:K``, ``directsum:K1,K2,...``.
    """
    if spec is None:
        raise ConfigError("--algebra is required")
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise ConfigError(f"algebra spec file {spec!r} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"algebra spec {spec!r} is not valid JSON: {exc}") from exc
        if mesh_res is not None and doc.get("kind") == "SampledField":
            doc = dict(doc, resolution=mesh_res)
        try:
            return algebra_from_doc(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed algebra spec: {exc}") from exc
    name, _, arg = spec.partition(":")
    try:
        if name == "disk":
            return disk_field(mesh_res or 64, int(arg or 1))
        if name == "interval":
            return interval_field(mesh_res or 256, int(arg or 1))
        if name == "matrix":
            return FullMatrix(int(arg))
        if name == "directsum":
            return DirectSum([int(b) for b in arg.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad algebra argument in {spec!r}") from exc
    raise ConfigError(f"unknown algebra {spec!r}")


def pick_element(alg: Algebra, n: int, name: str | None, seed: int) -> tuple:
    if name in (None, "random"):
        if name is None and alg.is_field:
            name = "coordinate"
        else:
            return "random", random_element(alg, n, seed)
    if name.startswith("scaled:"):
        factor, _, base = name[len("scaled:"):].partition(":")
        label, t = pick_element(alg, n, base or None, seed)
        return name, t * float(factor)
    for label, t in alg.catalog(n):
        if label == name:
            return label, t
    raise ConfigError(f"unknown element {name!r}; choose from {[l for l, _ in alg.catalog(n)]} or 'random'")


def _write(report: dict, args, csv_text: str | None = None) -> None:
    if args.format == "csv":
        if csv_text is None:
            raise ConfigError(f"command {args.command!r} has no CSV form")
        text = csv_text
    else:
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _envelope(args, result: dict) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {
        "command": args.command,
        "config": config,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "result": result,
    }


# ------------------------------------------------------------------ commands


def cmd_verify_lemmas(args):
    from .suites import shift_suite, section_suite, distance_suite

    n1 = args.instances
    suites = [
        shift_suite(n1, args.seed),
        section_suite(max(1, n1 // 2), args.seed, tol=args.tolerance or 1e-7),
        distance_suite(max(1, n1 // 2), args.seed),
    ]
    ok = (
        suites[0]["passed"] == suites[0]["instances"]
        and suites[1]["passed"] == suites[1]["instances"]
        and suites[2]["bound_passed"] == suites[2]["bound_checks"]
        and suites[2]["section_consistent"] == suites[2]["section_levels"]
    )
    return {"suites": suites, "all_passed": ok}, None, (0 if ok else 3)


def _dist(args):
    from .stablerank import dist_to_lg

    alg = load_algebra(args.algebra, args.mesh_res)
    label, a = pick_element(alg, args.n, args.element, args.seed)
    cert = dist_to_lg(a, budget=args.budget)
    return alg, label, a, cert


def cmd_dist(args):
    alg, label, a, cert = _dist(args)
    doc = {"algebra": alg.to_doc(), "element": label, "norm": a.norm(), "certificate": cert.to_doc()}
    return doc, None, 0


def cmd_witness(args):
    from .stablerank import dist_to_lg, max_distance_witness

    alg, label, a, cert = _dist(args)
    b = max_distance_witness(a, cert)
    recert = dist_to_lg(b, budget=args.budget)
    doc = {
        "algebra": alg.to_doc(),
        "element": label,
        "certificate": cert.to_doc(),
        "witness_norm": b.norm(),
        "witness_certificate": recert.to_doc(),
    }
    if not alg.is_field:
        doc["witness"] = [matrix_to_doc(m) for m in b.data[0]]
    return doc, None, 0


def cmd_phi(args):
    from .logic import build_phi_n, eval_formula

    alg = load_algebra(args.algebra, args.mesh_res)
    r = eval_formula(alg, build_phi_n(args.n), args.budget, seed=args.seed)
    doc = {"algebra": alg.to_doc(), "n": args.n, "phi": r.to_doc(), "in_band": r.in_band()}
    return doc, None, (3 if r.in_band() else 0)


def cmd_sr(args):
    from .stablerank import estimate_sr

    alg = load_algebra(args.algebra, args.mesh_res)
    est = estimate_sr(alg, args.n, args.budget, seed=args.seed)
    return {"algebra": alg.to_doc(), "n_max": args.n, **est.to_doc()}, None, 0


def cmd_kk(args):
    from .kk import Subalgebra, kk_distance, perturb_algebra

    a = Subalgebra.from_algebra(load_algebra(args.algebra, None))
    if args.other:
        b = Subalgebra.from_algebra(load_algebra(args.other, None))
    else:
        b = perturb_algebra(a, args.eps, args.seed)
    cert = kk_distance(a, b, args.budget, seed=args.seed)
    return {"a": a.to_doc(), "b": b.to_doc(), "certificate": cert.to_doc()}, None, 0


def cmd_perturb_experiment(args):
    from .kk import disk_pairs, matrix_pairs, report_to_csv, sr_stability_experiment

    pairs = matrix_pairs(args.pairs, args.eps, args.seed)
    pairs += disk_pairs(args.disk_pairs, args.eps, args.mesh_res or 64, args.seed)
    report = sr_stability_experiment(pairs, args.n, budget=args.budget, seed=args.seed, threshold=2 * args.eps + 1e-6)
    return report, report_to_csv(report), 0


def cmd_parse(args):
    from .logic import parse_formula, to_text

    texts = []
    if args.formula:
        texts.append(args.formula)
    if args.corpus:
        p = Path(args.corpus)
        if not p.exists():
            raise ConfigError(f"corpus file {args.corpus!r} does not exist")
        texts += [line.strip() for line in p.read_text().splitlines() if line.strip() and not line.startswith("#")]
    if not texts:
        raise ConfigError("parse needs --formula or --corpus")
    rows = []
    for t in texts:
        f = parse_formula(t)
        canon = to_text(f)
        rows.append({"input": t, "canonical": canon, "round_trip": parse_formula(canon) == f})
    ok = all(r["round_trip"] for r in rows)
    return {"formulas": rows, "all_round_trip": ok}, None, (0 if ok else 3)


COMMANDS = {
    "verify-lemmas": cmd_verify_lemmas,
    "dist": cmd_dist,
    "witness": cmd_witness,
    "phi": cmd_phi,
    "sr": cmd_sr,
    "kk": cmd_kk,
    "perturb-experiment": cmd_perturb_experiment,
    "parse": cmd_parse,
}


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srkit", description="Stable rank and distance certificates.")
    p.add_argument("--version", action="version", version=f"srkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--algebra")
        s.add_argument("--n", type=_positive, default=None)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--budget", type=_positive, default=None)
        s.add_argument("--mesh-res", type=_positive, default=None)
        s.add_argument("--out")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--tolerance", type=float, default=None)
        if name in ("dist", "witness"):
            s.add_argument("--element", help="catalog name, 'random', or 'scaled:T:NAME'")
        if name == "verify-lemmas":
            s.add_argument("--instances", type=_positive, default=1000)
        if name == "kk":
            s.add_argument("--other")
            s.add_argument("--eps", type=float, default=0.01)
        if name == "perturb-experiment":
            s.add_argument("--pairs", type=int, default=50)
            s.add_argument("--disk-pairs", type=int, default=10)
            s.add_argument("--eps", type=float, default=0.01)
        if name == "parse":
            s.add_argument("--formula")
            s.add_argument("--corpus")
    return p


_DEFAULTS = {
    "dist": {"n": 1, "budget": 256},
    "witness": {"n": 1, "budget": 256},
    "phi": {"n": 1, "budget": 32},
    "sr": {"n": 3, "budget": 32},
    "kk": {"budget": 64},
    "perturb-experiment": {"n": 2, "budget": 16},
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for key, val in _DEFAULTS.get(args.command, {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    try:
        result, csv_text, status = COMMANDS[args.command](args)
        _write(_envelope(args, result), args, csv_text)
        return status
    except (ConfigError, FormulaError) as exc:
        print(f"srkit: configuration error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"srkit: invariant violated [{exc.invariant}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
