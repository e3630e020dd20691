"""Batch experiment runner.

``bochner <kind> --config cfg.json [--out DIR] [--seed N] [--threads N]`` runs
one experiment and writes its artifacts plus ``manifest.json`` into the
output directory.  ``bochner verify`` runs the acceptance table.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver error.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .bundle import (constant_connection_cycle, random_connection, random_skew_field,
                     trivial_connection)
from .errors import BochnerError, MatchingFailure, SolverFailure, StructureViolation
from .gbundle import equivariant_spectrum, g_simplicity_report, xi_correspondence_check
from .lattice import DiscreteSection, lattice_from_descriptor
from .perturbation import simplify_spectrum
from .rigidity import pair_record, rigidity_report
from .spectral import TOL_ABS, TOL_REL, assemble_laplacian, cluster, eigensolve, track_curves

KINDS = ("spectrum", "curves", "split", "rigidity", "gbundle")
SOLVER_ERRORS = (SolverFailure, MatchingFailure, StructureViolation, np.linalg.LinAlgError)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 0}
_TOLS = {"tol_rel": {"type": "number", "minimum": 0}, "tol_abs": {"type": "number", "minimum": 0}}


def _closed(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}

CONFIG_SCHEMA = _closed({
    "base": {"oneOf": [
        _closed({"type": {"const": "cycle"}, "n": {"type": "integer", "minimum": 3},
                 "length": _POS}, ["type", "n", "length"]),
        _closed({"type": {"const": "torus"}, "nx": {"type": "integer", "minimum": 3},
                 "ny": {"type": "integer", "minimum": 3}, "lx": _POS, "ly": _POS},
                ["type", "nx", "ny", "lx", "ly"]),
    ]},
    "bundle": _closed({
        "rank": {"type": "integer", "minimum": 1},
        "connection": {"oneOf": [
            _closed({"type": {"const": "trivial"}}, ["type"]),
            _closed({"type": {"const": "constant"}, "generator": _MATRIX}, ["type", "generator"]),
            _closed({"type": {"const": "random"}, "magnitude": _POS}, ["type"]),
            _closed({"type": {"const": "file"}, "path": {"type": "string"}}, ["type", "path"]),
        ]},
    }, ["rank", "connection"]),
    "experiment": {"oneOf": [
        _closed({"kind": {"const": "spectrum"}, "count": {"type": "integer", "minimum": 1},
                 **_TOLS}, ["kind"]),
        _closed({"kind": {"const": "curves"},
                 "t_grid": {"type": "array", "items": _NUM, "minItems": 2},
                 "window": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
                 "field_magnitude": _POS, "field_path": {"type": "string"},
                 "min_overlap": {"type": "number", "minimum": 0, "maximum": 1}, **_TOLS},
                ["kind", "t_grid", "window"]),
        _closed({"kind": {"const": "split"}, "n": {"type": "integer", "minimum": 1},
                 "delta": _POS, "budget": {"type": "integer", "minimum": 1},
                 "trials": {"type": "integer", "minimum": 1}, "magnitude": _POS,
                 "t_max": _POS, "examine_pairs": {"type": "boolean"}, **_TOLS},
                ["kind", "n", "delta"]),
        _closed({"kind": {"const": "rigidity"},
                 "pairs": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "items": _INT,
                                     "minItems": 2, "maxItems": 2}},
                 "mode": {"enum": ["incident", "per_direction"]},
                 "verbose": {"type": "boolean"}, **_TOLS}, ["kind"]),
        _closed({"kind": {"const": "gbundle"}, "count": {"type": "integer", "minimum": 1},
                 "weights": {"type": "array", "items": {"type": "integer"}},
                 "fiber_radius": _POS, **_TOLS}, ["kind", "count"]),
    ]},
    "output_dir": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
}, ["base", "bundle", "experiment", "output_dir"])


class ConfigError(Exception):
    pass


def package_version() -> str:
    try:
        return version("bochner")
    except PackageNotFoundError:  # pragma: no cover - source checkout without install
        return "unknown"


def load_config(path: Path, kind: str, out: str | None, seed: int | None) -> dict:
    """Read, override and validate a config; raises ConfigError with a readable message."""
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = copy.deepcopy(cfg)
    if isinstance(cfg, dict):
        if out is not None:
            cfg["output_dir"] = out
        if seed is not None:
            cfg["seed"] = seed
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    if cfg["experiment"]["kind"] != kind:
        raise ConfigError(f"config describes a {cfg['experiment']['kind']!r} experiment, "
                          f"not {kind!r}")
    cfg.setdefault("seed", 0)
    cfg["_config_dir"] = str(Path(path).resolve().parent)
    return cfg


def config_hash(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    text = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _resolve(cfg: dict, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else Path(cfg["_config_dir"]) / p


def build_problem(cfg: dict):
    base = lattice_from_descriptor(cfg["base"])
    m = cfg["bundle"]["rank"]
    desc = cfg["bundle"]["connection"]
    kind = desc["type"]
    if kind == "trivial":
        conn = trivial_connection(base, m)
    elif kind == "constant":
        conn = constant_connection_cycle(base, np.array(desc["generator"], dtype=float))
    elif kind == "random":
        conn = random_connection(base, m, cfg["seed"], desc.get("magnitude", 1.0))
    else:
        try:
            conn = io.connection_from_json(_resolve(cfg, desc["path"]).read_text(), base)
        except OSError as exc:
            raise ConfigError(f"cannot read connection file: {exc}") from exc
    if conn.rank != m:
        raise ConfigError(f"connection has rank {conn.rank}, bundle declares {m}")
    return base, conn


def _tols(exp: dict) -> dict:
    return {"tol_rel": exp.get("tol_rel", TOL_REL), "tol_abs": exp.get("tol_abs", TOL_ABS)}


def run_spectrum(cfg, base, conn) -> dict[str, str]:
    exp = cfg["experiment"]
    eig = eigensolve(assemble_laplacian(base, conn), count=exp.get("count"))
    rows = []
    for cid, cl in enumerate(cluster(eig, **_tols(exp))):
        rows += [(cl.start + k, v, cid, cl.multiplicity) for k, v in enumerate(cl.values)]
    return {"spectrum.csv": io.csv_text(["index", "eigenvalue", "cluster_id", "multiplicity"],
                                        rows)}


def run_curves(cfg, base, conn) -> dict[str, str]:
    exp = cfg["experiment"]
    if "field_path" in exp:
        try:
            field = io.field_from_json(_resolve(cfg, exp["field_path"]).read_text(), base)
        except OSError as exc:
            raise ConfigError(f"cannot read field file: {exc}") from exc
    else:
        field = random_skew_field(base, conn.rank, cfg["seed"], exp.get("field_magnitude", 1.0))
    curves = track_curves(base, conn, field, exp["t_grid"], tuple(exp["window"]), **_tols(exp),
                          min_overlap=exp.get("min_overlap", 0.7))
    header = ["t", "branch_id", "eigenvalue", "overlap"]
    return {
        "curves.csv": io.csv_text(header, curves.rows()),
        "crossings.csv": io.csv_text(["t", "branch_a", "branch_b"], curves.crossings),
        "field.json": io.field_to_json(field) + "\n",
    }


def run_split(cfg, base, conn) -> dict[str, str]:
    exp = cfg["experiment"]
    keys = ("budget", "trials", "magnitude", "t_max", "examine_pairs", "tol_rel", "tol_abs")
    report = simplify_spectrum(base, conn, exp["n"], exp["delta"], seed=cfg["seed"],
                               **{k: exp[k] for k in keys if k in exp})
    return {"split_report.json": io.dumps17(report.to_dict()),
            "final_connection.json": io.connection_to_json(report.final_connection) + "\n"}


def run_rigidity(cfg, base, conn) -> dict[str, str]:
    exp = cfg["experiment"]
    eig = eigensolve(assemble_laplacian(base, conn))
    pairs = exp.get("pairs")
    if pairs is None:
        cl = next((c for c in cluster(eig, **_tols(exp))
                   if c.multiplicity > 1 and c.mean_eigenvalue > 1e-8), None)
        if cl is None:
            raise ConfigError("no nonzero degenerate cluster; give explicit pairs")
        pairs = [[a, b] for a in range(cl.start, cl.stop) for b in range(a + 1, cl.stop)]
    size = eig.values.size
    records = []
    for a, b in pairs:
        if a >= size or b >= size or a == b:
            raise ConfigError(f"pair {[a, b]} invalid for spectrum of size {size}")
        u = DiscreteSection.from_flat(eig.vectors[:, a], conn.rank)
        v = DiscreteSection.from_flat(eig.vectors[:, b], conn.rank)
        rep = rigidity_report(u, v, conn, base, mode=exp.get("mode", "incident"))
        rec = {"indices": [a, b], "eigenvalues": [eig.values[a], eig.values[b]],
               **pair_record(eig.vectors[:, a], eig.vectors[:, b], conn, base),
               **rep.to_dict(verbose=exp.get("verbose", False))}
        records.append(rec)
    return {"rigidity_report.json": io.dumps17({"pairs": records})}


def run_gbundle(cfg, base, conn) -> dict[str, str]:
    exp = cfg["experiment"]
    rep = g_simplicity_report(conn, base, exp["count"], **_tols(exp))
    rows = [(c.eigenvalue, c.real_mult, c.complex_mult, c.g_simple) for c in rep.clusters]
    corr = xi_correspondence_check(conn, base).to_dict()
    radius = exp.get("fiber_radius", 1.0)
    corr["weights"] = [
        {"weight": k, "fiber_radius": radius,
         "total_eigenvalues": equivariant_spectrum(base, conn, k, radius).total_eigs}
        for k in exp.get("weights", [1, -1])]
    corr["commutator"] = rep.commutator
    return {"gsimplicity.csv": io.csv_text(["eigenvalue", "real_mult", "complex_mult",
                                            "g_simple"], rows),
            "correspondence.json": io.dumps17(corr)}


RUNNERS = {"spectrum": run_spectrum, "curves": run_curves, "split": run_split,
           "rigidity": run_rigidity, "gbundle": run_gbundle}


def run(cfg: dict) -> dict[str, str]:
    """Build the problem and return the artifacts as ``{filename: text}``."""
    base, conn = build_problem(cfg)
    return RUNNERS[cfg["experiment"]["kind"]](cfg, base, conn)


def _write(out_dir: Path, artifacts: dict[str, str], manifest: dict) -> None:
    for name, text in artifacts.items():
        io.atomic_write(out_dir / name, text)
    io.atomic_write(out_dir / "manifest.json", io.dumps17(manifest))


def _experiment(args) -> int:
    try:
        cfg = load_config(args.config, args.command, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        artifacts = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except BochnerError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "tool": "bochner",
        "version": package_version(),
        "experiment": cfg["experiment"]["kind"],
        "config_hash": config_hash(cfg),
        "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
        "seed": cfg["seed"],
        "threads": args.threads,
        "outputs": sorted(artifacts),
        "wall_time_seconds": time.perf_counter() - t0,
    }
    out_dir = Path(cfg["output_dir"])
    if not out_dir.is_absolute():
        out_dir = Path.cwd() / out_dir
    _write(out_dir, artifacts, manifest)
    print(f"wrote {', '.join(sorted(artifacts))} and manifest.json to {out_dir}")
    return 0


def _verify(args) -> int:
    from .acceptance import run_all

    seed = 1 if args.seed is None else args.seed
    results = run_all(seed)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.out is not None:
        summary = [{"number": r.number, "name": r.name, "passed": r.passed,
                    "detail": r.detail, "values": r.values} for r in results]
        io.atomic_write(Path(args.out) / "verify.json", io.dumps17({"seed": seed,
                                                                   "criteria": summary}))
    return 0 if passed == len(results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bochner", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("verify",):
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, required=kind != "verify")
        p.add_argument("--out", help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides config seed)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS/LAPACK threads")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    handler = _verify if args.command == "verify" else _experiment
    if args.threads is None:
        return handler(args)
    with threadpool_limits(limits=args.threads):
        return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
