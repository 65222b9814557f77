"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 3 negative verdict,
4 tolerance or convergence failure, 5 violated hypothesis.

Every run emits a manifest (command, resolved flags, seed, version, input
digests, wall time, outcome).  With ``--report`` the result body and the
manifest go to that file; otherwise the body is printed to stdout and the
manifest to stderr, one JSON line each.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import bipartite, chart as chart_mod, inverse_free, synthesis
from .errors import (
    ExactGateError,
    HypothesisViolation,
    NeighborhoodCollapse,
    NoConvergence,
    PrimitiveGate,
    ScanLimitExceeded,
    SpanFailure,
    SynthesisBudgetExhausted,
    ToleranceExceeded,
)
from .formats import FormatError, file_digest, load_matrix, read_json, write_json
from .rng import stream
from .tolerances import Tolerances
from .unitary_core import Flavor, distance, haar_unitary, validate_unitary
from .wordlang import evaluate, inverse_free as is_inverse_free, word_from_json, word_to_json

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_TOLERANCE, EXIT_HYPOTHESIS = 0, 1, 3, 4, 5

REPORT_SCHEMA = "exactgate.report/1"
BENCH_SCHEMA = "exactgate.bench/1"
BENCH_COLUMNS = ["schema", "kind", "eps", "n_median", "n_p90", "L", "achieved", "wall_ms"]


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    flags: dict
    seed: int | None
    version: str = __version__
    inputs: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0
    outcome: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- helpers

def _matrix_arg(value: str, manifest: RunManifest, key: str) -> np.ndarray:
    p = Path(value)
    if not p.exists():
        try:
            return bipartite.named_gate(value)
        except KeyError:
            raise UsageError(f"{key}: no such file or built-in gate: {value}") from None
    manifest.inputs[key] = {"path": str(p), "sha256": file_digest(p)}
    return load_matrix(p)


def _shape(args) -> bipartite.BipartiteShape:
    try:
        return bipartite.BipartiteShape(*args.dims)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _tolerances() -> Tolerances:
    try:
        return Tolerances.from_env()
    except (OSError, ValueError) as exc:
        raise UsageError(f"tolerance registry: {exc}") from None


def _gate(args, manifest, tol):
    m = _matrix_arg(args.gate, manifest, "gate")
    shape = _shape(args)
    if m.shape != (shape.total, shape.total):
        raise UsageError(f"gate is {m.shape[0]}x{m.shape[1]} but dims give {shape.total}")
    validate_unitary(m, tol.unitarity)
    return m, shape


def _alphabet(args, manifest, tol):
    v, shape = _gate(args, manifest, tol)
    h = None
    if getattr(args, "hamiltonian", None):
        h = _matrix_arg(args.hamiltonian, manifest, "hamiltonian")
    return synthesis.bipartite_alphabet(v, shape, h)


# ---------------------------------------------------------------- commands

def cmd_imprimitive(args, manifest, tol) -> tuple[int, dict]:
    v, shape = _gate(args, manifest, tol)
    verdict = bipartite.is_imprimitive(v, shape, tol, seed=args.seed)
    return (EXIT_OK if verdict.imprimitive else EXIT_NEGATIVE), verdict.to_json()


def cmd_invpow(args, manifest, tol) -> tuple[int, dict]:
    u = _matrix_arg(args.gate, manifest, "gate")
    validate_unitary(u, tol.unitarity)
    fl = Flavor.parse(args.flavor)
    res = inverse_free.inverse_power(u, args.eps, fl, args.scan_limit, args.method)
    out = res.to_json()
    out["verified_distance"] = inverse_free.verify_inverse_power(u, res, fl)
    return EXIT_OK, out


def _build(args, alphabet, tol):
    cfg = synthesis.SynthesisConfig(seed=args.seed)
    return synthesis.prepare(alphabet, args.flavor, args.seed, "H", cfg, tol)


def cmd_chart(args, manifest, tol) -> tuple[int, dict]:
    alphabet = _alphabet(args, manifest, tol)
    ch, nb = _build(args, alphabet, tol)
    write_json(args.out, chart_mod.chart_to_json(ch, nb))
    return EXIT_OK, {
        "out": str(args.out),
        "m": ch.m,
        "sigma_min": ch.sigma_min,
        "sigma_min_tilde": ch.sigma_min_tilde,
        "delta": nb.delta,
        "n": synthesis.covering_count(nb.delta),
        "ell": nb.ell,
        "ell_prime": nb.ell_prime,
    }


def _load_chart(args, alphabet, manifest, tol):
    manifest.inputs["chart"] = {"path": str(args.chart), "sha256": file_digest(args.chart)}
    ch, nb = chart_mod.chart_from_json(read_json(args.chart))
    if not ch.alphabet.compatible(alphabet) or ch.flavor is not Flavor.parse(args.flavor):
        raise UsageError("chart was built for a different gate, generator, dims or flavor")
    if nb is None:
        raise UsageError("chart file has no certified neighbourhood")
    return ch, nb


def cmd_synthesize(args, manifest, tol) -> tuple[int, dict]:
    tol = tol.replace(exact=args.tol)
    alphabet = _alphabet(args, manifest, tol)
    target = _matrix_arg(args.target, manifest, "target")
    if target.shape != (alphabet.dim, alphabet.dim):
        raise UsageError(f"target is {target.shape[0]}x{target.shape[1]}, alphabet acts on {alphabet.dim}")
    validate_unitary(target, tol.unitarity)
    fl = Flavor.parse(args.flavor)

    if args.verify_only:
        if not args.word:
            raise UsageError("--verify-only needs --word")
        manifest.inputs["word"] = {"path": str(args.word), "sha256": file_digest(args.word)}
        word = word_from_json(read_json(args.word), alphabet)
        achieved = distance(evaluate(word), target, fl)
        out = {"achieved": achieved, "L": len(word), "v_count": word.v_count,
               "inverse_free": is_inverse_free(word), "tol": args.tol}
        return (EXIT_OK if achieved <= args.tol else EXIT_TOLERANCE), out

    synthesis.certify_universality_inputs(alphabet, "H", fl, tol)
    if args.chart:
        ch, nb = _load_chart(args, alphabet, manifest, tol)
    else:
        ch, nb = _build(args, alphabet, tol)
    res = synthesis.exact_synthesize(target, ch, nb, tol)
    if args.emit:
        write_json(args.emit, word_to_json(res.word))
    d = res.diagnostics
    out = {
        "achieved": res.achieved,
        "L": res.length_L,
        "v_count": res.v_count,
        "n": d["n"],
        "delta": d["delta"],
        "ell": d["ell"],
        "ell_prime": d["ell_prime"],
        "length_bound": d.get("length_bound"),
        "newton_iters": d["newton_iters"],
        "wall_time_ms": d["wall_time_ms"],
    }
    if "phase_alignment" in d:
        out["phase_alignment"] = d["phase_alignment"]
    return EXIT_OK, out


def _quantiles(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    return float(np.median(a)), float(np.percentile(a, 90))


def bench_inverse_power(eps_grid, n_seeds: int, dim: int, seed: int) -> list[dict]:
    """One row per ``eps``; the same ``n_seeds`` Haar samples are reused for every ``eps``."""
    rng = stream(seed, "bench")
    samples = [haar_unitary(dim, rng) for _ in range(n_seeds)]
    rows = []
    for eps in eps_grid:
        t0 = time.perf_counter()
        res = [inverse_free.inverse_power(u, eps, Flavor.FULL) for u in samples]
        wall = 1e3 * (time.perf_counter() - t0)
        med, p90 = _quantiles([r.exponent for r in res])
        rows.append({"schema": BENCH_SCHEMA, "kind": "inverse_power", "eps": eps, "n_median": med, "n_p90": p90,
                     "L": "", "achieved": max(r.achieved_distance for r in res), "wall_ms": wall})
    return rows


def fitted_constant(rows, dim: int) -> float:
    """Smallest ``c`` with ``n_median <= c / eps^dim`` on every row."""
    return max(r["n_median"] * r["eps"] ** dim for r in rows)


def cmd_bench(args, manifest, tol) -> tuple[int, dict]:
    grid = sorted(set(args.eps_grid), reverse=True)
    if not grid:
        raise UsageError("empty eps grid")
    if any(not 0 < e < 1 for e in grid):
        raise UsageError("eps values must lie in (0, 1)")
    rows = bench_inverse_power(grid, args.seeds, args.dim, args.seed)
    c = fitted_constant(rows, args.dim)
    if args.targets:
        alphabet = _alphabet(args, manifest, tol)
        ch, nb = _build(args, alphabet, tol)
        rng = stream(args.seed, "bench-targets")
        dim = alphabet.dim
        results, walls = [], []
        for _ in range(args.targets):
            t0 = time.perf_counter()
            results.append(synthesis.exact_synthesize(haar_unitary(dim, rng), ch, nb, tol))
            walls.append(1e3 * (time.perf_counter() - t0))
        n_cover = results[0].diagnostics["n"]
        rows.append({"schema": BENCH_SCHEMA, "kind": "exact_synthesize", "eps": tol.exact, "n_median": n_cover,
                     "n_p90": n_cover, "L": max(r.length_L for r in results),
                     "achieved": max(r.achieved for r in results), "wall_ms": float(np.median(walls))})
    with open(args.out, "w", newline="", encoding="utf-8") if args.out else _stdout() as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    medians = [r["n_median"] for r in rows if r["kind"] == "inverse_power"]
    return EXIT_OK, {
        "rows": len(rows),
        "fitted_c": c,
        # rows run from the largest eps down
        "n_median_nonincreasing_in_eps": all(a <= b for a, b in zip(medians, medians[1:])),
    }


class _stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        return False


# ---------------------------------------------------------------- parser

def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", type=Path, help="write a JSON report (with manifest) here")


def _add_gate(p, dims=True, h=False):
    p.add_argument("--gate", required=True, help="matrix JSON file or built-in name (cnot, cz, swap, identity)")
    if dims:
        p.add_argument("--dims", type=int, nargs=2, metavar=("DA", "DB"), default=[2, 2])
    if h:
        p.add_argument("--hamiltonian", help="generator H as matrix JSON (default diag(1,0,..) (x) I)")


def _add_flavor(p):
    p.add_argument("--flavor", choices=["pu", "u"], default="pu")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exactgate", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"exactgate {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("imprimitive", help="decide whether V entangles some product state")
    _add_gate(p)
    _add_common(p)
    p.set_defaults(func=cmd_imprimitive)

    p = sub.add_parser("invpow", help="find n with U^n close to U^-1")
    _add_gate(p, dims=False)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--scan-limit", type=int)
    p.add_argument("--method", choices=["scan", "pigeonhole"], default="scan")
    p.add_argument("--flavor", choices=["pu", "u"], default="u")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_invpow)

    p = sub.add_parser("chart", help="build and export a certified chart and identity neighbourhood")
    _add_gate(p, h=True)
    _add_flavor(p)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_chart)

    p = sub.add_parser("synthesize", help="exact inverse-free word for a target")
    p.add_argument("--target", required=True)
    _add_gate(p, h=True)
    _add_flavor(p)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--chart", type=Path)
    p.add_argument("--emit", type=Path, help="write the word JSON here")
    p.add_argument("--verify-only", action="store_true")
    p.add_argument("--word", type=Path, help="word to check with --verify-only")
    _add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("bench", help="inverse-power scaling (and optionally exact synthesis) as CSV")
    p.add_argument("--eps-grid", type=float, nargs="*", default=[0.3, 0.1, 0.03, 0.01])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--targets", type=int, default=0, help="exact-synthesis targets (0 skips that row)")
    p.add_argument("--gate", default="cnot")
    p.add_argument("--dims", type=int, nargs=2, default=[2, 2])
    p.add_argument("--hamiltonian")
    _add_flavor(p)
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (HypothesisViolation, PrimitiveGate, SpanFailure)):
        return EXIT_HYPOTHESIS
    if isinstance(exc, (ToleranceExceeded, NoConvergence, NeighborhoodCollapse, SynthesisBudgetExhausted)):
        return EXIT_TOLERANCE
    if isinstance(exc, ScanLimitExceeded):
        return EXIT_NEGATIVE
    return EXIT_USAGE


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    flags = {k: _jsonable(v) for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(args.command, flags, getattr(args, "seed", None))
    t0 = time.perf_counter()
    body: dict = {}
    try:
        tol = _tolerances()
        code, body = args.func(args, manifest, tol)
        manifest.outcome = {"exit": code, "status": "ok" if code == EXIT_OK else "negative"}
    except (UsageError, FormatError, OSError) as exc:
        code = EXIT_USAGE
        manifest.outcome = {"exit": code, "error": type(exc).__name__, "message": str(exc)}
    except ExactGateError as exc:
        code = _exit_code(exc)
        manifest.outcome = {"exit": code, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, HypothesisViolation):
            manifest.outcome["clause"] = exc.clause
    manifest.wall_time_ms = 1e3 * (time.perf_counter() - t0)
    if code != EXIT_OK and "message" in manifest.outcome:
        print(f"exactgate {args.command}: {manifest.outcome['message']}", file=sys.stderr)

    if args.report:
        try:
            write_json(args.report, {"schema": REPORT_SCHEMA, **body, "manifest": manifest.to_json()})
        except OSError as exc:
            print(f"exactgate: cannot write report: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        if body:
            # bench without --out owns stdout for its CSV
            csv_on_stdout = args.command == "bench" and not args.out
            print(json.dumps({"schema": REPORT_SCHEMA, **body}), file=sys.stderr if csv_on_stdout else sys.stdout)
        print(json.dumps({"manifest": manifest.to_json()}), file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
