"""``bethepoly`` command line: one subcommand per library entry point.

Reports go to stdout (JSON by default, ``field,value`` CSV with ``--format csv``);
logs go to stderr. Exit codes: 0 success, 2 a guaranteed inequality
failed, 3 enumeration budget exceeded, 4 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BetheError, BudgetExceeded, ParseError

log = logging.getLogger("bethepoly")

EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_BUDGET = 3
EXIT_INPUT = 4


class AssertionFailure(Exception):
    def __init__(self, report: dict):
        super().__init__("assertion failed")
        self.report = report


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "value") and hasattr(v, "name"):  # enums
        return v.value
    return v


def _flatten(prefix: str, v, rows: list):
    if isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), x, rows)
    elif isinstance(v, list) and v and any(isinstance(x, (dict, list)) for x in v):
        for i, x in enumerate(v):
            _flatten(f"{prefix}[{i}]", x, rows)
    else:
        rows.append((prefix, json.dumps(v) if isinstance(v, list) else v))


def render(report: dict, fmt: str) -> str:
    report = _jsonable(report)
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    rows: list = []
    _flatten("", report, rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    w.writerows(rows)
    return buf.getvalue()


def _read(path: str) -> tuple[str, str]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return data.decode("utf-8"), hashlib.sha256(data).hexdigest()


def _graph(args):
    from .graph import parse

    text, digest = _read(args.graph)
    return parse(text), digest


def _edge_map(g, values) -> dict:
    return {e.id: float(v) for e, v in zip(g.edges, values)}


def cmd_z_exact(args) -> dict:
    from .exact import exact_marginals, partition_function

    g, digest = _graph(args)
    z = partition_function(g, args.budget_bits)
    out = {"input_digest": digest, "Z": z, "log_Z": float(np.log(z)) if z > 0 else float("-inf")}
    out["marginals"] = _edge_map(g, exact_marginals(g, args.budget_bits)) if z > 0 else None
    return out


def _bethe_cfg(args, **over):
    from .bethe import BetheConfig

    kw = dict(starts=args.starts, seed=args.seed, tol=args.tol, method=getattr(args, "method", "poly"))
    kw.update(over)
    return BetheConfig(**kw)


def _bethe_summary(g, res) -> dict:
    from .bethe import certificate_value

    return {
        "log_Z_B": res.log_value,
        "Z_B": res.value,
        "method": res.method.value,
        "beta_star": res.beta_star,
        "certificate_value": certificate_value(g, res),
        "diagnostics": {k: v for k, v in res.diagnostics.items() if k != "start_values"},
    }


def cmd_bethe(args) -> dict:
    from .bethe import bethe_solve

    g, digest = _graph(args)
    res = bethe_solve(g, _bethe_cfg(args))
    return {"input_digest": digest, **_bethe_summary(g, res)}


def _stability(g, seed) -> dict:
    from .poly import from_local_table
    from .stability import stability_check

    out = {}
    for f in g.factors:
        labels = [g.edges[e].id for e in g.incidence[f]]
        out[f] = stability_check(from_local_table(g.tables[f], labels), seed=seed).as_dict()
    return out


def cmd_verify(args) -> dict:
    from .bethe import bethe_solve
    from .errors import NotBipartite
    from .exact import partition_function
    from .graph import bipartition, make_bipartite
    from .ipc import ipc_from_graph

    g, digest = _graph(args)
    try:
        bipartition(g)
        h, transformed = g, False
    except NotBipartite:
        h, transformed = make_bipartite(g), True
    verdicts = _stability(h, args.seed)
    all_stable = all(v["status"] == "Stable" for v in verdicts.values())
    z = partition_function(g, args.budget_bits)
    res = bethe_solve(g, _bethe_cfg(args))
    out = {
        "input_digest": digest,
        "bipartized": transformed,
        "stability": verdicts,
        "all_stable": all_stable,
    }
    if h.num_edges <= 13 and z > 0:
        out["ipc"] = ipc_from_graph(h, trials=args.trials, seed=args.seed).as_dict()
    else:
        out["ipc"] = None
    out["Z"] = z
    out.update(_bethe_summary(g, res))
    if all_stable:
        holds = bool(res.value <= z * (1 + 1e-6))
        out["Z_B <= Z"] = holds
        out["status"] = "PASS" if holds and (out["ipc"] is None or out["ipc"]["passed"]) else "FAIL"
        if out["status"] == "FAIL":
            raise AssertionFailure(out)
    else:
        out["Z_B <= Z"] = None
        out["status"] = "NOT-ASSERTED"
    return out


def cmd_ipc_check(args) -> dict:
    from .ipc import ipc_from_graph

    g, digest = _graph(args)
    rep = ipc_from_graph(g, trials=args.trials, seed=args.seed).as_dict()
    return {"input_digest": digest, **rep}


def cmd_stability_check(args) -> dict:
    g, digest = _graph(args)
    verdicts = _stability(g, args.seed)
    return {"input_digest": digest, "verdicts": verdicts, "all_stable": all(v["status"] == "Stable" for v in verdicts.values())}


def cmd_bp(args) -> dict:
    from .bethe import bethe_objective
    from .bp import beliefs, bp_run, stationarity_residual
    from .errors import BoundaryPoint
    from .exact import partition_function

    g, digest = _graph(args)
    run = bp_run(g, init=args.init, seed=args.seed, damping=args.damping, max_iters=args.max_iters, tol=args.bp_tol)
    pm = beliefs(g, run.messages)
    out = {
        "input_digest": digest,
        "converged": run.converged,
        "iterations": run.iterations,
        "residual": run.residual,
        "beliefs": pm.beta,
    }
    try:
        out["free_energy"] = bethe_objective(g, pm)
    except BetheError as exc:
        out["free_energy"] = None
        log.warning("beliefs are not a valid pseudo-marginal: %s", exc)
    try:
        out["stationarity_residual"] = stationarity_residual(g, pm)
    except BoundaryPoint:
        out["stationarity_residual"] = None
    if g.num_edges <= args.budget_bits:
        z = partition_function(g, args.budget_bits)
        out["log_Z"] = float(np.log(z)) if z > 0 else float("-inf")
    return out


def cmd_covers(args) -> dict:
    from .covers import cover_inequality_check, sample_cover_estimate

    g, digest = _graph(args)
    est = sample_cover_estimate(g, args.k, args.samples, args.seed, args.budget_bits)
    chk = cover_inequality_check(g, args.k, args.samples, args.seed, args.budget_bits)
    return {
        "input_digest": digest,
        "k": args.k,
        "estimate": est.estimate,
        "Z": chk.z,
        "samples": est.samples,
        "violations": chk.violations,
    }


def cmd_permanent(args) -> dict:
    from .bethe import BetheConfig
    from .permanent import DSConfig, verify_permanent_bounds

    text, digest = _read(args.matrix)
    try:
        A = np.array(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ParseError(f"matrix file is not an array of arrays of numbers: {exc}") from None
    rep = verify_permanent_bounds(
        A,
        BetheConfig(starts=min(args.starts, 8), seed=args.seed, tol=args.tol),
        DSConfig(seed=args.seed),
    ).as_dict()
    out = {"input_digest": digest, **rep}
    if not rep["passed"]:
        raise AssertionFailure(out)
    return out


COMMANDS = {
    "z-exact": cmd_z_exact,
    "bethe": cmd_bethe,
    "verify": cmd_verify,
    "ipc-check": cmd_ipc_check,
    "stability-check": cmd_stability_check,
    "bp": cmd_bp,
    "covers": cmd_covers,
    "permanent": cmd_permanent,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--starts", type=int, default=64)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--budget-bits", type=int, default=24)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=None, help="parallelism cap; results do not depend on it")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bethepoly", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("z-exact", "verify", "ipc-check", "stability-check"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("graph")
    s = sub.add_parser("bethe", parents=[common])
    s.add_argument("graph")
    s.add_argument("--method", choices=("poly", "marginal", "grid"), default="poly")
    s = sub.add_parser("bp", parents=[common])
    s.add_argument("graph")
    s.add_argument("--damping", type=float, default=0.5)
    s.add_argument("--max-iters", type=int, default=10000)
    s.add_argument("--bp-tol", type=float, default=1e-10)
    s.add_argument("--init", choices=("uniform", "random"), default="uniform")
    s = sub.add_parser("covers", parents=[common])
    s.add_argument("graph")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--samples", type=int, default=20)
    s = sub.add_parser("permanent", parents=[common])
    s.add_argument("--matrix", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    header = {"command": args.command, "version": __version__, "seed": args.seed}
    start = time.perf_counter()
    code = EXIT_OK
    try:
        body = COMMANDS[args.command](args)
    except AssertionFailure as exc:
        body, code = exc.report, EXIT_ASSERTION
        log.error("assertion failed")
    except BudgetExceeded as exc:
        log.error("%s", exc)
        body, code = {"error": "BudgetExceeded", "message": str(exc)}, EXIT_BUDGET
    except (BetheError, ValueError) as exc:
        log.error("%s", exc)
        body, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_INPUT
    report = {**header, **body, "wall_time": time.perf_counter() - start}
    sys.stdout.write(render(report, args.format))
    return code


if __name__ == "__main__":
    sys.exit(main())
