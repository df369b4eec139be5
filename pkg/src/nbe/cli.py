"""Command-line interface: ``nbe <command> --config run.toml [overrides]``.

Every command writes ``<prefix>_<command>.csv`` (fixed columns, sorted rows)
and a JSON sidecar with diagnostics and provenance into the output
directory.  Exit status: 0 success, 1 unexpected internal error, 2 bad
configuration, 3 infeasible computation, 4 invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, build, load_config
from .cover import (
    ConfigurationError,
    CoverProblem,
    DegenerateCoverError,
    IntegralityDefect,
    fractional_cover_cost,
    frostman_measure,
    integral_cover_cost,
)
from .cover.oracle import GuardExceeded, brute_force_cover, lp_cover, random_instance
from .cover.partial import DualityGapWarning
from .estimators import (
    InfeasibleError,
    brin_katok_entropy,
    critical_exponent,
    default_n_schedule,
    extrapolate,
    katok_entropy,
    spanning_entropy,
    variational_sandwich,
)
from .estimators.verify import default_measure

COLUMNS = ["quantity", "epsilon", "delta", "n_min", "n_max", "value", "lo", "hi", "converged"]
COMMANDS = ["entropy", "katok", "brin-katok", "spanning", "frostman", "sandwich",
            "oracle-check", "sweep"]
EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3, 4
#: quantities measured in nats, rescaled by ``--display-base``
ENTROPY_LIKE = {"bowen", "bowen_limit", "katok", "brin_katok", "brin_katok_limit", "spanning",
                "spanning_limit", "sandwich_s_star", "sandwich_bk_frostman", "sandwich_katok"}


class InvariantBreach(RuntimeError):
    """A computed result contradicts a guaranteed identity or bound."""

    def __init__(self, message: str, rows=None, details=None):
        super().__init__(message)
        self.rows, self.details = rows or [], details or {}


def _category(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, ConfigurationError, GuardExceeded)):
        return EXIT_CONFIG
    if isinstance(exc, (InfeasibleError, DegenerateCoverError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, (InvariantBreach, IntegralityDefect, DualityGapWarning)):
        return EXIT_INVARIANT
    return EXIT_INTERNAL


def _row(quantity, eps, delta, n_min, n_max, value, lo=None, hi=None, converged=True) -> dict:
    return dict(zip(COLUMNS, (quantity, eps, delta, n_min, n_max, value, lo, hi, bool(converged))))


def _measure_for(cfg: RunConfig):
    mu = cfg.measure or default_measure(cfg.shift, cfg.subset)
    if mu is None:
        raise ConfigError("this command needs a [measure] block")
    return mu


# ---------------------------------------------------------------- cells
# A cell computes one (quantity, eps, delta, n_min) combination and returns
# (rows, details).  Cells are independent and may run in worker processes.

def cell_entropy(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    est = critical_exponent(cfg.shift, cfg.subset, eps, n_min, c["n_max"], c["tol"], c["ball"],
                            c["precision"], c.get("n_min_schedule", ()))
    row = _row("bowen", eps, None, n_min, c["n_max"], est.s_star, *est.bracket, est.converged)
    return [row], est.to_dict()


def cell_katok(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    tab = katok_entropy(_measure_for(cfg), eps, [delta], n_min, c["n_max"], c["tol"], c["ball"],
                        c["gap_tol"])
    est = tab.rows[0]
    return [_row("katok", eps, delta, n_min, c["n_max"], est.s_star, *est.bracket,
                 est.converged)], est.to_dict()


def cell_brin_katok(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    sched = c.get("n_schedule") or default_n_schedule(n_min, c["n_max"])
    rep = brin_katok_entropy(_measure_for(cfg), eps, c["mode"], c["samples"], c.get("seed", 0),
                             sched, c["ball"])
    return [_row("brin_katok", eps, None, n_min, c["n_max"], rep.estimate, *rep.ci)], rep.to_dict()


def cell_spanning(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    sched = c.get("n_schedule") or default_n_schedule(n_min, c["n_max"])
    rep = spanning_entropy(cfg.shift, [eps], sched, cfg.subset)
    r = rep.rows[0]
    return [_row("spanning", eps, None, n_min, c["n_max"], r.value)], rep.to_dict()


def cell_frostman(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    if "s" in c:
        s = float(c["s"])
    else:
        s = critical_exponent(cfg.shift, cfg.subset, eps, n_min, c["n_max"], c["tol"],
                              c["ball"]).bracket[0]
    p = CoverProblem(cfg.shift, cfg.subset, eps, n_min, c["n_max"], s, c["ball"])
    total, mu = frostman_measure(p, c["precision"])
    log_int, _ = integral_cover_cost(p, c["precision"])
    rel = abs(math.expm1(mu.log_total - log_int))
    limit = 1e-12 if c["precision"] == "high" else 1e-9
    audit = mu.audit(samples=c["samples"], seed=c.get("seed", 0))
    details = {"s": s, "log_total": mu.log_total, "log_integral": log_int, "duality_rel": rel,
               "audit": asdict(audit) | {"ok": audit.ok}, "d_max": p.d_max}
    rows = [_row("frostman_log_total", eps, None, n_min, c["n_max"], mu.log_total, log_int,
                 log_int, rel <= limit),
            _row("frostman_audit_ratio", eps, None, n_min, c["n_max"], audit.max_ratio,
                 converged=audit.ok)]
    if rel > limit or not audit.ok:
        raise InvariantBreach(f"Frostman check failed: duality rel {rel:.3g}, "
                              f"{len(audit.violations)} audit violations", rows, details)
    return rows, details


def cell_sandwich(cfg: RunConfig, eps, delta, n_min):
    c = cfg.compute
    rep = variational_sandwich(cfg.shift, cfg.subset, eps, n_min, c["n_max"], cfg.measure,
                               c["samples"], c["seed"], c["check_tol"], min(cfg.deltas),
                               c["tol"], c["ball"])
    if not rep.feasible:
        raise InfeasibleError("; ".join(rep.notes))
    lo, hi = rep.bk_ci
    rows = [_row("sandwich_s_star", eps, None, n_min, c["n_max"], rep.s_star),
            _row("sandwich_bk_frostman", eps, None, n_min, c["n_max"], rep.bk_frostman, lo, hi,
                 rep.lower_holds)]
    if rep.katok is not None:
        rows.append(_row("sandwich_katok", eps, min(cfg.deltas), n_min, c["n_max"], rep.katok,
                         converged=rep.upper_holds))
    if not rep.holds:
        raise InvariantBreach("sandwich inequality violated", rows, rep.to_dict())
    return rows, rep.to_dict()


CELLS = {"entropy": cell_entropy, "katok": cell_katok, "brin-katok": cell_brin_katok,
         "spanning": cell_spanning, "frostman": cell_frostman, "sandwich": cell_sandwich}
LIMITS = {"entropy": ("bowen", "bowen_limit"), "brin-katok": ("brin_katok", "brin_katok_limit"),
          "spanning": ("spanning", "spanning_limit")}


def _run_cell(raw: dict, command: str, key: tuple):
    """Worker entry point: rebuild the configuration and run one cell."""
    eps, delta, n_min = key
    cfg = build(raw, command)
    with warnings.catch_warnings():
        warnings.simplefilter("error", DualityGapWarning)
        try:
            rows, details = CELLS[command](cfg, eps, delta, n_min)
            return key, rows, details, None
        except Exception as exc:  # recorded in-row, the sweep continues
            rows, details = [], {}
            if isinstance(exc, InvariantBreach):
                rows, details = exc.rows, exc.details
            err = {"category": _category(exc), "type": type(exc).__name__, "message": str(exc)}
            if err["category"] == EXIT_INTERNAL:
                err["traceback"] = traceback.format_exc()
            if not rows:
                rows = [_row(command.replace("-", "_"), eps, delta, n_min, cfg.compute["n_max"],
                             math.nan, converged=False)]
            return key, rows, details, err


def _workers(cfg: RunConfig, cells: int) -> int:
    want = int(cfg.raw.get("sweep", {}).get("parallel", 1))
    cap = os.environ.get("NBE_THREADS")
    if cap:
        want = min(want, max(1, int(cap)))
    return max(1, min(want, cells))


def run_cells(cfg: RunConfig, command: str, limits: bool = True):
    keys = [(e, d if command == "katok" else None, n)
            for e, d, n in product(cfg.eps, cfg.deltas, cfg.n_mins)]
    keys = sorted(set(keys), key=_key_order)
    workers = _workers(cfg, len(keys))
    if workers == 1:
        results = [_run_cell(cfg.raw, command, k) for k in keys]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, [cfg.raw] * len(keys), [command] * len(keys), keys))
    rows, details, errors = [], [], []
    for key, r, d, err in results:
        rows.extend(r)
        details.append({"cell": list(key), "result": d, "error": err})
        if err:
            errors.append(err)
    if limits and command in LIMITS:
        rows.extend(_limit_rows(rows, *LIMITS[command]))
    return rows, details, errors


def _key_order(key):
    eps, delta, n_min = key
    return (-eps, -(delta if delta is not None else 2.0), n_min)


def _limit_rows(rows, quantity, limit_name):
    out = []
    for n_min in sorted({r["n_min"] for r in rows if r["quantity"] == quantity}):
        pts = [(r["epsilon"], r["value"]) for r in rows
               if r["quantity"] == quantity and r["n_min"] == n_min and math.isfinite(r["value"])]
        ext = extrapolate(*zip(*pts)) if len(pts) >= 2 else None
        if ext is not None:
            n_max = next(r["n_max"] for r in rows if r["quantity"] == quantity)
            out.append(_row(limit_name, 0.0, None, n_min, n_max, ext.intercept,
                            converged=True))
    return out


def oracle_check(cfg: RunConfig, log=print):
    """DP against exhaustive search (high precision), the LP optimum, and the
    fractional solver, on random small instances."""
    c = cfg.compute
    rng = np.random.default_rng(c["seed"])
    worst_bf = worst_lp = 0.0
    cases = []
    for i in range(c["instances"]):
        p = random_instance(rng, c["max_depth"])
        log_dp, sol = integral_cover_cost(p, "high")
        bf = brute_force_cover(p)
        dp = sol.cost_mp
        rel_bf = 0.0 if dp == bf else float(abs(dp - bf) / max(abs(bf), abs(dp)))
        lp = lp_cover(p)
        rel_lp = abs(lp - math.exp(log_dp)) / max(lp, 1e-300) if lp > 0 else abs(math.exp(log_dp))
        fr = fractional_cover_cost(p)[0]
        ok = rel_bf <= 1e-12 and rel_lp <= 1e-7
        worst_bf, worst_lp = max(worst_bf, rel_bf), max(worst_lp, rel_lp)
        log(f"case {i:3d}: dp {'==' if rel_bf <= 1e-12 else '!='} brute-force "
            f"(rel {rel_bf:.1e}), lp rel {rel_lp:.1e}")
        cases.append({"problem": p.describe() | {"subset": [w.hex() for w in
                                                             p.subset.normalized_cylinders()]},
                      "log_dp": log_dp, "log_fractional": fr, "rel_brute": rel_bf,
                      "rel_lp": rel_lp, "ok": ok})
    ok = worst_bf <= 1e-12 and worst_lp <= 1e-7
    rows = [_row("oracle_dp_vs_brute", None, None, None, None, worst_bf, converged=worst_bf <= 1e-12),
            _row("oracle_dp_vs_lp", None, None, None, None, worst_lp, converged=worst_lp <= 1e-7)]
    errors = [] if ok else [{"category": EXIT_INVARIANT, "type": "InvariantBreach",
                             "message": "DP disagrees with an oracle"}]
    return rows, [{"cases": cases}], errors


# ---------------------------------------------------------------- output

def _fmt(v, scale=1.0):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v) / scale
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def render_csv(rows, base: str = "e") -> str:
    scale = {"e": 1.0, "2": math.log(2), "10": math.log(10)}[base]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    order = sorted(rows, key=lambda r: (r["quantity"],
                                        math.inf if r["epsilon"] is None else r["epsilon"],
                                        -1.0 if r["delta"] is None else r["delta"],
                                        -1 if r["n_min"] is None else r["n_min"]))
    for r in order:
        sc = scale if r["quantity"] in ENTROPY_LIKE else 1.0
        w.writerow([r["quantity"], _fmt(r["epsilon"]), _fmt(r["delta"]), _fmt(r["n_min"]),
                    _fmt(r["n_max"]), _fmt(r["value"], sc), _fmt(r["lo"], sc), _fmt(r["hi"], sc),
                    _fmt(r["converged"])])
    return buf.getvalue()


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bytes):
        return obj.hex()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def write_outputs(cfg: RunConfig, command: str, rows, details, errors, status: int) -> Path:
    out = Path(cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"{cfg.output['prefix']}_{command}"
    stem.with_suffix(".csv").write_text(render_csv(rows, cfg.output["display_base"]))
    sidecar = {
        "command": command,
        "config": cfg.raw,
        "overrides": {},
        "provenance": {
            "config_sha256": cfg.digest,
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "exit_status": status,
        "errors": errors,
        "rows": rows,
        "details": details,
    }
    stem.with_suffix(".json").write_text(json.dumps(_jsonable(sidecar), indent=1, sort_keys=True))
    return stem.with_suffix(".csv")


# ---------------------------------------------------------------- entry

def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nbe", description="Neutralized Bowen-type entropies of "
                                 "symbolic systems via exact cover optimisation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run file or a JSON sidecar to replay")
    ap.add_argument("--epsilon", type=float, nargs="+")
    ap.add_argument("--delta", type=float, nargs="+")
    ap.add_argument("--n-min", type=int, nargs="+")
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--precision", choices=["double", "high"])
    ap.add_argument("--ball", choices=["open", "closed"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--display-base", choices=["e", "2", "10"],
                    help="rescale entropy values to log base 2 or 10 (computation stays in nats)")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    overrides = {"epsilon": args.epsilon, "delta": args.delta, "n_min": args.n_min,
                 "n_max": args.n_max, "precision": args.precision, "ball": args.ball,
                 "seed": args.seed, "samples": args.samples}
    say = (lambda *a: None) if args.quiet else print
    command = args.command
    try:
        cfg = load_config(args.config, overrides, command if command != "sweep" else None)
        if command == "sweep":
            quantity = cfg.raw.get("sweep", {}).get("quantity", "entropy")
            cfg = build(cfg.raw, quantity)
    except ConfigError as exc:
        print(f"nbe: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg.output["dir"] = args.out
        cfg.raw.setdefault("output", {})["dir"] = args.out
    if args.display_base:
        cfg.output["display_base"] = args.display_base
    try:
        if command == "oracle-check":
            rows, details, errors = oracle_check(cfg, say)
        else:
            rows, details, errors = (run_cells(cfg, quantity, limits=False) if command == "sweep"
                                     else run_cells(cfg, command))
    except Exception as exc:  # pragma: no cover - defensive
        print(f"nbe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _category(exc)
    status = max((e["category"] for e in errors), default=EXIT_OK)
    path = write_outputs(cfg, command, rows, details, errors, status)
    for e in errors:
        print(f"nbe: [{e['category']}] {e['type']}: {e['message']}", file=sys.stderr)
    say(f"wrote {path} ({len(rows)} rows)")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
