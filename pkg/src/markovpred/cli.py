"""Command-line experiment harness.

Usage::

    python -m markovpred [global flags] <command> [-p key=value ...]

Parameters are resolved as built-in defaults, then the TOML file given by
``--config`` (global keys at top level, command keys in a table named after
the command), then ``-p`` overrides and the global flags. The resolved
configuration is embedded in every output file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .bayes import step_count, second_order_bayes, three_state_bayes_risk
from .chains import (
    as_order_m,
    lift_block_chain,
    lifted_stationary,
    order_m_stationary,
    pseudo_spectral_gap,
    random_chain,
    read_matrix_file,
    simulate_batch,
    spectral_report,
    check_order_m_reversible,
)
from .concentration import (
    DEFAULT_C,
    DEFAULT_SLACK,
    check_report,
    chebyshev_sum_check,
    conditional_moment_check,
    hoffman_check,
    hoffman_margin,
    iid_transition_second_moment,
    kl_tail_check,
)
from .constructions import class_probability, parse_family, three_state, two_state, two_state_gamma_star, two_state_stationary
from .errors import ConfigError
from .estimators import parse_predictor
from .risk import (
    CSV_FIELDS,
    ENUMERATION_LIMIT,
    exact_redundancy,
    exact_risk,
    mc_risk,
    pointwise_bound,
    pointwise_redundancy_audit,
)
from .seeding import task_rng, task_seed

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

GLOBAL_DEFAULTS = {"seed": 0, "trials": 2000, "out": "-", "format": None, "deterministic": False}


def point_seed(root: int, index: int) -> int:
    """Integer seed for grid point ``index``, derived from the root seed."""
    return int(task_seed(root, index).generate_state(1, dtype=np.uint32)[0])


def auto_mode(k: int, n: int, mode: str) -> str:
    if mode != "auto":
        return mode
    return "exact" if n * math.log(k) <= math.log(ENUMERATION_LIMIT) + 1e-12 else "mc"


def rate_reference(k: int, n: int) -> float:
    """``(k^2/n) log(n/k^2)``."""
    return k * k / n * math.log(n / (k * k))


def gap_reference(n: int, gamma0: float) -> float:
    """``(1/n) max(1, log log min(n, 1/gamma0))``."""
    inner = min(n, 1.0 / gamma0)
    return max(1.0, math.log(math.log(inner))) / n if inner > 1 else 1.0 / n


def _with_n(spec: str, n: int) -> str:
    kind, _, body = spec.partition(":")
    keys = {p.split("=")[0].strip() for p in body.split(",") if p}
    if "n" in keys or kind in ("random", "two_state"):
        return spec
    return f"{kind}:{body},n={n}" if body else f"{kind}:n={n}"


# --- commands -------------------------------------------------------------


def cmd_risk_scan(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Risk of each predictor over the (family, n) grid, with the reference rate curve."""
    fields = list(CSV_FIELDS) + ["family", "reference"]
    rows = []
    idx = 0
    for fam in cfg["families"]:
        for n in cfg["n"]:
            family = parse_family(_with_n(fam, n))
            chain = as_order_m(family.chain)
            k = chain.k
            pi = order_m_stationary(chain)
            for spec in cfg["predictors"]:
                pred = parse_predictor(spec)
                mode = auto_mode(k, n, cfg["mode"])
                seed = point_seed(cfg["seed"], idx)
                idx += 1
                if mode == "exact":
                    est = exact_risk(chain, pi, pred, n)
                    seed_col: Any = ""
                else:
                    est = mc_risk(chain, pi, pred, n, cfg["trials"], seed=seed)
                    seed_col = seed
                rows.append({
                    "k": k, "n": n, "m": chain.m, "predictor": pred.name, "mode": est.mode,
                    "mean_nats": est.mean, "stderr": est.stderr, "trials": est.trials, "seed": seed_col,
                    "family": fam, "reference": rate_reference(k, n),
                })
    return fields, rows, {}


def _random_trajectory(chain, n, rng):
    pi = order_m_stationary(chain)
    return simulate_batch(chain, n, 1, seed=rng, init=pi)[0], pi


def cmd_redundancy_audit(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Random pointwise audits of the add-one redundancy bound, plus exact redundancy values."""
    fields = ["kind", "trial", "k", "m", "n", "lhs", "bound", "satisfied", "per_step_sum"]
    rows = []
    violations = 0
    trials = cfg["trials"]
    for m in cfg["orders"]:
        ks = [k for k in cfg["k"] if k ** m <= 4096]
        for trial in range(trials):
            rng = task_rng(cfg["seed"], m * 1_000_003 + trial)
            k = int(rng.choice(ks))
            n = int(rng.integers(max(m, 1), cfg["n_max"] + 1))
            chain = random_chain(k, m, rng)
            x, pi = _random_trajectory(chain, n, rng)
            audit = pointwise_redundancy_audit(chain, pi, x)
            violations += not audit.satisfied
            rows.append({"kind": "pointwise", "trial": trial, "k": k, "m": m, "n": n,
                         "lhs": audit.lhs, "bound": audit.bound, "satisfied": audit.satisfied,
                         "per_step_sum": ""})
    for i, case in enumerate(cfg["exact_cases"]):
        k, m, n = int(case[0]), int(case[1]), int(case[2])
        chain = random_chain(k, m, task_rng(cfg["seed"], 10_000_000 + i))
        red = exact_redundancy(chain, None, n)
        bound = pointwise_bound(k, n, m)
        ok = red.total <= bound + 1e-9
        violations += not ok
        rows.append({"kind": "exact", "trial": i, "k": k, "m": m, "n": n, "lhs": red.total,
                     "bound": bound, "satisfied": ok, "per_step_sum": float(red.per_step.sum())})
    summary = {"violations": violations, "pointwise_trials": trials * len(cfg["orders"]),
               "exact_cases": len(cfg["exact_cases"])}
    return fields, rows, summary


def _gap_chains(cfg, gamma0):
    n = cfg["n"]
    lo = max(gamma0, 1e-300)
    out = []
    for a in np.geomspace(lo, 0.5, cfg["points"]):
        for b in cfg["returns"] or [1.0 / n]:
            b = float(b)
            if a + b >= gamma0:
                out.append((float(a), b))
    return out


def cmd_gap_risk(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Risk of gap-aware and smoothing predictors on two-state chains across the gamma0 grid."""
    fields = ["gamma0", "a", "b", "gamma_star", "n", "predictor", "mode", "mean_nats", "stderr",
              "trials", "seed", "reference"]
    rows = []
    n = cfg["n"]
    idx = 0
    for gamma0 in cfg["gamma0"]:
        gamma0 = float(gamma0)
        preds = [parse_predictor(f"hybrid:gamma0={gamma0!r}")] + [parse_predictor(s) for s in cfg["predictors"]]
        for a, b in _gap_chains(cfg, gamma0):
            chain = two_state(a, b)
            pi = two_state_stationary(a, b)
            for pred in preds:
                mode = auto_mode(2, n, cfg["mode"])
                seed = point_seed(cfg["seed"], idx)
                idx += 1
                if mode == "exact":
                    est = exact_risk(chain, pi, pred, n)
                    seed_col: Any = ""
                else:
                    est = mc_risk(chain, pi, pred, n, cfg["trials"], seed=seed)
                    seed_col = seed
                rows.append({
                    "gamma0": gamma0, "a": a, "b": b, "gamma_star": two_state_gamma_star(a, b), "n": n,
                    "predictor": pred.name, "mode": est.mode, "mean_nats": est.mean, "stderr": est.stderr,
                    "trials": est.trials, "seed": seed_col, "reference": gap_reference(n, gamma0),
                })
    return fields, rows, {}


def cmd_lowerbound_demo(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Three-state Bayes risk vs n, the second-order (y, f) table and class probabilities."""
    fields = ["table", "n", "m", "t", "y", "f", "value", "scaled", "count"]
    rows = []
    for n in cfg["n"]:
        r = three_state_bayes_risk(n)
        rows.append({"table": "three_state_bayes_risk", "n": n, "m": 1, "t": "", "y": "", "f": "",
                     "value": r, "scaled": r * n / math.log(n), "count": ""})
    for f in range(1, cfg["f_max"] + 1):
        for y in range(f + 1):
            rows.append({"table": "second_order_bayes", "n": "", "m": 2, "t": "", "y": y, "f": f,
                         "value": second_order_bayes(y, f), "scaled": "", "count": step_count(y, f)})
    for fam, m in (("three_state", 1), ("k_embed", 1), ("order_m", cfg["m"])):
        for n in cfg["class_n"]:
            lo, hi = (1, n - 1) if m == 1 else (m, n - m)
            for t in sorted({lo, (lo + hi) // 2, hi}):
                rows.append({"table": f"class_probability:{fam}", "n": n, "m": m, "t": t, "y": "", "f": "",
                             "value": class_probability(fam, t, n, m), "scaled": "", "count": ""})
    return fields, rows, {}


def cmd_spectral_report(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Stationary law, gaps and pseudo spectral gap of each listed chain or matrix file."""
    fields = ["source", "k", "m", "reversible", "gamma", "gamma_star", "pseudo_gap", "pseudo_r",
              "stationary", "eigenvalues"]
    rows = []
    sources = [("family", s) for s in cfg["families"]] + [("matrix", p) for p in cfg["matrices"]]
    for kind, src in sources:
        chain = as_order_m(parse_family(src).chain if kind == "family" else read_matrix_file(src))
        pi = order_m_stationary(chain)
        rev = check_order_m_reversible(chain, pi)
        row = {"source": src, "k": chain.k, "m": chain.m, "reversible": rev, "gamma": "", "gamma_star": "",
               "eigenvalues": "", "stationary": " ".join(repr(float(v)) for v in pi)}
        if chain.m == 1 and rev:
            rep = spectral_report(chain.table)
            row.update(gamma=rep.gamma, gamma_star=rep.gamma_star,
                       eigenvalues=" ".join(repr(float(v)) for v in rep.eigenvalues))
        lifted = lift_block_chain(chain)
        ps = pseudo_spectral_gap(lifted, lifted_stationary(chain, pi), m=chain.m)
        row.update(pseudo_gap=ps.value, pseudo_r=ps.r)
        rows.append(row)
    return fields, rows, {}


def cmd_concentration_check(cfg: dict) -> tuple[list[str], list[dict], dict]:
    """Moment, tail, Chebyshev-sum and Hoffman checks as JSON reports."""
    fields = ["check", "params", "empirical", "bound", "ratio", "pass"]
    rows = []
    seed = cfg["seed"]
    C = cfg["C"]
    trials = cfg["trials"]

    pi = np.array([0.2, 0.5, 0.3])
    iid = np.tile(pi, (3, 1))
    n_iid = cfg["iid_n"]
    mc = conditional_moment_check(iid, pi, 0, 1, n_iid, 2, "transition", trials, seed=point_seed(seed, 0), C=C)
    exact = iid_transition_second_moment(pi, 0, 1, n_iid)
    rows.append(check_report("iid_second_moment", {"n": n_iid, "i": 0, "j": 1, "trials": trials},
                             mc.empirical, exact, passed=abs(mc.empirical - exact) <= 4 * mc.stderr))

    M2 = two_state(0.3, 0.3)
    for i in range(2):
        for j in range(2):
            for order in (2, 4):
                r = conditional_moment_check(M2, None, i, j, cfg["moment_n"], order, "transition", trials,
                                             seed=point_seed(seed, 1 + 4 * i + 2 * j + order // 4), C=C)
                rows.append(check_report(f"transition_moment_{order}",
                                         {"chain": "two_state:a=0.3,b=0.3", "n": cfg["moment_n"], "i": i, "j": j,
                                          "C": C, "trials": trials}, r.empirical, r.bound))
    M3 = three_state(0.4, 100)
    r = conditional_moment_check(M3, None, 0, 0, 100, 4, "visit", trials, seed=point_seed(seed, 20), C=C)
    rows.append(check_report("visit_moment_4", {"chain": "three_state:p=0.4,n=100", "n": 100, "i": 0, "C": C,
                                                "trials": trials}, r.empirical, r.bound))

    k, m = cfg["tail_k"], cfg["tail_m"]
    tail = kl_tail_check(np.full(k, 1.0 / k), m, cfg["tail_trials"], seed=point_seed(seed, 21), c0=cfg["slack"])
    rows.append(check_report("kl_tail_q999", {"k": k, "m": m, "trials": cfg["tail_trials"], "c0": cfg["slack"]},
                             tail.quantiles["0.999"], tail.threshold))

    rng = task_rng(seed, 22)
    bad = 0
    for _ in range(cfg["audit_count"]):
        x, y = rng.random(2)
        n = int(rng.integers(2, 500))
        bad += not all(chebyshev_sum_check(float(x), float(y), n))
    rows.append(check_report("chebyshev_sums", {"cases": cfg["audit_count"]}, bad, 0.0, passed=bad == 0))

    bad = 0
    worst = 0.0
    for _ in range(cfg["audit_count"] // 100 or 1):
        d = int(rng.integers(2, 7))
        A = rng.dirichlet(np.ones(d), size=d)
        top, bound = hoffman_margin(A)
        worst = max(worst, top - bound)
        bad += not hoffman_check(A)
    rows.append(check_report("hoffman", {"cases": cfg["audit_count"] // 100 or 1, "max_excess": worst},
                             bad, 0.0, passed=bad == 0))
    return fields, rows, {"all_pass": all(r["pass"] for r in rows)}


COMMANDS: dict[str, tuple[Callable, dict, str]] = {
    "risk-scan": (cmd_risk_scan, {
        "families": ["three_state:p=0.25"],
        "n": [100, 200, 400, 800, 1600, 3200],
        "predictors": ["cesaro:variant=tail", "add_c:c=1"],
        "mode": "auto",
    }, "csv"),
    "redundancy-audit": (cmd_redundancy_audit, {
        "k": [2, 3, 4, 5],
        "orders": [1, 2],
        "n_max": 100,
        "exact_cases": [[2, 1, 8], [3, 1, 6], [2, 2, 8]],
    }, "json"),
    "gap-risk": (cmd_gap_risk, {
        "gamma0": [math.exp(-10), math.exp(-100)],
        "n": 12,
        "points": 4,
        "returns": [],
        "predictors": ["add_c:c=1", "add_c:c=0.5"],
        "mode": "auto",
    }, "csv"),
    "lowerbound-demo": (cmd_lowerbound_demo, {
        "n": [2 ** j for j in range(5, 15)],
        "f_max": 6,
        "m": 2,
        "class_n": [10, 100, 1000],
    }, "csv"),
    "spectral-report": (cmd_spectral_report, {
        "families": ["three_state:p=0.2,n=10", "k_embed:k=5,n=100,seed=7", "second_order:p=0.3,n=10"],
        "matrices": [],
    }, "json"),
    "concentration-check": (cmd_concentration_check, {
        "trials": 20_000,
        "C": DEFAULT_C,
        "slack": DEFAULT_SLACK,
        "iid_n": 50,
        "moment_n": 500,
        "tail_k": 10,
        "tail_m": 1000,
        "tail_trials": 10_000,
        "audit_count": 10_000,
    }, "json"),
}


# --- config resolution ----------------------------------------------------


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _coerce(name: str, value: Any, default: Any) -> Any:
    if isinstance(default, list) and not isinstance(value, list):
        value = [value]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if isinstance(default, float) and isinstance(value, int):
        value = float(value)
    return value


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    func, defaults, default_format = COMMANDS[command]
    file_cfg: dict = {}
    if args.config:
        with open(args.config, "rb") as fh:
            file_cfg = tomllib.load(fh)
    cfg = dict(GLOBAL_DEFAULTS)
    cfg.update(defaults)
    seed_given = False
    for key in GLOBAL_DEFAULTS:
        if key in file_cfg:
            cfg[key] = file_cfg[key]
            seed_given |= key == "seed"
    section = file_cfg.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{command}] must be a table")
    for key, val in section.items():
        if key not in defaults and key not in GLOBAL_DEFAULTS:
            raise ConfigError(f"unknown parameter {key!r} for {command}")
        cfg[key] = val
        seed_given |= key == "seed"
    for item in args.param or []:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"-p expects key=value, got {item!r}")
        if key not in defaults:
            raise ConfigError(f"unknown parameter {key!r} for {command}")
        cfg[key] = _parse_value(text.strip())
    for key in GLOBAL_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
            seed_given |= key == "seed"
    if cfg["deterministic"] and not seed_given:
        raise ConfigError("--deterministic requires an explicit seed (flag or config)")
    for key, default in defaults.items():
        cfg[key] = _coerce(key, cfg[key], default)
        if isinstance(default, list) and key not in ("returns", "matrices", "exact_cases") and not cfg[key]:
            raise ConfigError(f"grid {key!r} must be nonempty")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["trials"], int) or cfg["trials"] < 2:
        raise ConfigError("trials must be an integer >= 2")
    cfg["format"] = cfg["format"] or default_format
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    cfg["command"] = command
    return cfg


# --- output ---------------------------------------------------------------


def _plain(v: Any) -> Any:
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (dict, list)):
        return json.dumps(_plain(v), sort_keys=True, separators=(",", ":"))
    return str(v)


def render(cfg: dict, fields: list[str], rows: list[dict], summary: dict, stamp: Optional[str]) -> str:
    meta_cfg = {k: v for k, v in cfg.items() if k != "out"}
    if cfg["format"] == "json":
        doc = {"config": _plain(meta_cfg), "rows": _plain(rows), "summary": _plain(summary),
               "version": __version__}
        if stamp:
            doc["generated"] = stamp
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    if stamp:
        buf.write(f"# generated: {stamp}\n")
    buf.write("# config: " + json.dumps(_plain(meta_cfg), sort_keys=True, separators=(",", ":")) + "\n")
    if summary:
        buf.write("# summary: " + json.dumps(_plain(summary), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f, "")) for f in fields])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovpred", description="Markov chain prediction experiments.")
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    parser.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials per point")
    parser.add_argument("--out", default=None, help="output path, '-' for stdout")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--deterministic", action="store_true", default=None,
                        help="omit the timestamp line and require an explicit seed")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, defaults, fmt) in COMMANDS.items():
        p = sub.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0],
                           description=f"Parameters (defaults): {json.dumps(defaults)}")
        p.add_argument("-p", "--param", action="append", metavar="KEY=VALUE",
                       help="override a command parameter; VALUE uses TOML syntax, e.g. n=[100,200]")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        func = COMMANDS[args.command][0]
        fields, rows, summary = func(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    stamp = None if cfg["deterministic"] else datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    text = render(cfg, fields, rows, summary, stamp)
    if cfg["out"] in ("-", "", None):
        sys.stdout.write(text)
    else:
        with open(cfg["out"], "w", newline="\n") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
