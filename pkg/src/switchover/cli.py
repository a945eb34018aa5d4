"""Command-line front end: regions, lookup tables, runs, sweeps, bounds, checks."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import oracle
from .channel import ChannelParams
from .mdp import balance_residual, build_polytope
from .policies import (
    STATE_LABELS_2,
    PolicySpec,
    fbdc_table_rows,
    marks_from_table,
    olm_table_rows,
)
from .region import (
    closed_form_two_queue,
    contains,
    corners_via_sweep,
    outer_bound,
    solve_weighted,
    sum_rate_upper_bound,
)
from .sim import (
    ArrivalSpec,
    ConfigError,
    SimConfig,
    config_from_mapping,
    flatten,
    fmt,
    run,
    sweep,
    write_csv,
)

FULL_STEP = 0.01


class UsageError(Exception):
    pass


def _params(args) -> ChannelParams:
    sym = args.epsilon is not None
    pair = args.p01 is not None or args.p10 is not None
    if sym and pair:
        raise UsageError("use either --epsilon or --p01/--p10")
    if sym:
        return ChannelParams.symmetric(args.epsilon)
    if args.p01 is None or args.p10 is None:
        raise UsageError("need --epsilon or both --p01 and --p10")
    return ChannelParams(args.p01, args.p10)


def _writer(args):
    return open(args.out, "w", newline="") if getattr(args, "out", None) else None


def _emit(text: str, args) -> None:
    f = _writer(args)
    if f is None:
        sys.stdout.write(text)
    else:
        with f:
            f.write(text)


# region ------------------------------------------------------------------------

def region_rows(region, label: str) -> list:
    n = region.n
    rows = []
    for i, c in enumerate(region.corners):
        rows.append([f"{label}corner", f"b{i}" if label == "" else str(i)] + [fmt(v) for v in c] + [""])
    for i, (a, b) in enumerate(region.facets):
        rows.append([f"{label}facet", str(i)] + [fmt(v) for v in a] + [fmt(b)])
    return rows


def cmd_region(args) -> int:
    params = _params(args)
    n = args.n
    region = closed_form_two_queue(params) if n == 2 else corners_via_sweep(params, n, args.divisions)
    rows = region_rows(region, "")
    if args.outer:
        rows += region_rows(outer_bound(params, n), "outer_")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "id"] + [f"x_{i + 1}" for i in range(n)] + ["rhs"])
    w.writerows(rows)
    _emit(buf.getvalue(), args)
    return 0


# tables ------------------------------------------------------------------------

def format_table(rows, title: str) -> str:
    lines = [title, "interval".ljust(28) + "corner  " + "  ".join(STATE_LABELS_2)]
    for lo, hi, cid, table in rows:
        span = f"[{fmt(lo)}, {fmt(hi)})"
        marks = marks_from_table(table)
        lines.append(span.ljust(28) + str(cid).ljust(8) + "  ".join(ch.center(7) for ch in marks))
    lines.append("thresholds: " + ", ".join(fmt(lo) for lo, *_ in rows[1:]))
    return "\n".join(lines) + "\n"


def cmd_tables(args) -> int:
    params = _params(args)
    if args.policy in ("fbdc", "fbdc_table", "fbdc_lp"):
        text = format_table(fbdc_table_rows(params), f"FBDC lookup, p01={fmt(params.p01)} p10={fmt(params.p10)}")
    elif args.policy in ("olm", "myopic"):
        text = format_table(olm_table_rows(params, args.k),
                            f"OLM lookup (k={args.k}), p01={fmt(params.p01)} p10={fmt(params.p10)}")
    else:
        raise UsageError("tables supports --policy fbdc or olm")
    _emit(text, args)
    return 0


# simulate ----------------------------------------------------------------------

def _sim_config(args) -> SimConfig:
    if args.config:
        cfg = config_from_mapping(_load_json(args.config))
    else:
        params = _params(args)
        rates = tuple(args.rates) if args.rates else (0.0,) * args.n
        cfg = SimConfig(args.n, params, ArrivalSpec(rates), PolicySpec(args.policy, args.k))
    overrides = {}
    for flag, key in (("frame", "frame_t"), ("horizon", "horizon"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    if args.saturated:
        overrides["saturated"] = True
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    if args.dump:
        d = asdict(cfg)
        sys.stderr.write(json.dumps(d, default=list) + "\n")
    stats = run(cfg)
    f = _writer(args)
    text = write_csv([(cfg, stats)], cfg.n)
    if f is None:
        sys.stdout.write(text)
    else:
        with f:
            f.write(text)
    return 0


# sweep -------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    base: SimConfig
    grid: tuple
    replicates: int
    master_seed: int
    out: str | None


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _axis(start: float, stop: float, step: float) -> list:
    if step <= 0:
        raise ConfigError("grid step must be positive")
    if stop < start:
        return []
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def build_grid(flat: dict, n: int, params: ChannelParams, full: bool = False) -> list:
    if "grid.points" in flat:
        pts = [tuple(float(v) for v in p) for p in flat["grid.points"]]
        if any(len(p) != n for p in pts):
            raise ConfigError("grid points must have n coordinates")
        return pts
    starts, stops, steps = (flat.get(f"grid.{k}") for k in ("start", "stop", "step"))
    if starts is None or stops is None or steps is None:
        return []
    if not (len(starts) == len(stops) == len(steps) == n):
        raise ConfigError("grid axes must match n")
    if full:
        steps = [FULL_STEP] * n
    axes = [_axis(float(a), float(b), float(s)) for a, b, s in zip(starts, stops, steps)]
    pts = [()]
    for ax in axes:
        pts = [p + (v,) for p in pts for v in ax]
    if flat.get("grid.inside", False):
        region = closed_form_two_queue(params) if n == 2 else outer_bound(params, n)
        pts = [p for p in pts if contains(region, p)]
    return pts


def experiment_from_mapping(mapping: dict, full: bool = False) -> ExperimentConfig:
    flat = flatten(mapping)
    base = config_from_mapping(mapping)
    return ExperimentConfig(
        base=base,
        grid=tuple(build_grid(flat, base.n, base.channel, full)),
        replicates=int(flat.get("replicates", 1)),
        master_seed=int(flat.get("seed", 0)),
        out=flat.get("out"),
    )


def cmd_sweep(args) -> int:
    if not args.config:
        raise UsageError("sweep needs --config")
    exp = experiment_from_mapping(_load_json(args.config), args.full)
    base = exp.base
    if args.horizon is not None:
        base = replace(base, horizon=args.horizon)
    try:
        rows = sweep(exp.grid, base, exp.replicates,
                     exp.master_seed if args.seed is None else args.seed, args.jobs)
    except Exception as exc:  # surface the failing cell
        sys.stderr.write(f"sweep failed: {exc}\n")
        return 1
    out = args.out or exp.out
    if out:
        with open(out, "w", newline="") as f:
            write_csv(rows, base.n, f)
    else:
        sys.stdout.write(write_csv(rows, base.n))
    stable = sum(1 for _, s in rows if s.stable)
    sys.stderr.write(f"cells: {len(rows)} stable: {stable} unstable: {len(rows) - stable}\n")
    return 0


# bound -------------------------------------------------------------------------

def cmd_bound(args) -> int:
    params = _params(args)
    sys.stdout.write(fmt(sum_rate_upper_bound(params, args.n)) + "\n")
    return 0


# verify ------------------------------------------------------------------------

def verify_checks(params: ChannelParams, n: int = 2) -> list:
    """(name, ok, detail) for each check."""
    checks = []
    poly = build_polytope(params, n)
    worst = 0.0
    alphas = [np.array([math.cos(t), math.sin(t)]) for t in np.linspace(0, math.pi / 2, 13)] if n == 2 \
        else [np.eye(n)[i] for i in range(n)] + [np.ones(n) / n]
    lp_values = []
    for a in alphas:
        sol, rates = solve_weighted(params, n, a)
        worst = max(worst, balance_residual(poly, sol.x))
        lp_values.append((a, float(a @ rates)))
    checks.append(("polytope residual", worst < 1e-9, f"max residual {worst:.3g}"))
    if n != 2:
        return checks

    hull = np.array(oracle.enumerate_hull(params))
    closed = closed_form_two_queue(params).corner_array()
    if hull.shape == closed.shape:
        err = float(np.max(np.abs(hull - closed)))
        checks.append(("hull vs closed form", err < 1e-9, f"max error {err:.3g}"))
    else:
        checks.append(("hull vs closed form", False, f"{len(hull)} vs {len(closed)} corners"))

    pts = oracle.all_policy_rates(params, 2)
    err = max(abs(float(np.max(pts @ a)) - v) for a, v in lp_values)
    checks.append(("LP vs enumeration", err < 1e-9, f"max error {err:.3g}"))

    if params.is_symmetric and params.p01 <= 0.5:
        rep = oracle.psi_scan(params, 1)
        checks.append(("psi scan", rep.global_min >= 0.90 - 1e-12, f"min psi {rep.global_min:.6f}"))
    return checks


def polytope_text(params: ChannelParams, n: int) -> str:
    """Rows of [A | b], row-major and space-separated."""
    poly = build_polytope(params, n)
    M = np.hstack([poly.A, poly.b[:, None]])
    return "".join(" ".join(fmt(v) for v in row) + "\n" for row in M)


def cmd_verify(args) -> int:
    params = _params(args)
    if args.dump:
        sys.stdout.write(polytope_text(params, args.n))
        return 0
    checks = verify_checks(params, args.n)
    for name, ok, detail in checks:
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    return 0 if all(ok for _, ok, _ in checks) else 1


# parser ------------------------------------------------------------------------

def _channel_flags(p) -> None:
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p01", type=float)
    p.add_argument("--p10", type=float)
    p.add_argument("--n", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchover", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("region", help="corners and facets of the rate region")
    _channel_flags(p)
    p.add_argument("--outer", action="store_true", help="also emit the outer bound")
    p.add_argument("--divisions", type=int, default=12, help="weight lattice divisions for n >= 3")
    p.add_argument("--out")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("tables", help="FBDC or OLM lookup table")
    _channel_flags(p)
    p.add_argument("--policy", default="fbdc")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("simulate", help="one simulation run, one CSV row")
    _channel_flags(p)
    p.add_argument("--policy", default="fbdc_lp")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rates", type=float, nargs="+")
    p.add_argument("--frame", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--saturated", action="store_true")
    p.add_argument("--config")
    p.add_argument("--dump", action="store_true", help="print the resolved config to stderr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid x replicates sweep from a config file")
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--horizon", type=int)
    p.add_argument("--full", action="store_true", help=f"use a {FULL_STEP} grid step on every axis")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="saturated sum-rate upper bound")
    _channel_flags(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="brute-force consistency checks")
    _channel_flags(p)
    p.add_argument("--dump", action="store_true", help="print the polytope [A | b] instead of checking")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    except ValueError as exc:
        sys.stderr.write(f"switchover: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
