"""Slotted-time simulation of one server polling N queues over ON/OFF channels.

Within a slot the order is: observe (Q, C, m), ask the controller for a
target, serve one packet if the target is the current queue and its channel
is ON, admit arrivals, then advance the channels. Moving to another queue
costs the slot. Channel paths and arrivals are drawn up front from the seed,
in that order, so two runs with the same seed see the same channels whatever
the policy does.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelParams, sample_paths
from .mdp import MAX_QUEUES
from .policies import Controller, PolicySpec, make_controller

ARRIVAL_KINDS = ("bernoulli", "poisson")
POISSON_CAP = 10
_CHUNK = 1 << 16


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ArrivalSpec:
    rates: tuple
    kind: str = "bernoulli"
    a_max: int = POISSON_CAP  # truncation for poisson; bernoulli is capped at 1 anyway

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if self.kind not in ARRIVAL_KINDS:
            raise ConfigError(f"unknown arrival kind {self.kind!r}")
        if any(r < 0 for r in rates):
            raise ConfigError("arrival rates must be nonnegative")
        if self.kind == "bernoulli" and any(r > 1 for r in rates):
            raise ConfigError("bernoulli arrival rates must be <= 1")
        if self.a_max < 1:
            raise ConfigError("a_max must be >= 1")

    @property
    def bound(self) -> int:
        return 1 if self.kind == "bernoulli" else self.a_max

    def sample(self, horizon: int, rng: np.random.Generator) -> np.ndarray:
        lam = np.asarray(self.rates)
        if self.kind == "bernoulli":
            return (rng.random((horizon, lam.size)) < lam).astype(np.int16)
        return np.minimum(rng.poisson(lam, (horizon, lam.size)), self.a_max).astype(np.int16)


@dataclass(frozen=True)
class SimConfig:
    n: int
    channel: ChannelParams
    arrivals: ArrivalSpec
    policy: PolicySpec
    frame_t: int = 1
    horizon: int = 100_000
    seed: int = 0
    saturated: bool = False
    initial_m: int = 1
    initial_c: tuple | None = None
    initial_q: tuple | None = None
    frozen_queues: tuple | None = None  # policy weights in saturated mode
    slope_tol: float = 0.002
    cap_frac: float = 0.05
    checkpoints: int = 200
    record_trace: bool = False

    def validate(self) -> None:
        if not (1 <= self.n <= MAX_QUEUES):
            raise ConfigError(f"n must be in 1..{MAX_QUEUES}")
        if not (1 <= self.frame_t <= self.horizon):
            raise ConfigError("need 1 <= frame_t <= horizon")
        if not self.saturated and len(self.arrivals.rates) != self.n:
            raise ConfigError("arrival rate count does not match n")
        if not (1 <= self.initial_m <= self.n):
            raise ConfigError("initial server position out of range")
        for name in ("initial_c", "initial_q", "frozen_queues"):
            v = getattr(self, name)
            if v is not None and len(v) != self.n:
                raise ConfigError(f"{name} length does not match n")
        if self.checkpoints < 1:
            raise ConfigError("checkpoints must be >= 1")


@dataclass
class SimStats:
    avg_total_queue: float
    throughput: tuple
    avg_delay: float
    empirical_x: np.ndarray
    stable: bool
    slope: float
    checkpoints: list
    final_queue: tuple
    arrival_rate: float
    departures: tuple
    on_slots_at_server: int
    trace: np.ndarray | None = field(default=None, repr=False)


class ReplayController(Controller):
    """Plays back a fixed action sequence, one target per slot."""

    def __init__(self, actions) -> None:
        self.actions = [int(a) for a in actions]
        self.t = 0

    def decide(self, s, m, c, q):
        a = self.actions[self.t]
        self.t += 1
        return a


def _checkpoint_times(horizon: int, count: int) -> list:
    return sorted({max(1, round(horizon * (j + 1) / count)) for j in range(count)})


def run(config: SimConfig, controller: Controller | None = None) -> SimStats:
    config.validate()
    n, T, horizon = config.n, config.frame_t, config.horizon
    saturated = config.saturated
    ctrl = controller
    if ctrl is None:
        try:
            ctrl = make_controller(config.policy, config.channel, n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    rng = np.random.default_rng(config.seed)

    paths = sample_paths(config.channel, n, horizon, rng, config.initial_c)
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    patterns = ((1 - paths.astype(np.int64)) @ weights).astype(np.int64)
    arrivals = None if saturated else config.arrivals.sample(horizon, rng)
    C = 1 << n
    c_of = [tuple(1 - ((p >> (n - 1 - i)) & 1) for i in range(n)) for p in range(C)]

    Q = list(config.initial_q) if config.initial_q is not None else [0] * n
    frozen = tuple(config.frozen_queues) if config.frozen_queues is not None else (1,) * n
    m = config.initial_m
    counts = np.zeros(n * C * n, dtype=np.int64)
    trace = np.empty(horizon, dtype=np.int32) if config.record_trace else None
    dep = [0] * n
    on_at_server = 0
    q_sum = 0
    total = sum(Q)
    cp_times = _checkpoint_times(horizon, config.checkpoints)
    cp_iter = iter(cp_times)
    next_cp = next(cp_iter)
    checkpoints = []

    for start in range(0, horizon, _CHUNK):
        stop = min(horizon, start + _CHUNK)
        pats = patterns[start:stop].tolist()
        arr = None if arrivals is None else arrivals[start:stop].tolist()
        for j in range(stop - start):
            t = start + j
            if t % T == 0:
                ctrl.on_frame(frozen if saturated else tuple(Q))
            p = pats[j]
            c = c_of[p]
            s = (m - 1) * C + p
            q_sum += total
            a = ctrl.decide(s, m, c, Q)
            v = s * n + a - 1
            counts[v] += 1
            if trace is not None:
                trace[t] = v
            if c[m - 1]:
                on_at_server += 1
            if a == m:
                if c[m - 1] and (saturated or Q[m - 1] > 0):
                    dep[m - 1] += 1
                    if not saturated:
                        Q[m - 1] -= 1
                        total -= 1
            else:
                m = a
            if arr is not None:
                row = arr[j]
                for i in range(n):
                    if row[i]:
                        Q[i] += row[i]
                        total += row[i]
            if t + 1 == next_cp:
                checkpoints.append((t + 1, total))
                next_cp = next(cp_iter, -1)

    arrived = 0 if arrivals is None else int(arrivals.sum())
    avg_q = q_sum / horizon
    arrival_rate = arrived / horizon
    stable, slope = classify_stability(checkpoints, horizon, config.slope_tol, config.cap_frac)
    return SimStats(
        avg_total_queue=avg_q,
        throughput=tuple(d / horizon for d in dep),
        avg_delay=avg_q / arrival_rate if arrival_rate > 0 else 0.0,
        empirical_x=counts / horizon,
        stable=stable,
        slope=slope,
        checkpoints=checkpoints,
        final_queue=tuple(Q),
        arrival_rate=arrival_rate,
        departures=tuple(dep),
        on_slots_at_server=on_at_server,
        trace=trace,
    )


def run_saturated(config: SimConfig, controller: Controller | None = None) -> np.ndarray:
    if not config.saturated:
        config = replace(config, saturated=True)
    return np.array(run(config, controller).throughput)


def empirical_frequencies(trace, window: int, n_vars: int) -> np.ndarray:
    """Fraction of the first `window` slots spent on each (state, action) variable."""
    if window <= 0:
        raise ValueError("empty window")
    trace = np.asarray(trace)
    if window > trace.size:
        raise ValueError("window longer than trace")
    return np.bincount(trace[:window], minlength=n_vars) / window


def classify_stability(checkpoints, horizon: int, slope_tol: float = 0.002,
                       cap_frac: float = 0.05) -> tuple:
    """(stable, slope) from a least-squares fit of total queue over the last half."""
    pts = [(t, q) for t, q in checkpoints if t >= horizon / 2]
    if len(pts) < 3:
        pts = list(checkpoints)
    if len(pts) < 3:
        final = checkpoints[-1][1] if checkpoints else 0
        return final <= cap_frac * horizon, 0.0
    t = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * tc
    se = math.sqrt(float(resid @ resid) / (len(pts) - 2) / sxx)
    final = checkpoints[-1][1]
    stable = slope <= max(slope_tol, 3.0 * se) and final <= cap_frac * horizon
    return bool(stable), slope


# sweeps ------------------------------------------------------------------------

def cell_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


class CellError(RuntimeError):
    pass


def _run_cell(item) -> SimStats:
    index, config = item
    try:
        stats = run(config)
    except Exception as exc:
        raise CellError(f"cell {index}: {exc}") from exc
    stats.empirical_x = None  # keep worker results small
    return stats


def sweep(grid, base: SimConfig, replicates: int = 1, master_seed: int = 0,
          jobs: int | None = 1) -> list:
    """Run every (lambda, replicate) cell; rows come back in grid order.

    Returns (config, stats) pairs. Cell i uses a seed derived from
    (master_seed, i), so results do not depend on the worker count.
    """
    configs = []
    for lam in grid:
        for _ in range(replicates):
            idx = len(configs)
            configs.append(replace(
                base,
                arrivals=replace(base.arrivals, rates=tuple(float(x) for x in lam)),
                seed=cell_seed(master_seed, idx),
            ))
    for cfg in configs:
        cfg.validate()
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(configs) <= 1:
        results = [_run_cell(item) for item in enumerate(configs)]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
            results = list(pool.map(_run_cell, enumerate(configs)))
    return list(zip(configs, results))


def csv_header(n: int) -> list:
    return ([f"lambda_{i + 1}" for i in range(n)]
            + ["policy", "k", "T", "seed", "Ts", "avg_total_queue", "avg_delay"]
            + [f"thr_{i + 1}" for i in range(n)] + ["stable", "slope"])


def fmt(x: float) -> str:
    return format(float(x), ".9g")


def csv_row(config: SimConfig, stats: SimStats) -> list:
    return ([fmt(x) for x in config.arrivals.rates]
            + [config.policy.kind, str(config.policy.k), str(config.frame_t), str(config.seed),
               str(config.horizon), fmt(stats.avg_total_queue), fmt(stats.avg_delay)]
            + [fmt(x) for x in stats.throughput]
            + [str(int(stats.stable)), fmt(stats.slope)])


def write_csv(rows, n: int, stream=None) -> str:
    """Write (config, stats) rows; returns the text when no stream is given."""
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(csv_header(n))
    for cfg, stats in rows:
        w.writerow(csv_row(cfg, stats))
    return out.getvalue() if stream is None else ""


# config files ------------------------------------------------------------------

def flatten(mapping: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def channel_from_mapping(flat: dict) -> ChannelParams:
    if "epsilon" in flat:
        if "p01" in flat or "p10" in flat:
            raise ConfigError("give either epsilon or p01/p10, not both")
        return ChannelParams.symmetric(float(flat["epsilon"]))
    if "p01" in flat and "p10" in flat:
        return ChannelParams(float(flat["p01"]), float(flat["p10"]))
    raise ConfigError("channel needs epsilon or both p01 and p10")


def config_from_mapping(mapping: dict) -> SimConfig:
    """Build a SimConfig from nested or dotted keys."""
    flat = flatten(mapping)
    try:
        n = int(flat.get("n", 2))
        channel = channel_from_mapping(flat)
        rates = flat.get("arrivals.rates", [0.0] * n)
        arrivals = ArrivalSpec(tuple(rates), flat.get("arrivals.kind", "bernoulli"),
                               int(flat.get("arrivals.a_max", POISSON_CAP)))
        policy = PolicySpec(flat.get("policy.kind", "fbdc_lp"), int(flat.get("policy.k", 1)))
        cfg = SimConfig(
            n=n,
            channel=channel,
            arrivals=arrivals,
            policy=policy,
            frame_t=int(flat.get("frame_t", 1)),
            horizon=int(flat.get("horizon", 100_000)),
            seed=int(flat.get("seed", 0)),
            saturated=bool(flat.get("saturated", False)),
            initial_m=int(flat.get("initial_m", 1)),
            slope_tol=float(flat.get("slope_tol", 0.002)),
            cap_frac=float(flat.get("cap_frac", 0.05)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg
