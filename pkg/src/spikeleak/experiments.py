"""Replica ensembles and the statistics built on them.

Every experiment here follows the same reproducibility contract:
replica ``i`` of a run with master seed ``s`` always draws from
``derive_stream(s, i)``, workers only affect scheduling, and results
are merged in replica order, so output is byte-identical for any
worker count.  Aggregates are pure functions of the per-replica
records and can be recomputed from any saved report.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import __version__
from .core import ModelSpec, PotentialList, classify, ladder
from .coupling import sample_W_pair, simulate_coupled
from .engine import StopCondition, derive_stream, sample_S0, simulate

# Quantile level whose order statistic estimates the trapping scale:
# the time c with P(tau > c) = 1/e.
P_TRAP = 1.0 - math.exp(-1.0)

# Two-sided 0.99 normal quantile, used for every normal-approximation
# confidence interval in this module.
Z99 = 2.5758293035489004

SEED_RULE = (
    "replica i draws from derive_stream(master_seed, i): splitmix64 "
    "avalanche of master_seed + (i + 1) * 0x9E3779B97F4A7C15, seeding "
    "numpy PCG64"
)

JSON_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_init(init, n: int, gen) -> PotentialList:
    """Turn an init token or explicit sequence into a start state.

    "ladder" is the deterministic full ladder; "s0" / "s0_random"
    draws from the high-mass start sampler using the replica's own
    stream (so explicit replay stays possible).
    """
    if isinstance(init, str):
        if init == "ladder":
            return ladder(n)
        if init in ("s0", "s0_random"):
            return sample_S0(n, gen)
        raise ValueError(f"unknown init token {init!r}")
    state = init if isinstance(init, PotentialList) else PotentialList(init)
    if state.n != n:
        raise ValueError("explicit init length does not match n")
    if state.is_null:
        raise ValueError("cannot start an ensemble from the trap state")
    return state


def _init_token(init):
    if isinstance(init, str):
        return init
    state = init if isinstance(init, PotentialList) else PotentialList(init)
    return list(state.potentials)


def order_quantile(samples, p: float) -> float:
    """Empirical p-quantile via the ceil(p*R)-th order statistic.

    The index convention is 1-based and clamped to [1, R]; this is
    the single quantile rule used everywhere in the package.
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    r = xs.size
    if r == 0:
        raise ValueError("no samples")
    k = min(max(math.ceil(p * r), 1), r)
    return float(xs[k - 1])


def _map_replicas(worker, arglist, workers: int):
    # pool.map preserves submission order, so the merged result is
    # independent of scheduling.
    if workers is None or workers <= 1:
        return [worker(a) for a in arglist]
    chunk = max(1, len(arglist) // (int(workers) * 8))
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(worker, arglist, chunksize=chunk))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_json(path, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _payload_head(config: dict) -> dict:
    return {
        "schema": JSON_SCHEMA_VERSION,
        "tool": {"name": "spikeleak", "version": __version__},
        "seed_rule": SEED_RULE,
        "config": dict(config),
    }


# ---------------------------------------------------------------------------
# extinction ensembles


@dataclass(frozen=True)
class ReplicaRecord:
    """One extinction replica; tau is NaN when the run was censored."""

    replica: int
    tau: float
    jumps: int
    z_spike: int
    z_leak: int
    stop_reason: str


@dataclass(frozen=True)
class EnsembleReport:
    config: dict
    records: tuple[ReplicaRecord, ...]
    aggregates: dict

    @property
    def taus(self) -> np.ndarray:
        return np.asarray(
            [r.tau for r in self.records if r.stop_reason == "absorbed"], dtype=float
        )

    def payload(self) -> dict:
        out = _payload_head(self.config)
        out["record_fields"] = ["replica", "tau", "jumps", "z_spike", "z_leak", "stop_reason"]
        out["records"] = [
            [r.replica, r.tau, r.jumps, r.z_spike, r.z_leak, r.stop_reason]
            for r in self.records
        ]
        out["aggregates"] = self.aggregates
        return out


def aggregate_taus(records) -> dict:
    """Aggregate an extinction ensemble; pure in the records."""
    taus = [r.tau for r in records if r.stop_reason == "absorbed"]
    out = {
        "replicas": len(records),
        "absorbed": len(taus),
        "censored": len(records) - len(taus),
    }
    if not taus:
        return out
    arr = np.sort(np.asarray(taus, dtype=float))
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    out["mean"] = mean
    out["se"] = se
    out["ci99"] = [mean - Z99 * se, mean + Z99 * se]
    out["quantiles"] = {
        "p25": order_quantile(arr, 0.25),
        "p50": order_quantile(arr, 0.50),
        "p_trap": order_quantile(arr, P_TRAP),
        "p75": order_quantile(arr, 0.75),
        "p90": order_quantile(arr, 0.90),
    }
    if arr.size >= 2 and arr[0] > 0.0:
        out["ks_exp1"] = ks_exp1(arr)
    return out


def _extinction_worker(args):
    n, leak_kind, base, init, master_seed, replica, budget, horizon = args
    spec = ModelSpec(n, leak_kind, base)
    gen = derive_stream(master_seed, replica).generator()
    u0 = _resolve_init(init, n, gen)
    stop = StopCondition(absorbed=True, horizon=horizon, budget=budget)
    s = simulate(u0, spec, stop, gen)
    tau = math.nan if s.tau is None else s.tau
    return (replica, tau, s.jumps, s.z_spike, s.z_leak, s.stop_reason)


def extinction_ensemble(
    spec: ModelSpec,
    init,
    replicas: int,
    master_seed: int,
    jump_budget: int | None = None,
    horizon: float | None = None,
    workers: int = 1,
    acceptance: bool = False,
) -> EnsembleReport:
    """Collect i.i.d. trapping times from independent replica streams.

    Runs exceeding ``jump_budget`` (or ``horizon``) are censored and
    reported; with ``acceptance=True`` any censoring raises instead of
    being silently folded into the aggregates.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if not isinstance(init, str):
        # validate once up front so a bad explicit state fails fast
        _resolve_init(init, spec.n, None)
    token = _init_token(init)
    arglist = [
        (spec.n, spec.leak_kind, spec.base, init if isinstance(init, str) else tuple(token),
         master_seed, i, jump_budget, horizon)
        for i in range(replicas)
    ]
    rows = _map_replicas(_extinction_worker, arglist, workers)
    records = tuple(ReplicaRecord(*row) for row in rows)
    censored = sum(1 for r in records if r.stop_reason != "absorbed")
    if acceptance and censored:
        raise RuntimeError(
            f"{censored} of {replicas} replicas censored "
            f"(budget={jump_budget}, horizon={horizon}); "
            "an acceptance ensemble requires every replica absorbed"
        )
    config = {
        "experiment": "extinction",
        "n": spec.n,
        "leak_kind": spec.leak_kind,
        "base": spec.base,
        "init": token,
        "replicas": replicas,
        "master_seed": master_seed,
        "jump_budget": jump_budget,
        "horizon": horizon,
    }
    return EnsembleReport(config=config, records=records, aggregates=aggregate_taus(records))


def write_replica_csv(path, records) -> None:
    """Per-replica CSV: replica,tau,jumps,z_spike,z_leak,stop_reason.

    tau is left empty for censored replicas; floats carry 17
    significant digits.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "tau", "jumps", "z_spike", "z_leak", "stop_reason"])
        for r in records:
            tau = "" if math.isnan(r.tau) else _fmt(r.tau)
            w.writerow([r.replica, tau, r.jumps, r.z_spike, r.z_leak, r.stop_reason])


# ---------------------------------------------------------------------------
# scalar statistics


@dataclass(frozen=True)
class QuantileEstimate:
    """Order-statistic quantile with bootstrap uncertainty.

    ``lo99`` is the one-sided 0.99 lower confidence bound (the 0.01
    bootstrap quantile); ``ci99`` the two-sided equal-tail interval.
    """

    value: float
    lo99: float
    ci99: tuple[float, float]
    p: float
    resamples: int


def estimate_c(samples, p: float = P_TRAP, resamples: int = 1000, seed: int = 0) -> QuantileEstimate:
    """Estimate the p-quantile of the trapping time.

    Uses the ceil(p*R)-th order statistic and a seeded nonparametric
    bootstrap (default 10^3 resamples), so repeated calls on the same
    samples are deterministic.
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    r = xs.size
    if r < 100:
        raise ValueError("estimate_c needs at least 100 samples")
    k = min(max(math.ceil(p * r), 1), r) - 1
    value = float(xs[k])
    gen = np.random.Generator(np.random.PCG64(seed))
    stats = np.empty(resamples, dtype=float)
    for b in range(resamples):
        idx = gen.integers(0, r, size=r)
        stats[b] = np.partition(xs[idx], k)[k]
    return QuantileEstimate(
        value=value,
        lo99=order_quantile(stats, 0.01),
        ci99=(order_quantile(stats, 0.005), order_quantile(stats, 0.995)),
        p=p,
        resamples=resamples,
    )


def ks_exp1(samples) -> float:
    """KS distance between mean-normalized samples and Exp(1).

    Both one-sided gaps are evaluated at the jump points of the
    empirical CDF.  All-equal samples give 1 - 1/e exactly.
    """
    xs = np.asarray(samples, dtype=float)
    if xs.size < 2:
        raise ValueError("ks_exp1 needs at least 2 samples")
    if not np.all(xs > 0.0):
        raise ValueError("ks_exp1 requires positive samples")
    xs = np.sort(xs) / xs.mean()
    cdf = 1.0 - np.exp(-xs)
    i = np.arange(1, xs.size + 1, dtype=float)
    d_plus = np.max(i / xs.size - cdf)
    d_minus = np.max(cdf - (i - 1.0) / xs.size)
    return float(max(d_plus, d_minus))


def survival_fraction(samples, x: float) -> tuple[float, float]:
    """Empirical P(tau > x) with its binomial standard error."""
    xs = np.asarray(samples, dtype=float)
    r = xs.size
    p = float(np.count_nonzero(xs > x)) / r
    return p, math.sqrt(p * (1.0 - p) / r)


def memoryless_gap(samples, c: float, s: float, t: float) -> dict:
    """Gap |P(tau > c(s+t)) - P(tau > cs) P(tau > ct)| with combined SE.

    The combined standard error propagates the three binomial errors
    to first order (covariances dropped, which only widens it).
    """
    p_joint, se_joint = survival_fraction(samples, c * (s + t))
    p_s, se_s = survival_fraction(samples, c * s)
    p_t, se_t = survival_fraction(samples, c * t)
    gap = abs(p_joint - p_s * p_t)
    combined = math.sqrt(se_joint**2 + (p_t * se_s) ** 2 + (p_s * se_t) ** 2)
    return {
        "gap": gap,
        "combined_se": combined,
        "p_joint": p_joint,
        "p_s": p_s,
        "p_t": p_t,
        "s": s,
        "t": t,
        "c": c,
    }


# ---------------------------------------------------------------------------
# occupancy of the distinct-plateau set at a fixed time


@dataclass(frozen=True)
class OccupancyRecord:
    replica: int
    survived: bool
    in_w: bool
    jumps: int


@dataclass(frozen=True)
class OccupancyReport:
    config: dict
    records: tuple[OccupancyRecord, ...]
    estimate: float
    ci99: tuple[float, float]
    survivors: int
    in_w: int

    def payload(self) -> dict:
        out = _payload_head(self.config)
        out["record_fields"] = ["replica", "survived", "in_w", "jumps"]
        out["records"] = [
            [r.replica, int(r.survived), int(r.in_w), r.jumps] for r in self.records
        ]
        out["aggregates"] = {
            "estimate": self.estimate,
            "ci99": list(self.ci99),
            "survivors": self.survivors,
            "in_w": self.in_w,
        }
        return out


def occupancy_aggregate(records) -> tuple[float, tuple[float, float], int, int]:
    survivors = sum(1 for r in records if r.survived)
    if survivors == 0:
        raise RuntimeError(
            "no replica survived to the query time; "
            "the conditional occupancy estimate is undefined"
        )
    hits = sum(1 for r in records if r.survived and r.in_w)
    p = hits / survivors
    half = Z99 * math.sqrt(p * (1.0 - p) / survivors)
    ci = (max(0.0, p - half), min(1.0, p + half))
    return p, ci, survivors, hits


def _occupancy_worker(args):
    n, leak_kind, base, init, master_seed, replica, t = args
    spec = ModelSpec(n, leak_kind, base)
    gen = derive_stream(master_seed, replica).generator()
    u0 = _resolve_init(init, n, gen)
    s = simulate(u0, spec, StopCondition(absorbed=True, horizon=t), gen)
    survived = s.stop_reason == "horizon"
    in_w = bool(survived and classify(s.final_state).in_W)
    return (replica, survived, in_w, s.jumps)


def occupancy(
    spec: ModelSpec,
    t: float,
    replicas: int,
    master_seed: int,
    init="s0",
    workers: int = 1,
) -> OccupancyReport:
    """Estimate P(state at t is in W | still alive at t).

    Conditioning is by filtering the surviving replicas, which is
    unbiased for the conditional probability.  Zero survivors raise.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    token = _init_token(init)
    arglist = [
        (spec.n, spec.leak_kind, spec.base, init if isinstance(init, str) else tuple(token),
         master_seed, i, float(t))
        for i in range(replicas)
    ]
    rows = _map_replicas(_occupancy_worker, arglist, workers)
    records = tuple(OccupancyRecord(*row) for row in rows)
    estimate, ci, survivors, hits = occupancy_aggregate(records)
    config = {
        "experiment": "occupancy",
        "n": spec.n,
        "leak_kind": spec.leak_kind,
        "base": spec.base,
        "init": token,
        "replicas": replicas,
        "master_seed": master_seed,
        "t": float(t),
    }
    return OccupancyReport(
        config=config, records=records, estimate=estimate, ci99=ci,
        survivors=survivors, in_w=hits,
    )


# ---------------------------------------------------------------------------
# ladder hitting from high-mass starts


def t_prime(n: int) -> float:
    """Reference hitting deadline for the full ladder from a fresh start."""
    return (
        n ** -0.25
        + n ** -2
        + math.exp(-(n - n ** 0.25))
        + math.exp(-(n - math.sqrt(n)))
    )


@dataclass(frozen=True)
class LadderRecord:
    """hit_time is NaN when the ladder was not reached in the horizon."""

    replica: int
    hit_time: float
    jumps: int
    stop_reason: str


@dataclass(frozen=True)
class LadderReport:
    config: dict
    records: tuple[LadderRecord, ...]
    t_prime: float
    fraction_by_t_prime: float
    hits: int

    def payload(self) -> dict:
        out = _payload_head(self.config)
        out["record_fields"] = ["replica", "hit_time", "jumps", "stop_reason"]
        out["records"] = [
            [r.replica, r.hit_time, r.jumps, r.stop_reason] for r in self.records
        ]
        out["aggregates"] = {
            "t_prime": self.t_prime,
            "fraction_by_t_prime": self.fraction_by_t_prime,
            "hits": self.hits,
        }
        return out


def ladder_aggregate(records, tp: float) -> tuple[float, int]:
    hits = sum(1 for r in records if not math.isnan(r.hit_time))
    within = sum(1 for r in records if not math.isnan(r.hit_time) and r.hit_time <= tp)
    return within / len(records), hits


def _ladder_worker(args):
    n, leak_kind, base, init, master_seed, replica, horizon = args
    spec = ModelSpec(n, leak_kind, base)
    gen = derive_stream(master_seed, replica).generator()
    u0 = _resolve_init(init, n, gen)
    stop = StopCondition(absorbed=True, horizon=horizon, target="L")
    s = simulate(u0, spec, stop, gen, record=("L",))
    hit = s.hit_times.get("L", math.nan)
    return (replica, hit, s.jumps, s.stop_reason)


def ladder_hitting(
    spec: ModelSpec,
    replicas: int,
    master_seed: int,
    init="s0",
    workers: int = 1,
) -> LadderReport:
    """First hit of the full ladder, censored at twice the deadline."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    tp = t_prime(spec.n)
    token = _init_token(init)
    arglist = [
        (spec.n, spec.leak_kind, spec.base, init if isinstance(init, str) else tuple(token),
         master_seed, i, 2.0 * tp)
        for i in range(replicas)
    ]
    rows = _map_replicas(_ladder_worker, arglist, workers)
    records = tuple(LadderRecord(*row) for row in rows)
    fraction, hits = ladder_aggregate(records, tp)
    config = {
        "experiment": "ladder",
        "n": spec.n,
        "leak_kind": spec.leak_kind,
        "base": spec.base,
        "init": token,
        "replicas": replicas,
        "master_seed": master_seed,
        "horizon": 2.0 * tp,
    }
    return LadderReport(
        config=config, records=records, t_prime=tp,
        fraction_by_t_prime=fraction, hits=hits,
    )


# ---------------------------------------------------------------------------
# coupling statistics


@dataclass(frozen=True)
class CouplingReport:
    config: dict
    outcomes: tuple
    p_coalesce_first: float
    t_nc_quantiles: dict
    e1_frequency: float
    coalesced: int
    violations: int

    def payload(self) -> dict:
        out = _payload_head(self.config)
        out["record_fields"] = ["replica", "n_c", "n_dagger", "t_nc", "e1", "jumps", "stop_reason"]
        out["records"] = [
            [
                i,
                o.n_c,
                o.n_dagger,
                o.t_nc,
                None if o.e1_occurred is None else int(o.e1_occurred),
                o.jumps,
                o.stop_reason,
            ]
            for i, o in enumerate(self.outcomes)
        ]
        out["aggregates"] = {
            "p_coalesce_first": self.p_coalesce_first,
            "t_nc_quantiles": self.t_nc_quantiles,
            "e1_frequency": self.e1_frequency,
            "coalesced": self.coalesced,
            "violations": self.violations,
        }
        return out


def coupling_aggregate(outcomes) -> tuple[float, dict, float, int, int]:
    total = len(outcomes)
    wins = sum(
        1
        for o in outcomes
        if o.n_c is not None and (o.n_dagger is None or o.n_c < o.n_dagger)
    )
    t_ncs = [o.t_nc for o in outcomes if o.t_nc is not None]
    quantiles = {}
    if t_ncs:
        quantiles = {
            "p25": order_quantile(t_ncs, 0.25),
            "p50": order_quantile(t_ncs, 0.50),
            "p75": order_quantile(t_ncs, 0.75),
            "p90": order_quantile(t_ncs, 0.90),
        }
    e1_freq = sum(1 for o in outcomes if o.e1_occurred) / total
    violations = sum(1 for o in outcomes if o.e1_bound_violated)
    return wins / total, quantiles, e1_freq, len(t_ncs), violations


def _coupling_worker(args):
    n, leak_kind, base, convention, master_seed, replica, spread, budget = args
    spec = ModelSpec(n, leak_kind, base)
    gen = derive_stream(master_seed, replica).generator()
    u0, v0 = sample_W_pair(n, gen, spread=spread)
    stop = StopCondition(absorbed=True, budget=budget)
    return simulate_coupled(
        u0, v0, spec, stop, gen, convention=convention, decided_stop=True
    )


def coupling_stats(
    spec: ModelSpec,
    convention: str,
    replicas: int,
    master_seed: int,
    spread: int = 3,
    jump_budget: int = 10**7,
    workers: int = 1,
) -> CouplingReport:
    """Coalescence race statistics over random plateau start pairs.

    Start pairs are drawn inside the distinct-plateau set, where the
    opening-window bound on the coalescence index is a hard guarantee;
    any violation raises inside the coupled kernel.  ``spread``
    controls how far above the ladder the redrawn top block may sit
    (the fuzzing knob for alternative start pairs).
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    arglist = [
        (spec.n, spec.leak_kind, spec.base, convention, master_seed, i, spread, jump_budget)
        for i in range(replicas)
    ]
    outcomes = tuple(_map_replicas(_coupling_worker, arglist, workers))
    p_first, quantiles, e1_freq, coalesced, violations = coupling_aggregate(outcomes)
    config = {
        "experiment": "coupling",
        "n": spec.n,
        "leak_kind": spec.leak_kind,
        "base": spec.base,
        "convention": convention,
        "replicas": replicas,
        "master_seed": master_seed,
        "spread": spread,
        "jump_budget": jump_budget,
    }
    return CouplingReport(
        config=config,
        outcomes=outcomes,
        p_coalesce_first=p_first,
        t_nc_quantiles=quantiles,
        e1_frequency=e1_freq,
        coalesced=coalesced,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# auxiliary-process occupation


@dataclass(frozen=True)
class AuxRecord:
    replica: int
    occupation: float
    jumps: int


@dataclass(frozen=True)
class AuxReport:
    config: dict
    records: tuple[AuxRecord, ...]
    mean: float
    se: float
    ci99: tuple[float, float]

    def payload(self) -> dict:
        out = _payload_head(self.config)
        out["record_fields"] = ["replica", "occupation", "jumps"]
        out["records"] = [[r.replica, r.occupation, r.jumps] for r in self.records]
        out["aggregates"] = {
            "mean": self.mean,
            "se": self.se,
            "ci99": list(self.ci99),
        }
        return out


def aux_aggregate(records) -> tuple[float, float, tuple[float, float]]:
    occ = np.asarray([r.occupation for r in records], dtype=float)
    mean = float(occ.mean())
    se = float(occ.std(ddof=1) / math.sqrt(occ.size)) if occ.size > 1 else 0.0
    return mean, se, (mean - Z99 * se, mean + Z99 * se)


def _aux_worker(args):
    n, leak_kind, base, init, master_seed, replica, burn_in, run_time = args
    spec = ModelSpec(n, leak_kind, base)
    gen = derive_stream(master_seed, replica).generator()
    u0 = _resolve_init(init, n, gen)
    window = run_time - burn_in
    warm = simulate(
        u0, spec, StopCondition(absorbed=True, horizon=burn_in), gen, aux=True
    )
    if warm.stop_reason != "horizon":
        raise RuntimeError("auxiliary burn-in terminated early; kernel violated no-trap guarantee")
    run = simulate(
        warm.final_state,
        spec,
        StopCondition(absorbed=True, horizon=window),
        gen,
        aux=True,
        track_w_time=True,
    )
    if run.stop_reason != "horizon":
        raise RuntimeError("auxiliary run terminated early; kernel violated no-trap guarantee")
    return (replica, run.w_occupation / window, warm.jumps + run.jumps)


def aux_occupancy(
    spec: ModelSpec,
    burn_in: float,
    run_time: float,
    replicas: int = 10,
    master_seed: int = 0,
    init="s0",
    workers: int = 1,
) -> AuxReport:
    """Time-average occupation of W by the no-trap dynamics.

    One long trajectory per replica: model time (burn_in, run_time] is
    measured, the earlier stretch is discarded as warm-up.  Both legs
    must end at their horizons; the auxiliary kernel cannot absorb.
    """
    if not (run_time > burn_in > 0):
        raise ValueError("need run_time > burn_in > 0")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    token = _init_token(init)
    arglist = [
        (spec.n, spec.leak_kind, spec.base, init if isinstance(init, str) else tuple(token),
         master_seed, i, float(burn_in), float(run_time))
        for i in range(replicas)
    ]
    rows = _map_replicas(_aux_worker, arglist, workers)
    records = tuple(AuxRecord(*row) for row in rows)
    mean, se, ci = aux_aggregate(records)
    config = {
        "experiment": "aux-occupancy",
        "n": spec.n,
        "leak_kind": spec.leak_kind,
        "base": spec.base,
        "init": token,
        "replicas": replicas,
        "master_seed": master_seed,
        "burn_in": float(burn_in),
        "run_time": float(run_time),
    }
    return AuxReport(config=config, records=records, mean=mean, se=se, ci99=ci)


# ---------------------------------------------------------------------------
# pinned expectations


def load_expectations() -> dict:
    """Load the versioned expectations file shipped with the package."""
    path = resources.files("spikeleak") / "data" / "expectations.json"
    with path.open("r") as fh:
        return json.load(fh)


def expectation(criterion: str) -> dict:
    table = load_expectations()
    try:
        return table["criteria"][criterion]
    except KeyError:
        raise KeyError(f"no pinned expectation named {criterion!r}") from None


def check_expectation(criterion: str, observed: float) -> bool:
    """True iff the observed value satisfies the pinned expectation.

    kinds: lower_bound (observed >= value), upper_bound (observed <=
    value), interval (|observed - value| <= tolerance).
    """
    entry = expectation(criterion)
    kind = entry.get("kind", "interval")
    value = float(entry["value"])
    if kind == "lower_bound":
        return observed >= value
    if kind == "upper_bound":
        return observed <= value
    if kind == "interval":
        return abs(observed - value) <= float(entry["tolerance"])
    raise ValueError(f"unknown expectation kind {kind!r}")
