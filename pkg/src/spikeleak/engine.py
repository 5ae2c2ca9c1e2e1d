"""Event-driven simulation with seeded, replica-independent randomness.

Trajectories are exact: every jump of the chain is realized, holding
times are exponential in the current total rate, and nothing is
approximated or interpolated.  A compiled kernel is used when the
``_speedups`` extension is importable; otherwise the pure-Python twin
in ``_fallback`` runs.  Both consume the same raw uniform stream and
produce bit-identical trajectories, so results never depend on which
backend happened to be active.

Set ``SPIKELEAK_PURE=1`` in the environment to force the Python kernel.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _fallback
from .core import ModelSpec, PotentialList

try:  # built by setup.py; absence is not an error
    from . import _speedups
except ImportError:  # pragma: no cover - depends on build environment
    _speedups = None

_SET_NAMES = ("S0", "S1", "S2", "S3", "W", "L")
_REASONS = {0: "absorbed", 1: "horizon", 2: "budget", 3: "target", 4: "decided"}
_BUDGET_SENTINEL = 1 << 62

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def default_backend() -> str:
    if _speedups is not None and os.environ.get("SPIKELEAK_PURE", "") != "1":
        return "compiled"
    return "python"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _speedups is not None else ("python",)


def _kernels(backend: str | None):
    name = default_backend() if backend is None else backend
    if name == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled backend requested but _speedups is not built")
        return _speedups, name
    if name == "python":
        return _fallback, name
    raise ValueError(f"unknown backend {name!r}")


def _splitmix64(x: int) -> int:
    z = x & _MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


@dataclass
class RngStream:
    """Reproducible per-replica randomness.

    The same (master_seed, replica_index) always yields the same draw
    sequence; distinct replica indices give unrelated streams.  The
    underlying Generator is created lazily and then reused, so one
    stream drives one replica end to end.
    """

    master_seed: int
    replica_index: int
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def seed_value(self) -> int:
        mixed = (self.master_seed + (self.replica_index + 1) * _GOLDEN) & _MASK64
        return _splitmix64(mixed)

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.PCG64(self.seed_value()))
        return self._gen


def derive_stream(master_seed: int, replica_index: int) -> RngStream:
    if replica_index < 0:
        raise ValueError("replica_index must be >= 0")
    return RngStream(int(master_seed), int(replica_index))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


@dataclass(frozen=True)
class StopCondition:
    """When to end a run.  At least one condition must be active.

    absorbed: stop on entering the all-zero trap (always honoured, the
        trap has no events; the flag records intent).
    horizon: stop once model time would exceed this value.
    budget: stop after this many jumps.
    target: stop on first entry into one of S0,S1,S2,S3,W,L.
    """

    absorbed: bool = True
    horizon: float | None = None
    budget: int | None = None
    target: str | None = None

    def __post_init__(self):
        if not (self.absorbed or self.horizon is not None
                or self.budget is not None or self.target is not None):
            raise ValueError("StopCondition needs at least one active condition")
        if self.horizon is not None and not self.horizon >= 0.0:
            raise ValueError("horizon must be >= 0")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.target is not None and self.target not in _SET_NAMES:
            raise ValueError(f"target must be one of {_SET_NAMES}")


@dataclass(frozen=True)
class TrajectorySummary:
    stop_reason: str
    tau: float | None
    jumps: int
    z_spike: int
    z_leak: int
    hit_times: dict[str, float]
    final_state: PotentialList
    events: tuple[tuple[int, float, int, str], ...] | None = None
    w_occupation: float = 0.0


# one shared table per base; keyed by the float log to stay exact
_TABLE_CACHE: dict[float, np.ndarray] = {}


def _table_for(log_base: float) -> np.ndarray:
    tbl = _TABLE_CACHE.get(log_base)
    if tbl is None:
        tbl = np.array(_fallback.exp_table(log_base), dtype=np.float64)
        _TABLE_CACHE[log_base] = tbl
    return tbl


def _record_mask(record) -> int:
    mask = 0
    for name in record:
        if name not in _SET_NAMES:
            raise ValueError(f"unknown set name {name!r}")
        mask |= 1 << _SET_NAMES.index(name)
    return mask


def simulate(
    u0,
    spec: ModelSpec,
    stop: StopCondition,
    rng,
    aux: bool = False,
    record=(),
    log_events: bool = False,
    track_w_time: bool = False,
    backend: str | None = None,
) -> TrajectorySummary:
    """Run one trajectory from u0 until a stop condition fires.

    u0 may be a PotentialList or any sequence satisfying its
    invariants.  ``record`` selects sets whose first-hit times are
    collected; ``aux`` suppresses any leak that would land in the trap.
    """
    state = u0 if isinstance(u0, PotentialList) else PotentialList(u0)
    if state.n != spec.n:
        raise ValueError("u0 size does not match spec.n")
    if state.is_null:
        raise ValueError("cannot simulate from the trap state")
    if aux and stop.horizon is None and stop.budget is None:
        raise ValueError("auxiliary mode needs a horizon or jump budget to terminate")

    kern, _ = _kernels(backend)
    gen = _as_generator(rng)
    lb = math.log(spec.base)
    raw = kern.run_trajectory(
        np.asarray(state.potentials, dtype=np.int64),
        1 if spec.leak_kind == "decrement" else 0,
        lb,
        bool(aux),
        math.inf if stop.horizon is None else float(stop.horizon),
        _BUDGET_SENTINEL if stop.budget is None else int(stop.budget),
        -1 if stop.target is None else _SET_NAMES.index(stop.target),
        _record_mask(record),
        bool(track_w_time),
        bool(log_events),
        _table_for(lb),
        gen,
    )
    return _summary_from_raw(raw, record)


def _summary_from_raw(raw: dict, record) -> TrajectorySummary:
    hit_times = {}
    for name in record:
        value = raw["hits"][_SET_NAMES.index(name)]
        if not math.isnan(value):
            hit_times[name] = value
    events = None
    if raw["events"] is not None:
        events = tuple(
            (idx, t, neuron, "spike" if kind == 0 else "leak")
            for idx, t, neuron, kind in raw["events"]
        )
    tau = raw["tau"]
    return TrajectorySummary(
        stop_reason=_REASONS[raw["stop_reason"]],
        tau=None if math.isnan(tau) else tau,
        jumps=int(raw["jumps"]),
        z_spike=int(raw["z_spike"]),
        z_leak=int(raw["z_leak"]),
        hit_times=hit_times,
        final_state=PotentialList(raw["final"]),
        events=events,
        w_occupation=float(raw["w_time"]),
    )


def next_event(u, spec: ModelSpec, rng, aux: bool = False):
    """Sample the next holding time and event from state u.

    Returns (holding_time, ("spike"|"leak", neuron)) with the neuron
    1-based.  Uses the same draw discipline as full trajectories.
    """
    state = u if isinstance(u, PotentialList) else PotentialList(u)
    if state.is_null:
        raise ValueError("the trap state has no events")
    gen = _as_generator(rng)
    lb = math.log(spec.base)
    raw = _fallback.run_trajectory(
        list(state.potentials),
        1 if spec.leak_kind == "decrement" else 0,
        lb,
        bool(aux),
        math.inf,
        1,
        -1,
        0,
        False,
        True,
        _table_for(lb),
        gen,
    )
    idx, t, neuron, kind = raw["events"][0]
    return t, ("spike" if kind == 0 else "leak", neuron)


def sample_S0(n: int, rng) -> PotentialList:
    """Random state with at least floor(sqrt(n)) positive potentials.

    k ~ uniform on {floor(sqrt(n)), ..., n-1} neurons get potentials
    uniform on {1, ..., n}; the rest stay at zero.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    gen = _as_generator(rng)
    root = math.isqrt(n)
    k = int(gen.integers(root, n))
    positions = gen.choice(n, size=k, replace=False)
    values = gen.integers(1, n + 1, size=k)
    potentials = [0] * n
    for pos, val in zip(positions, values):
        potentials[int(pos)] = int(val)
    return PotentialList(potentials)


def write_event_log(path, summary: TrajectorySummary) -> None:
    """CSV event log: n,time,neuron,kind with 17-digit times."""
    if summary.events is None:
        raise ValueError("summary carries no event log; pass log_events=True")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,time,neuron,kind\n")
        for idx, t, neuron, kind in summary.events:
            fh.write(f"{idx},{format(t, '.17g')},{neuron},{kind}\n")
