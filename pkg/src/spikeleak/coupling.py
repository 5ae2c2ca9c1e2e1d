"""Rank-matched coupling of two copies of the process.

Two networks of the same size run on one event clock.  After every
jump each copy's neurons are ranked by (potential, index); rank j of
one copy is matched with rank j of the other.  Per rank three events
compete: a joint spike at the smaller coordinate's rate, a solo spike
of the strictly larger coordinate, and a joint leak at rate 1.  Once
the two potential multisets agree they agree forever, and the first
jump index where that happens (n_c) is the coalescence time.

Two solo-rate conventions are shipped.  ``marginal_preserving`` (the
default) gives the leader rate base^max - base^min so each component,
viewed alone, is exactly the original process.  ``paper_literal`` uses
base^|a-b|, which does not preserve marginals; it is kept for side-by-
side comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from . import _fallback
from .core import ModelSpec, PotentialList, classify, rank_order
from .engine import (
    _BUDGET_SENTINEL,
    _REASONS,
    _as_generator,
    _kernels,
    _table_for,
    StopCondition,
)

CONVENTIONS = ("marginal_preserving", "paper_literal")


@dataclass(frozen=True)
class CoupledState:
    """A pair of same-size potential lists evolving jointly."""

    u: PotentialList
    v: PotentialList

    def __post_init__(self):
        if self.u.n != self.v.n:
            raise ValueError("coupled components must have the same size")

    @property
    def n(self) -> int:
        return self.u.n


class CoupledEvent(NamedTuple):
    kind: str  # joint_spike | solo_spike | leak
    rank: int  # 1-based; rank 1 is the lowest potential


@dataclass(frozen=True)
class CouplingOutcome:
    n_c: int | None
    n_dagger: int | None
    t_nc: float | None
    e1_occurred: bool | None
    jumps: int
    stop_reason: str
    time: float
    u_ladder_time: float | None
    v_ladder_time: float | None
    final_u: PotentialList
    final_v: PotentialList
    e1_bound_violated: bool = False


def _check_convention(convention: str) -> bool:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    return convention == "paper_literal"


def coupled_rates(state: CoupledState, spec: ModelSpec, convention: str = "marginal_preserving"):
    """Enumerate (event, rate) pairs for the current coupled state.

    Zero-rate and no-op events are omitted: no joint spike when the
    smaller coordinate is 0, no solo event on a tie, no leak when both
    coordinates at a rank are 0.
    """
    literal = _check_convention(convention)
    if state.u.is_null or state.v.is_null:
        raise ValueError("coupled rates are undefined once a component is trapped")
    order_u = rank_order(state.u).order
    order_v = rank_order(state.v).order
    lb = math.log(spec.base)
    out = []
    for j in range(state.n):
        a = state.u[order_u[j]]
        b = state.v[order_v[j]]
        lo, hi = min(a, b), max(a, b)
        if lo > 0:
            out.append((CoupledEvent("joint_spike", j + 1), math.exp(lo * lb)))
        if a != b:
            if literal:
                solo = math.exp((hi - lo) * lb)
            else:
                solo = math.exp(hi * lb) - (math.exp(lo * lb) if lo > 0 else 0.0)
            out.append((CoupledEvent("solo_spike", j + 1), solo))
        if hi > 0:
            out.append((CoupledEvent("leak", j + 1), 1.0))
    return out


def is_coalesced(state: CoupledState) -> bool:
    """True iff the two potential multisets are equal."""
    return sorted(state.u.potentials) == sorted(state.v.potentials)


def simulate_coupled(
    u0,
    v0,
    spec: ModelSpec,
    stop: StopCondition,
    rng,
    convention: str = "marginal_preserving",
    decided_stop: bool = False,
    backend: str | None = None,
) -> CouplingOutcome:
    """Evolve the coupled pair until a stop condition fires.

    ``decided_stop`` ends the run once the n_c-vs-n_dagger race and the
    opening-window event are both settled (the natural stop for
    coalescence experiments).  ``stop.target`` may only be "L" and then
    means: stop when the u component first reaches the full ladder.

    For start pairs inside W the coalescence-by-window bound is a hard
    guarantee; a violation raises.  Outside W the bound can fail
    legitimately and is reported via ``e1_bound_violated``.
    """
    literal = _check_convention(convention)
    cu = u0 if isinstance(u0, PotentialList) else PotentialList(u0)
    cv = v0 if isinstance(v0, PotentialList) else PotentialList(v0)
    if cu.n != cv.n:
        raise ValueError("coupled components must have the same size")
    if cu.n != spec.n:
        raise ValueError("u0 size does not match spec.n")
    if cu.is_null or cv.is_null:
        raise ValueError("cannot start coupling from a trapped component")
    if stop.target is not None and stop.target != "L":
        raise ValueError("coupled runs support only the ladder target")
    if not (decided_stop or stop.horizon is not None
            or stop.budget is not None or stop.target is not None):
        raise ValueError("need decided_stop, a horizon, a budget, or the ladder target")

    kern, _ = _kernels(backend)
    gen = _as_generator(rng)
    lb = math.log(spec.base)
    raw = kern.run_coupled(
        list(cu.potentials),
        list(cv.potentials),
        1 if spec.leak_kind == "decrement" else 0,
        lb,
        literal,
        math.inf if stop.horizon is None else float(stop.horizon),
        _BUDGET_SENTINEL if stop.budget is None else int(stop.budget),
        bool(decided_stop),
        stop.target == "L",
        _table_for(lb),
        gen,
    )
    outcome = CouplingOutcome(
        n_c=None if raw["n_c"] < 0 else int(raw["n_c"]),
        n_dagger=None if raw["n_dagger"] < 0 else int(raw["n_dagger"]),
        t_nc=None if math.isnan(raw["t_nc"]) else raw["t_nc"],
        e1_occurred=None if raw["e1"] < 0 else bool(raw["e1"]),
        jumps=int(raw["jumps"]),
        stop_reason=_REASONS[raw["stop_reason"]],
        time=raw["time"],
        u_ladder_time=None if math.isnan(raw["u_ladder_time"]) else raw["u_ladder_time"],
        v_ladder_time=None if math.isnan(raw["v_ladder_time"]) else raw["v_ladder_time"],
        final_u=PotentialList(raw["final_u"]),
        final_v=PotentialList(raw["final_v"]),
        e1_bound_violated=bool(raw["violation"]),
    )
    if outcome.e1_bound_violated and classify(cu).in_W and classify(cv).in_W:
        raise RuntimeError(
            "coalescence-by-window bound failed from a W start pair: "
            f"u0={cu.potentials} v0={cv.potentials} n_c={outcome.n_c} "
            f"window={2 * _fallback._ceil_sqrt(cu.n)}"
        )
    return outcome


def sample_W(n: int, rng, spread: int = 3) -> PotentialList:
    """Random member of W: distinct potentials containing the block
    {0, ..., n - isqrt(n)} plus isqrt(n)-1 distinct extras above it.

    ``spread`` widens the range the extras are drawn from; any value
    >= 1 keeps the result inside W (fuzzing knob for coupling starts).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if spread < 1:
        raise ValueError("spread must be >= 1")
    gen = _as_generator(rng)
    s = math.isqrt(n)
    block = list(range(n - s + 1))
    if s > 1:
        extras = [int(x) + n - s + 1
                  for x in gen.choice(spread * s, size=s - 1, replace=False)]
    else:
        extras = []
    values = block + extras
    perm = gen.permutation(n)
    potentials = [0] * n
    for pos, val in zip(perm, values):
        potentials[int(pos)] = val
    state = PotentialList(potentials)
    if not classify(state).in_W:
        raise AssertionError("W sampler produced a state outside W")
    return state


def sample_W_pair(n: int, rng, spread: int = 3) -> tuple[PotentialList, PotentialList]:
    """Independent pair of W starts for coalescence experiments."""
    gen = _as_generator(rng)
    return sample_W(n, gen, spread), sample_W(n, gen, spread)


def write_outcomes(path, outcomes) -> None:
    """CSV dump: replica,n_c,n_dagger,t_nc,e1,jumps,stop_reason.

    Absent values print as empty fields; times use 17 significant
    digits.
    """
    def cell(x):
        if x is None:
            return ""
        if isinstance(x, bool):
            return "1" if x else "0"
        if isinstance(x, float):
            return format(x, ".17g")
        return str(x)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("replica,n_c,n_dagger,t_nc,e1,jumps,stop_reason\n")
        for i, o in enumerate(outcomes):
            fh.write(",".join([
                str(i), cell(o.n_c), cell(o.n_dagger), cell(o.t_nc),
                cell(o.e1_occurred), str(o.jumps), o.stop_reason,
            ]) + "\n")
