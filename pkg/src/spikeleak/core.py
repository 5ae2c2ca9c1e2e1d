"""State representation, transition maps, rates, and set membership.

The state of a network of n neurons is a list of non-negative integer
membrane potentials whose minimum is 0.  A spike of neuron ``a`` resets
``a`` to 0 and increments every other neuron by one; a leak event either
resets one neuron to 0 or decrements it by one, depending on the model.
The all-zeros list is a trap: nothing fires and nothing changes.

All operations here are pure functions of their inputs and safe to call
from any number of concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import isqrt
from typing import Iterable

__all__ = [
    "PotentialList",
    "ModelSpec",
    "RankOrder",
    "SetFlags",
    "SpikeWeights",
    "LEAK_KINDS",
    "apply_spike",
    "apply_leak",
    "rank_order",
    "spike_weights",
    "effective_leak_count",
    "classify",
    "ladder",
]

LEAK_KINDS = ("reset", "decrement")


@dataclass(frozen=True)
class PotentialList:
    """Immutable list of membrane potentials with min equal to 0.

    Parameters
    ----------
    potentials : sequence of int
        Non-negative integers, at least two entries, minimum exactly 0.
    """

    potentials: tuple[int, ...]

    def __init__(self, potentials: Iterable[int]):
        values = tuple(int(p) for p in potentials)
        if len(values) < 2:
            raise ValueError("need at least 2 neurons, got %d" % len(values))
        if any(p < 0 for p in values):
            raise ValueError("negative membrane potential in %r" % (values,))
        if min(values) != 0:
            raise ValueError(
                "minimum potential must be 0, got %d in %r" % (min(values), values)
            )
        object.__setattr__(self, "potentials", values)

    @property
    def n(self) -> int:
        return len(self.potentials)

    def __len__(self) -> int:
        return len(self.potentials)

    def __getitem__(self, a: int) -> int:
        """Potential of neuron ``a`` (neurons are numbered 1..n)."""
        self._check_index(a)
        return self.potentials[a - 1]

    def __iter__(self):
        return iter(self.potentials)

    def _check_index(self, a: int) -> None:
        if not 1 <= a <= len(self.potentials):
            raise ValueError(
                "neuron index %r out of range 1..%d" % (a, len(self.potentials))
            )

    @property
    def is_null(self) -> bool:
        return all(p == 0 for p in self.potentials)


@dataclass(frozen=True)
class ModelSpec:
    """Model parameters: network size, leak mechanism, spike-rate base.

    A neuron at potential u spikes at rate ``base**u`` (silent at 0);
    each neuron carries an independent rate-1 leak clock.  ``leak_kind``
    selects what a leak does: "reset" zeroes the neuron, "decrement"
    lowers it by one (floored at 0).
    """

    n: int
    leak_kind: str = "reset"
    base: float = math.e

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2, got %r" % (self.n,))
        if self.leak_kind not in LEAK_KINDS:
            raise ValueError(
                "leak_kind must be one of %r, got %r" % (LEAK_KINDS, self.leak_kind)
            )
        if not self.base > 1.0:
            raise ValueError("base must be > 1, got %r" % (self.base,))


@dataclass(frozen=True)
class RankOrder:
    """Neuron indices sorted by ascending potential, ties by index."""

    order: tuple[int, ...]

    @property
    def lowest(self) -> int:
        return self.order[0]

    @property
    def highest(self) -> int:
        return self.order[-1]


@dataclass(frozen=True)
class SetFlags:
    """Membership of one state in each named set.

    ``in_S0``: at least floor(sqrt(n)) neurons are positive.
    ``in_S1``: at most sqrt(n) neurons are at 0.
    ``in_S2``: some ceil(sqrt(n)) neurons have strictly increasing
    potentials, all at least 1.
    ``in_S3``: the j-th smallest potential is at least j-1 for every j.
    ``in_W``: all potentials distinct and every value in
    {1, ..., n - floor(sqrt(n))} is present.
    ``in_L``: the potentials are exactly {0, 1, ..., n-1}.
    """

    is_null: bool
    in_S0: bool
    in_S1: bool
    in_S2: bool
    in_S3: bool
    in_W: bool
    in_L: bool

    # Note: the chain L <= W <= (S1 & S2 & S3) holds (W <= S2 needs
    # n >= 4); S1/S2/S3 are not nested among themselves.  See the
    # regression cases in the test suite.


@dataclass(frozen=True)
class SpikeWeights:
    """Per-neuron spike weights in max-shifted form.

    ``shifted[b-1] = base**(u(b) - m)`` for positive neurons (0 for
    silent ones), where ``m`` is the largest potential.  The total spike
    rate is ``base**m * shifted_sum``; selection probabilities
    ``shifted[b-1] / shifted_sum`` are exact with no overflow for any
    potential a 64-bit integer can hold.
    """

    shifted: tuple[float, ...]
    max_potential: int
    shifted_sum: float
    base: float

    @property
    def total(self) -> float:
        """Actual total rate; overflows to inf for huge potentials."""
        if self.shifted_sum == 0.0:
            return 0.0
        return math.exp(self.log_total)

    @property
    def log_total(self) -> float:
        if self.shifted_sum == 0.0:
            return -math.inf
        return self.max_potential * math.log(self.base) + math.log(self.shifted_sum)

    @property
    def weights(self) -> tuple[float, ...]:
        """Actual per-neuron rates; may overflow for huge potentials."""
        scale = self.base ** self.max_potential
        return tuple(w * scale for w in self.shifted)

    def probability(self, a: int) -> float:
        """Exact probability that neuron ``a`` is the next spiker."""
        if self.shifted_sum == 0.0:
            return 0.0
        return self.shifted[a - 1] / self.shifted_sum


def apply_spike(u: PotentialList, a: int) -> PotentialList:
    """Spike of neuron ``a``: a resets to 0, every other neuron gains 1.

    Raises ``ValueError`` if ``a`` is out of range or silent (a neuron
    at potential 0 has spike rate 0; asking it to spike is a caller bug).
    """
    u._check_index(a)
    if u.potentials[a - 1] == 0:
        raise ValueError("neuron %d has potential 0 and cannot spike" % a)
    return PotentialList(
        0 if b == a - 1 else p + 1 for b, p in enumerate(u.potentials)
    )


def apply_leak(u: PotentialList, a: int, kind: str) -> PotentialList:
    """Leak of neuron ``a``: reset to 0 or decrement by one.

    A leak of a silent neuron is a no-op and returns an equal state.
    """
    u._check_index(a)
    if kind not in LEAK_KINDS:
        raise ValueError("unknown leak kind %r" % (kind,))
    p = u.potentials[a - 1]
    if p == 0:
        return u
    new = 0 if kind == "reset" else p - 1
    return PotentialList(
        new if b == a - 1 else q for b, q in enumerate(u.potentials)
    )


def rank_order(u: PotentialList) -> RankOrder:
    """Neurons sorted by ascending potential; ties broken by index."""
    order = sorted(range(1, u.n + 1), key=lambda a: (u.potentials[a - 1], a))
    return RankOrder(tuple(order))


def spike_weights(u: PotentialList, base: float) -> SpikeWeights:
    """Spike rates of all neurons in overflow-safe max-shifted form."""
    m = max(u.potentials)
    if m == 0:
        return SpikeWeights((0.0,) * u.n, 0, 0.0, base)
    lb = math.log(base)
    shifted = tuple(
        math.exp((p - m) * lb) if p > 0 else 0.0 for p in u.potentials
    )
    return SpikeWeights(shifted, m, math.fsum(shifted), base)


def effective_leak_count(u: PotentialList, kind: str) -> int:
    """Number of neurons whose leak would change the state.

    For both leak kinds this is the number of positive neurons, and it
    equals the total effective leak rate (each clock has rate 1).
    """
    if kind not in LEAK_KINDS:
        raise ValueError("unknown leak kind %r" % (kind,))
    return sum(1 for p in u.potentials if p > 0)


def _ceil_sqrt(n: int) -> int:
    r = isqrt(n)
    return r if r * r == n else r + 1


def classify(u: PotentialList) -> SetFlags:
    """Evaluate every set-membership flag for one state."""
    n = u.n
    values = u.potentials
    zeros = sum(1 for p in values if p == 0)
    positives = n - zeros
    sorted_vals = sorted(values)
    distinct_positive = len({p for p in values if p > 0})
    value_set = set(values)

    root_floor = isqrt(n)
    root_ceil = _ceil_sqrt(n)

    is_null = positives == 0
    in_s0 = positives >= root_floor
    # zeros <= sqrt(n) for an integer count is zeros <= isqrt(n)
    in_s1 = zeros <= root_floor
    # strictly increasing positive potentials exist iff enough distinct
    # positive values exist (pick one neuron per value)
    in_s2 = distinct_positive >= root_ceil
    in_s3 = all(v >= j for j, v in enumerate(sorted_vals))
    in_w = len(value_set) == n and all(
        v in value_set for v in range(1, n - root_floor + 1)
    )
    in_l = value_set == set(range(n))
    return SetFlags(is_null, in_s0, in_s1, in_s2, in_s3, in_w, in_l)


def ladder(n: int) -> PotentialList:
    """The state (0, 1, ..., n-1)."""
    if n < 2:
        raise ValueError("n must be >= 2, got %r" % (n,))
    return PotentialList(range(n))
