"""State maps, rank order, rates, and set classifiers."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikeleak.core import (
    ModelSpec,
    PotentialList,
    apply_leak,
    apply_spike,
    classify,
    effective_leak_count,
    ladder,
    rank_order,
    spike_weights,
)


def states(min_n=2, max_n=12, max_value=9):
    """Random valid states: non-negative entries with min forced to 0."""
    def fix(values):
        lo = min(values)
        return tuple(v - lo for v in values)

    return st.integers(min_n, max_n).flatmap(
        lambda n: st.lists(
            st.integers(0, max_value), min_size=n, max_size=n
        ).map(fix)
    )


def nonnull_states(min_n=2, max_n=12, max_value=9):
    return states(min_n, max_n, max_value).filter(lambda u: any(v > 0 for v in u))


# --- PotentialList invariants ------------------------------------------------


def test_potential_list_validation():
    with pytest.raises(ValueError):
        PotentialList((1, 2))  # min must be 0
    with pytest.raises(ValueError):
        PotentialList((0, -1))
    with pytest.raises(ValueError):
        PotentialList((0,))  # n >= 2
    u = PotentialList((0, 3, 1))
    assert u.n == 3
    assert u[2] == 3  # 1-based access
    assert not u.is_null
    assert PotentialList((0, 0)).is_null


def test_model_spec_validation():
    ModelSpec(2, "reset")
    ModelSpec(3, "decrement", base=2.0)
    with pytest.raises(ValueError):
        ModelSpec(1, "reset")
    with pytest.raises(ValueError):
        ModelSpec(3, "zap")
    with pytest.raises(ValueError):
        ModelSpec(3, "reset", base=1.0)


# --- transition maps ----------------------------------------------------------


def test_spike_examples():
    assert apply_spike(PotentialList((0, 3, 1)), 2).potentials == (1, 0, 2)
    assert apply_spike(PotentialList((0, 1)), 2).potentials == (1, 0)


def test_spike_rejects_silent_or_out_of_range():
    u = PotentialList((0, 3, 1))
    with pytest.raises(ValueError):
        apply_spike(u, 1)  # silent neuron
    with pytest.raises(ValueError):
        apply_spike(u, 0)
    with pytest.raises(ValueError):
        apply_spike(u, 4)


def test_leak_examples():
    u = PotentialList((0, 3, 1))
    assert apply_leak(u, 2, "reset").potentials == (0, 0, 1)
    assert apply_leak(u, 2, "decrement").potentials == (0, 2, 1)
    # silent leak is a no-op for both kinds
    assert apply_leak(u, 1, "reset").potentials == u.potentials
    assert apply_leak(u, 1, "decrement").potentials == u.potentials
    with pytest.raises(ValueError):
        apply_leak(u, 5, "reset")


@given(nonnull_states())
def test_spike_law_componentwise(u):
    state = PotentialList(u)
    spiker = max(range(1, state.n + 1), key=lambda a: (u[a - 1], -a))
    out = apply_spike(state, spiker)
    for b in range(1, state.n + 1):
        expected = 0 if b == spiker else u[b - 1] + 1
        assert out[b] == expected


@given(states(), st.data())
def test_closure_under_maps(u, data):
    """Every map lands back inside the state space (min entry 0)."""
    state = PotentialList(u)
    a = data.draw(st.integers(1, state.n))
    for kind in ("reset", "decrement"):
        out = apply_leak(state, a, kind)
        assert min(out.potentials) == 0
    if state[a] > 0:
        out = apply_spike(state, a)
        assert min(out.potentials) == 0


# --- rank order ---------------------------------------------------------------


def test_rank_order_examples():
    assert rank_order(PotentialList((2, 0, 2))).order == (2, 1, 3)
    assert rank_order(PotentialList((3, 0, 2, 1))).order == (2, 4, 3, 1)
    assert rank_order(PotentialList((0, 0, 0))).order == (1, 2, 3)


@given(states())
def test_rank_order_is_stable_ascending(u):
    state = PotentialList(u)
    ro = rank_order(state)
    assert sorted(ro.order) == list(range(1, state.n + 1))
    for j in range(state.n - 1):
        a, b = ro.order[j], ro.order[j + 1]
        assert (state[a], a) < (state[b], b)
    assert state[ro.lowest] == 0


# --- spike weights -------------------------------------------------------------


def test_spike_weight_examples():
    w = spike_weights(PotentialList((0, 1)), math.e)
    assert w.weights == pytest.approx((0.0, math.e))
    assert w.total == pytest.approx(math.e)

    w = spike_weights(PotentialList((0, 1, 2)), math.e)
    assert w.total == pytest.approx(math.e + math.e**2)
    assert w.max_potential == 2
    assert w.shifted_sum == pytest.approx(math.exp(-1) + 1.0)

    assert spike_weights(PotentialList((0, 0)), 3.0).total == 0.0


def test_spike_weights_huge_potentials_no_overflow():
    # total would overflow a double; the shifted form must stay finite
    u = PotentialList((0, 10_000, 9_999))
    w = spike_weights(u, math.e)
    assert math.isfinite(w.shifted_sum)
    assert w.probability(2) == pytest.approx(1.0 / (1.0 + math.exp(-1)))
    assert w.log_total == pytest.approx(10_000 + math.log(1 + math.exp(-1)))


@given(nonnull_states(max_value=20))
def test_spike_probabilities_normalize(u):
    state = PotentialList(u)
    w = spike_weights(state, 2.0)
    total = sum(w.probability(a) for a in range(1, state.n + 1))
    assert total == pytest.approx(1.0)
    for a in range(1, state.n + 1):
        if state[a] == 0:
            assert w.probability(a) == 0.0


# --- effective leak counts -----------------------------------------------------


def test_effective_leak_count():
    assert effective_leak_count(PotentialList((0, 3, 1)), "reset") == 2
    assert effective_leak_count(PotentialList((0, 0, 0)), "reset") == 0
    for n in (2, 5, 9):
        assert effective_leak_count(ladder(n), "decrement") == n - 1


# --- classifiers ----------------------------------------------------------------


def test_classify_examples():
    f = classify(PotentialList((0, 1, 2, 7)))
    assert f.in_W and not f.in_L

    f = classify(PotentialList((0, 1, 1, 3)))
    assert not f.in_W and f.in_S2

    f = classify(PotentialList((3, 0, 2, 1)))
    assert f.in_L and f.in_W and f.in_S3


def test_ladder_constructor():
    assert ladder(2).potentials == (0, 1)
    assert ladder(4).potentials == (0, 1, 2, 3)
    assert classify(ladder(10)).in_S3
    for n in range(2, 13):
        assert classify(ladder(n)).in_L


def test_null_classification():
    f = classify(PotentialList((0, 0, 0, 0)))
    assert f.is_null
    assert not f.in_L


@given(states(min_n=2, max_n=16, max_value=20))
@settings(max_examples=300)
def test_nesting_that_actually_holds(u):
    """L is within W; W is within S1, S3 always and S2 once n >= 4."""
    state = PotentialList(u)
    f = classify(state)
    if f.in_L:
        assert f.in_W
    if f.in_W:
        assert f.in_S1 and f.in_S3
        if state.n >= 4:
            assert f.in_S2


# The S0..S3 families are not themselves nested, although each contains
# W.  Keep explicit witnesses so a "simplification" to a chained check
# cannot sneak back in.


def test_s1_not_inside_s2():
    f = classify(PotentialList((0, 4, 4, 4, 4)))
    assert f.in_S1 and not f.in_S2


def test_s3_not_inside_s2():
    f = classify(PotentialList((0, 2, 2, 4, 4)))
    assert f.in_S3 and not f.in_S2


def test_s0_not_inside_s1():
    f = classify(PotentialList((0, 0, 0, 0, 0, 0, 1, 2, 3)))
    assert f.in_S0 and not f.in_S1


def test_w_needs_low_block_not_just_distinct():
    # distinct values alone are not enough; 1..n-floor(sqrt(n)) must appear
    f = classify(PotentialList((0, 2, 3, 9)))
    assert not f.in_W


# --- deterministic ladder reaching ----------------------------------------------


def fold_max_rank_spikes(state: PotentialList, steps: int) -> PotentialList:
    for _ in range(steps):
        state = apply_spike(state, rank_order(state).highest)
    return state


def test_fold_example():
    out = fold_max_rank_spikes(PotentialList((0, 5, 2)), 2)
    assert out.potentials == (2, 1, 0)
    assert classify(out).in_L


def test_fold_reaches_ladder_randomized():
    """Spiking the top-rank neuron n-1 times always lands in L."""
    import random

    rng = random.Random(417)
    for n in range(2, 13):
        for _ in range(100):
            values = [rng.randint(0, 9) for _ in range(n)]
            values[rng.randrange(n)] = 0
            if not any(values):
                values[0] = 1
            state = fold_max_rank_spikes(PotentialList(tuple(values)), n - 1)
            assert classify(state).in_L, state.potentials
