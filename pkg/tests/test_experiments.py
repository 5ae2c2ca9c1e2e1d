"""Statistical harness: estimators, ensembles, reports, pinned expectations."""

import json
import math

import numpy as np
import pytest

from spikeleak.core import ModelSpec
from spikeleak.experiments import (
    P_TRAP,
    SEED_RULE,
    aggregate_taus,
    aux_occupancy,
    check_expectation,
    coupling_stats,
    estimate_c,
    expectation,
    extinction_ensemble,
    ks_exp1,
    ladder_hitting,
    load_expectations,
    memoryless_gap,
    occupancy,
    order_quantile,
    survival_fraction,
    t_prime,
    write_json,
    write_replica_csv,
)


# --- scalar estimators ------------------------------------------------------------


def test_order_quantile_is_ceil_rank_order_statistic():
    xs = list(range(100, 0, -1))  # 100..1, deliberately unsorted
    assert order_quantile(xs, 0.5) == 50.0
    assert order_quantile(xs, 0.01) == 1.0
    assert order_quantile(xs, 1.0) == 100.0
    assert order_quantile(xs, 0.995) == 100.0
    assert order_quantile(xs, 1e-9) == 1.0


def test_order_quantile_returns_a_sample():
    gen = np.random.Generator(np.random.PCG64(3))
    xs = gen.exponential(1.0, size=37)
    for p in (0.1, P_TRAP, 0.5, 0.9):
        assert order_quantile(xs, p) in xs


def test_estimate_c_on_grid():
    q = estimate_c(range(1, 101), p=0.5)
    assert q.value == 50.0
    assert q.p == 0.5
    assert q.lo99 <= q.value <= q.ci99[1]
    assert q.ci99[0] <= q.ci99[1]


def test_estimate_c_exponential_quantile():
    # the p = 1 - 1/e quantile of Exp(1) is exactly 1
    gen = np.random.Generator(np.random.PCG64(11))
    xs = gen.exponential(1.0, size=10_000)
    q = estimate_c(xs)
    assert abs(q.value - 1.0) < 0.05
    assert q.lo99 < 1.0 < q.ci99[1]
    again = estimate_c(xs)
    assert again == q  # seeded bootstrap, fully deterministic


def test_estimate_c_needs_enough_samples():
    with pytest.raises(ValueError):
        estimate_c(range(99))


def test_ks_exp1_point_mass():
    assert ks_exp1([3.7] * 50) == pytest.approx(1.0 - math.exp(-1.0), rel=1e-12)


def test_ks_exp1_rejects_degenerate_input():
    with pytest.raises(ValueError):
        ks_exp1([1.0])
    with pytest.raises(ValueError):
        ks_exp1([1.0, 0.0])
    with pytest.raises(ValueError):
        ks_exp1([1.0, -2.0])


def test_ks_exp1_true_exponential_is_small():
    gen = np.random.Generator(np.random.PCG64(21))
    xs = gen.exponential(2.5, size=20_000)  # scale drops out via normalization
    assert ks_exp1(xs) < 0.015


def test_survival_fraction():
    p, se = survival_fraction([1.0, 2.0, 3.0, 4.0], 2.5)
    assert p == 0.5
    assert se == pytest.approx(0.25)


def test_memoryless_gap_on_exponential():
    gen = np.random.Generator(np.random.PCG64(8))
    xs = gen.exponential(1.0, size=40_000)
    out = memoryless_gap(xs, c=1.0, s=0.5, t=0.5)
    assert set(out) == {"gap", "combined_se", "p_joint", "p_s", "p_t", "s", "t", "c"}
    assert out["gap"] <= 5.0 * out["combined_se"]
    assert out["p_joint"] == pytest.approx(math.exp(-1.0), abs=0.01)


def test_t_prime_reference_values():
    assert t_prime(16) == pytest.approx(0.5039132257410724, rel=1e-15)
    vals = [t_prime(n) for n in (9, 16, 25, 100)]
    assert vals == sorted(vals, reverse=True)


# --- extinction ensembles ----------------------------------------------------------


def test_extinction_ensemble_bookkeeping():
    rep = extinction_ensemble(ModelSpec(2, "reset"), (0, 1), 200, master_seed=7)
    agg = rep.aggregates
    assert agg["replicas"] == 200 and agg["absorbed"] == 200 and agg["censored"] == 0
    assert [r.replica for r in rep.records] == list(range(200))
    for r in rep.records:
        assert r.jumps == r.z_spike + r.z_leak
        assert r.stop_reason == "absorbed" and r.tau > 0
    assert abs(agg["mean"] - 1.0) < 0.3
    assert agg["ci99"][0] < agg["mean"] < agg["ci99"][1]
    qs = agg["quantiles"]
    assert qs["p25"] <= qs["p50"] <= qs["p_trap"] <= qs["p75"] <= qs["p90"]


def test_replica_streams_do_not_depend_on_ensemble_size():
    spec = ModelSpec(3, "decrement")
    small = extinction_ensemble(spec, "ladder", 3, master_seed=99)
    large = extinction_ensemble(spec, "ladder", 8, master_seed=99)
    assert large.records[:3] == small.records


def test_worker_count_does_not_change_results():
    spec = ModelSpec(2, "reset")
    serial = extinction_ensemble(spec, (0, 1), 40, master_seed=5, workers=1)
    pooled = extinction_ensemble(spec, (0, 1), 40, master_seed=5, workers=2)
    assert serial.records == pooled.records
    assert json.dumps(serial.payload()) == json.dumps(pooled.payload())


def test_censoring_is_reported():
    rep = extinction_ensemble(ModelSpec(3, "reset"), "ladder", 60, master_seed=13, horizon=1.0)
    agg = rep.aggregates
    assert agg["absorbed"] > 0 and agg["censored"] > 0
    assert agg["absorbed"] + agg["censored"] == 60
    censored = [r for r in rep.records if r.stop_reason == "horizon"]
    assert len(censored) == agg["censored"]
    assert all(math.isnan(r.tau) for r in censored)
    assert rep.taus.size == agg["absorbed"]


def test_acceptance_mode_rejects_censoring():
    with pytest.raises(RuntimeError, match="censored"):
        extinction_ensemble(
            ModelSpec(3, "reset"), "ladder", 60, master_seed=13, horizon=1.0,
            acceptance=True,
        )


def test_aggregates_recompute_from_records():
    rep = extinction_ensemble(ModelSpec(2, "decrement"), (0, 2), 150, master_seed=31)
    assert aggregate_taus(rep.records) == rep.aggregates
    assert rep.aggregates["mean"] == pytest.approx(float(rep.taus.mean()))
    assert rep.aggregates["ks_exp1"] == pytest.approx(ks_exp1(rep.taus))


def test_extinction_rejects_bad_init():
    with pytest.raises(ValueError):
        extinction_ensemble(ModelSpec(3, "reset"), (0, 0, 0), 5, master_seed=1)
    with pytest.raises(ValueError):
        extinction_ensemble(ModelSpec(3, "reset"), (0, 1), 5, master_seed=1)


def test_replica_csv_round_trip(tmp_path):
    rep = extinction_ensemble(ModelSpec(3, "reset"), "ladder", 20, master_seed=13, horizon=1.0)
    path = tmp_path / "reps.csv"
    write_replica_csv(path, rep.records)
    lines = path.read_text().splitlines()
    assert lines[0] == "replica,tau,jumps,z_spike,z_leak,stop_reason"
    assert len(lines) == 21
    for line, rec in zip(lines[1:], rep.records):
        cells = line.split(",")
        assert int(cells[0]) == rec.replica
        if cells[1] == "":
            assert math.isnan(rec.tau)
        else:
            assert float(cells[1]) == rec.tau  # 17 digits round-trip exactly
        assert cells[5] == rec.stop_reason


def test_payload_schema(tmp_path):
    rep = extinction_ensemble(ModelSpec(2, "reset"), (0, 1), 10, master_seed=7)
    payload = rep.payload()
    assert payload["schema"] == 1
    assert payload["tool"]["name"] == "spikeleak"
    assert payload["seed_rule"] == SEED_RULE
    assert payload["config"]["master_seed"] == 7
    assert payload["config"]["n"] == 2
    assert payload["record_fields"][0] == "replica"
    assert len(payload["records"]) == 10
    out = tmp_path / "report.json"
    write_json(out, payload)
    text = out.read_text()
    assert text.endswith("\n")
    assert json.loads(text) == json.loads(json.dumps(payload))


# --- fixed-time occupancy, ladder hitting, coupling, auxiliary ----------------------


def test_occupancy_report():
    rep = occupancy(ModelSpec(4, "reset"), 0.3, 200, master_seed=11)
    assert rep.survivors >= 150
    assert 0.0 < rep.estimate < 1.0
    assert rep.in_w <= rep.survivors
    assert rep.estimate == pytest.approx(rep.in_w / rep.survivors)
    assert 0.0 <= rep.ci99[0] < rep.ci99[1] <= 1.0
    agg = rep.payload()["aggregates"]
    assert agg["estimate"] == rep.estimate and agg["survivors"] == rep.survivors


def test_occupancy_with_no_survivors_raises():
    with pytest.raises(RuntimeError, match="survived"):
        occupancy(ModelSpec(2, "reset"), 40.0, 30, master_seed=4, init=(0, 1))


def test_occupancy_rejects_bad_t():
    with pytest.raises(ValueError):
        occupancy(ModelSpec(4, "reset"), 0.0, 10, master_seed=1)


def test_ladder_hitting_small_network():
    rep = ladder_hitting(ModelSpec(9, "reset"), 100, master_seed=5)
    assert rep.t_prime == pytest.approx(t_prime(9))
    assert rep.fraction_by_t_prime >= 0.9
    assert rep.hits >= 90
    hits_within = sum(
        1 for r in rep.records
        if not math.isnan(r.hit_time) and r.hit_time <= rep.t_prime
    )
    assert rep.fraction_by_t_prime == pytest.approx(hits_within / 100)
    for r in rep.records:
        if not math.isnan(r.hit_time):
            assert 0.0 <= r.hit_time <= 2.0 * rep.t_prime


def test_coupling_stats_small_network():
    rep = coupling_stats(
        ModelSpec(4, "reset"), "marginal_preserving", 100, master_seed=3,
        jump_budget=10**6,
    )
    assert rep.violations == 0
    assert rep.coalesced >= 90
    assert rep.p_coalesce_first >= 0.8
    assert 0.0 <= rep.e1_frequency <= 1.0
    qs = rep.t_nc_quantiles
    assert qs["p25"] <= qs["p50"] <= qs["p75"] <= qs["p90"]
    payload = rep.payload()
    assert payload["record_fields"] == [
        "replica", "n_c", "n_dagger", "t_nc", "e1", "jumps", "stop_reason",
    ]
    assert payload["aggregates"]["p_coalesce_first"] == rep.p_coalesce_first


def test_aux_occupancy_report():
    rep = aux_occupancy(ModelSpec(6, "reset"), 0.5, 2.0, replicas=5, master_seed=2)
    assert 0.5 < rep.mean <= 1.0
    assert all(0.0 <= r.occupation <= 1.0 for r in rep.records)
    assert rep.ci99[0] <= rep.mean <= rep.ci99[1]


def test_aux_occupancy_rejects_bad_window():
    spec = ModelSpec(4, "reset")
    with pytest.raises(ValueError):
        aux_occupancy(spec, 2.0, 2.0, replicas=2, master_seed=0)
    with pytest.raises(ValueError):
        aux_occupancy(spec, 0.0, 2.0, replicas=2, master_seed=0)


# --- pinned expectations --------------------------------------------------------------


def test_expectations_file_is_well_formed():
    table = load_expectations()
    assert table["version"] >= 1
    assert table["criteria"]
    for name, entry in table["criteria"].items():
        assert entry["kind"] in ("lower_bound", "upper_bound", "interval"), name
        float(entry["value"])
        assert entry["source"], name
        if entry["kind"] == "interval":
            assert float(entry["tolerance"]) > 0.0, name


def test_check_expectation_kinds():
    assert check_expectation("occupancy_floor", 0.95)
    assert not check_expectation("occupancy_floor", 0.5)
    assert check_expectation("extinction_ks_cap", 0.02)
    assert not check_expectation("extinction_ks_cap", 0.2)
    assert check_expectation("extinction_mean_n2_reset", 1.1)
    assert not check_expectation("extinction_mean_n2_reset", 1.4)


def test_unknown_expectation_raises():
    with pytest.raises(KeyError, match="no pinned expectation"):
        expectation("definitely_not_pinned")
