import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shellclear.campaign import (
    TABLE1_ROWS,
    CampaignContext,
    FaultSpec,
    VariabilitySample,
    combination_count,
    enumerate_failures,
    estimate_pdf,
    make_scenarios,
    run_campaign,
    run_scenario,
    run_scenarios,
    run_table1_suite,
)
from shellclear.control import ControllerConfig
from shellclear.errors import InsufficientDataError, ParameterError, SequencingError
from shellclear.simulation import SimulationSettings, run_single
from shellclear.thermal import HEAT_TRANSFER_COEFFICIENTS, N_HALF, N_ZONES, PlantParams

SHORT = SimulationSettings(dt=120.0, controller_period=120.0, horizon_h=30.0, baseline_horizon_h=60.0)


@pytest.fixture(scope="module")
def ctx():
    return CampaignContext.prepare(PlantParams(), SHORT, ControllerConfig(), master_seed=11)


# enumeration

@pytest.mark.parametrize("k, count", [(0, 1), (1, 20), (2, 190), (4, 4845)])
def test_enumeration_counts(k, count):
    combos = enumerate_failures(k)
    assert len(combos) == count == math.comb(20, k)
    assert len(set(combos)) == count


def test_enumeration_is_lexicographic():
    combos = enumerate_failures(2)
    assert [sorted(c) for c in combos[:3]] == [[0, 1], [0, 2], [0, 3]]


def test_enumeration_range_error():
    with pytest.raises(ParameterError):
        enumerate_failures(21)


def test_total_campaign_count():
    assert combination_count((1, 2, 3, 4)) == 20 + 190 + 1140 + 4845 == 6195


# fault and variability specs

def test_fault_spec_validation():
    with pytest.raises(ParameterError):
        FaultSpec(failed_off={1}, stuck_on={1})
    with pytest.raises(ParameterError):
        FaultSpec(failed_off={20})
    with pytest.raises(ParameterError):
        FaultSpec(lower_loss_multiplier=0.0)


def test_fault_apply():
    p = PlantParams()
    q = FaultSpec(airgap_zones={3, 14}, airgap_factor=20.0, lower_loss_multiplier=6.0).apply(p)
    assert q.h_contact[3] == pytest.approx(p.h_contact[3] / 20)
    assert q.h_contact[0] == p.h_contact[0]
    np.testing.assert_allclose(q.a_shell_ambient[N_HALF:], 6 * p.a_shell_ambient[N_HALF:])
    np.testing.assert_array_equal(q.a_shell_ambient[:N_HALF], p.a_shell_ambient[:N_HALF])
    np.testing.assert_allclose(q.a_blanket_ambient[N_HALF:], 6 * p.a_blanket_ambient[N_HALF:])
    assert FaultSpec().apply(p) is p


def test_fault_masks_and_label():
    f = FaultSpec(failed_off={2, 5}, stuck_on={7})
    off, on = f.masks()
    assert off.sum() == 2 and off[2] and off[5] and on.sum() == 1 and on[7]
    assert f.label() == "off:2-5 on:7"
    assert FaultSpec().label() == "nominal"


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), index=st.integers(0, 10**6), draw=st.integers(0, 5))
def test_variability_bounds_and_determinism(seed, index, draw):
    a = VariabilitySample.draw(seed, index, draw)
    b = VariabilitySample.draw(seed, index, draw)
    assert set(a.factors) == set(HEAT_TRANSFER_COEFFICIENTS)
    for name, f in a.factors.items():
        spread = 0.5 if name == "h_contact" else 0.25
        assert f.shape == (N_ZONES,)
        assert np.all(f >= 1 - spread) and np.all(f <= 1 + spread)
        np.testing.assert_array_equal(f, b.factors[name])


def test_variability_spans_its_range():
    f = np.concatenate([VariabilitySample.draw(0, i).factors["h_contact"] for i in range(200)])
    assert f.min() < 0.55 and f.max() > 1.45
    g = np.concatenate([VariabilitySample.draw(0, i).factors["h_rotor"] for i in range(200)])
    assert g.min() < 0.78 and g.max() > 1.22


def test_unit_variability_is_identity():
    p = PlantParams()
    q = VariabilitySample.unit().apply(p)
    for name in HEAT_TRANSFER_COEFFICIENTS:
        np.testing.assert_array_equal(getattr(q, name), getattr(p, name))


# density estimate

def test_pdf_degenerate_sample():
    d = estimate_pdf(np.full(50, 12.5))
    assert np.count_nonzero(d.histogram) == 1
    assert d.grid[np.argmax(d.density)] == pytest.approx(12.5, abs=1e-3)
    assert abs(d.integral() - 1.0) <= 1e-6


def test_pdf_uniform_histogram_is_flat():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, 10_000)
    d = estimate_pdf(x, bins=20)
    counts = d.histogram * np.diff(d.edges) * x.size
    expected = x.size / 20
    chi2 = np.sum((counts - expected) ** 2 / expected)
    assert chi2 < 43.8  # 99.9th percentile, 19 dof


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 500.0), min_size=2, max_size=300))
def test_pdf_integrates_to_one(samples):
    assert abs(estimate_pdf(samples).integral() - 1.0) <= 1e-6


def test_pdf_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        estimate_pdf([1.0])


# scenarios

def test_sequencing_error_without_baseline():
    bare = CampaignContext(PlantParams(), SHORT, ControllerConfig())
    with pytest.raises(SequencingError):
        run_scenarios(make_scenarios([FaultSpec()], bare), bare)
    with pytest.raises(SequencingError):
        run_table1_suite(bare)


def test_identity_scenario_is_nominal_run(ctx):
    r = run_scenario(FaultSpec(), VariabilitySample.unit(), ctx)
    direct = run_single(ctx.params, ctx.settings, ctx.controller)
    assert r.p2p_pct == pytest.approx(100 * direct.peak_to_peak[0] / ctx.baseline.norm, rel=1e-12)
    assert r.label == "nominal" and r.seed is None


def test_results_independent_of_order_and_chunking(ctx):
    faults = [FaultSpec(failed_off=c) for c in enumerate_failures(1)]
    scen = make_scenarios(faults, ctx)
    a = run_scenarios(scen, ctx, chunk_size=64)
    b = run_scenarios(scen[::-1], ctx, chunk_size=3)[::-1]
    assert [r.p2p_pct for r in a] == [r.p2p_pct for r in b]


def test_worker_count_does_not_change_results(ctx):
    faults = [FaultSpec(failed_off=c) for c in enumerate_failures(1)]
    scen = make_scenarios(faults, ctx)
    a = run_scenarios(scen, ctx, workers=1, chunk_size=4)
    b = run_scenarios(scen, ctx, workers=2, chunk_size=4)
    assert a == b


def test_campaign_groups_and_seeds(ctx):
    res = run_campaign(ctx, (1,))
    assert list(res.groups) == ["k=1"]
    assert res.groups["k=1"].count == 20
    assert [r.seed for r in res.scenarios] == [(11, i, 0) for i in range(20)]
    assert abs(res.groups["k=1"].density.integral() - 1.0) <= 1e-6
    assert np.all(res.values() >= 0.0)


def test_more_failures_never_improve_worst_case(ctx):
    # failing an extra heater on top of a fixed set cannot help the worst case
    ctx1 = CampaignContext(ctx.params, ctx.settings, ctx.controller, ctx.baseline, variability=False)
    one = run_scenarios(make_scenarios([FaultSpec(failed_off={z}) for z in range(N_ZONES)], ctx1), ctx1)
    worst1 = max(r.p2p_pct for r in one)
    z = max(one, key=lambda r: r.p2p_pct).index
    two = run_scenarios(make_scenarios([FaultSpec(failed_off={z, w}) for w in range(N_ZONES) if w != z], ctx1), ctx1)
    assert max(r.p2p_pct for r in two) >= worst1 - 1e-9


def test_table1_suite_rows(ctx):
    ctx1 = CampaignContext(ctx.params, ctx.settings, ctx.controller, ctx.baseline, variability=False)
    small = run_campaign(ctx1, (1,))
    report = run_table1_suite(ctx1, failed_1_4=small, five_failed_limit=3)
    assert list(report.rows) == list(TABLE1_ROWS) and len(report.rows) == 7
    assert report.counts[TABLE1_ROWS[0]] == 20
    assert report.counts[TABLE1_ROWS[1]] == 3
    assert report.counts[TABLE1_ROWS[2]] == 20
    assert report.counts[TABLE1_ROWS[3]] == 190
    assert report.rows[TABLE1_ROWS[2]] == pytest.approx(max(
        run_scenario(FaultSpec(stuck_on={z}), VariabilitySample.unit(), ctx1).p2p_pct for z in range(N_ZONES)))
    text = report.format()
    for name in TABLE1_ROWS:
        assert name in text
    assert set(report.ordering_checks()) and all(isinstance(v, bool) for v in report.ordering_checks().values())
