import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shellclear.errors import NumericalInstabilityError, ParameterError, ShapeError
from shellclear.simulation import SimulationSettings, run_batch
from shellclear.thermal import (
    BLANKET0,
    CHAIN,
    END_NODES,
    KELVIN,
    N_HALF,
    N_STATE,
    N_ZONES,
    ROTOR,
    ZONE_NODE,
    PlantParams,
    PlantState,
    ProfileSpec,
    Propagator,
    assemble_shell_system,
    contact_heat_flow,
    external_heat_input,
    initial_hot_shutdown_state,
    linear_system,
    step,
)

from oracles import boundary_flows, stored_energy


def ambient_state(params):
    return PlantState.from_vector(np.full(N_STATE, params.t_ambient))


# contact heat flow

def test_contact_flow_zero_differential():
    assert contact_heat_flow(400.0, 400.0, 123.0, 4.5) == 0.0


def test_contact_flow_direct_substitution():
    assert contact_heat_flow(410.0, 400.0, 100.0, 1.0) == pytest.approx(1000.0, abs=1e-12)


def test_contact_flow_antisymmetric():
    rng = np.random.default_rng(1)
    for _ in range(100):
        ta, tb = rng.uniform(250, 900, 2)
        h, a = rng.uniform(0.1, 1e3), rng.uniform(0.1, 10)
        assert contact_heat_flow(ta, tb, h, a) == pytest.approx(-contact_heat_flow(tb, ta, h, a), rel=1e-15, abs=0)


@pytest.mark.parametrize("h, a", [(0.0, 1.0), (1.0, 0.0), (-3.0, 1.0)])
def test_contact_flow_rejects_nonpositive(h, a):
    with pytest.raises(ParameterError):
        contact_heat_flow(1.0, 0.0, h, a)


# diffusion operator

def test_three_node_operator_matches_stencil():
    h = 0.7
    D, w, mask = assemble_shell_system(3, h)
    expected = np.array([[-h, h, 0.0], [1.0, -2.0, 1.0], [0.0, h, -h]]) / h**2
    np.testing.assert_allclose(D, expected, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(w, [h / 2, 1.0, h / 2])
    np.testing.assert_array_equal(mask, [0.0, 1.0, 0.0])


def test_operator_annihilates_constants():
    D, _, _ = assemble_shell_system(12, 1.0)
    np.testing.assert_allclose(D @ np.full(12, 431.0), 0.0, atol=1e-10)


def test_operator_on_linear_ramp():
    h, c = 0.5, 3.0
    D, _, _ = assemble_shell_system(8, h)
    out = D @ (c * np.arange(8.0))
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-12)
    assert out[0] == pytest.approx(c / h)
    assert out[-1] == pytest.approx(-c / h)


def test_operator_needs_three_nodes():
    with pytest.raises(ParameterError):
        assemble_shell_system(2, 1.0)


def test_structural_zero_heat_input_at_ends():
    p = PlantParams()
    rng = np.random.default_rng(3)
    x = rng.uniform(300, 800, N_STATE)
    q = external_heat_input(x, np.ones(N_ZONES, bool), p)
    assert q.shape == (2, CHAIN)
    assert np.all(q[:, 0] == 0.0) and np.all(q[:, -1] == 0.0)
    assert np.any(q[:, 1:-1] != 0.0)


def test_end_nodes_have_no_external_coupling():
    sys_ = linear_system(PlantParams())
    for node in END_NODES:
        assert sys_.g_ambient[node] == 0.0
        assert sys_.K[node, ROTOR] == 0.0
        assert np.all(sys_.K[node, BLANKET0:ROTOR] == 0.0)


def test_no_direct_coupling_between_halves_or_blankets():
    K = linear_system(PlantParams()).K
    assert np.all(K[:CHAIN, CHAIN : 2 * CHAIN] == 0.0)
    blk = K[BLANKET0:ROTOR, BLANKET0:ROTOR]
    assert np.all(blk[~np.eye(N_ZONES, dtype=bool)] == 0.0)


# step

def test_ambient_state_is_fixed_point():
    p = PlantParams()
    s0 = ambient_state(p)
    for dt in (1.0, 30.0, 3600.0):
        s1 = step(s0, np.zeros(N_ZONES, bool), p, dt)
        np.testing.assert_allclose(s1.to_vector(), s0.to_vector(), rtol=0, atol=1e-9)


def test_single_blanket_warms_its_zone_over_mirror():
    p = PlantParams()
    u = np.zeros(N_ZONES, bool)
    u[3] = True
    prop = Propagator(p, 3600.0)
    x = np.full(N_STATE, p.t_ambient)
    for _ in range(24 * 20):
        x = prop.step_once(x, u)
    mirror = 3 + N_HALF
    assert x[ZONE_NODE[3]] > x[ZONE_NODE[mirror]]
    assert x[BLANKET0 + 3] > x[BLANKET0 + mirror]


def test_one_step_energy_audit():
    p = PlantParams()
    s0 = initial_hot_shutdown_state(p)
    u = np.zeros(N_ZONES, bool)
    u[::3] = True
    sys_ = linear_system(p)
    for dt in (10.0, 120.0, 900.0):
        s1 = step(s0, u, p, dt)
        d_e = stored_energy(sys_, s1.to_vector(), p.t_ambient) - stored_energy(sys_, s0.to_vector(), p.t_ambient)
        heat, loss = boundary_flows(sys_, s1.to_vector(), u, p)
        assert abs(d_e - (heat - loss) * dt) <= 1e-3 * max(abs(heat), abs(loss)) * dt


def test_step_rejects_bad_dt():
    p = PlantParams()
    with pytest.raises(ParameterError):
        step(ambient_state(p), np.zeros(N_ZONES, bool), p, 0.0)


def test_step_names_non_finite_component():
    p = PlantParams()
    x = np.full(N_STATE, p.t_ambient)
    x[BLANKET0 + 7] = np.nan
    with pytest.raises(NumericalInstabilityError) as info:
        step(PlantState.from_vector(x), np.zeros(N_ZONES, bool), p, 30.0)
    assert "blanket" in info.value.component


def test_run_batch_reports_scenario_of_instability():
    p = PlantParams()
    x = np.full((1, N_STATE), p.t_ambient)
    x[0, ROTOR] = np.inf
    with pytest.raises(NumericalInstabilityError) as info:
        run_batch([p], SimulationSettings(), horizon_h=0.1, initial=x, scenario_ids=["s-42"])
    assert info.value.scenario == "s-42"


# initial state

def test_flat_profile_at_ambient_gives_uniform_state():
    p = PlantParams()
    spec = ProfileSpec(peak_temperature=p.t_ambient, end_temperature=p.t_ambient)
    x = initial_hot_shutdown_state(p, spec).to_vector()
    np.testing.assert_array_equal(x, np.full(N_STATE, p.t_ambient))


def test_initial_state_has_no_differential_and_equilibrated_blankets():
    p = PlantParams()
    s = initial_hot_shutdown_state(p, ProfileSpec(peak_temperature=838.15, peak_position=0.5))
    np.testing.assert_array_equal(s.t_shell_upper, s.t_shell_lower)
    np.testing.assert_array_equal(s.t_blanket, s.t_zone)
    # hottest at mid-shell
    assert int(np.argmax(s.t_shell_upper)) in (N_HALF // 2 - 1, N_HALF // 2)


def test_initial_state_rejects_peak_below_ambient():
    p = PlantParams()
    with pytest.raises(ParameterError):
        initial_hot_shutdown_state(p, ProfileSpec(peak_temperature=p.t_ambient - 1.0, end_temperature=None))


# parameters

def test_params_reject_wrong_length():
    with pytest.raises(ShapeError):
        PlantParams(h_contact=np.ones(7))


def test_params_reject_nonpositive():
    with pytest.raises(ParameterError):
        PlantParams(alpha=0.0)
    with pytest.raises(ParameterError):
        PlantParams(h_rotor=-1.0)


def test_lower_loss_area_not_below_upper():
    a = np.full(N_ZONES, 3.0)
    a[N_HALF:] = 2.0
    with pytest.raises(ParameterError):
        PlantParams(a_shell_ambient=a)


def test_default_lower_loss_area_is_one_and_a_half_times_upper():
    a = PlantParams().a_shell_ambient
    np.testing.assert_allclose(a[N_HALF:] / a[:N_HALF], 1.5, rtol=1e-2)


# properties

@settings(max_examples=25, deadline=None)
@given(
    peak=st.floats(100.0, 600.0),
    end_frac=st.floats(0.0, 1.0),
    pos=st.floats(0.0, 1.0),
    dt=st.sampled_from([30.0, 300.0, 3600.0]),
)
def test_heaters_off_comparison_principle(peak, end_frac, pos, dt):
    p = PlantParams()
    peak_k = peak + KELVIN
    spec = ProfileSpec(peak_temperature=peak_k, peak_position=pos,
                       end_temperature=p.t_ambient + end_frac * (peak_k - p.t_ambient))
    prop = Propagator(p, dt)
    x = initial_hot_shutdown_state(p, spec).to_vector()
    hi = x.max()
    off = np.zeros(N_ZONES)
    for _ in range(40):
        x = prop.step_once(x, off)
        assert x.max() <= hi + 1e-9
        assert x.min() >= p.t_ambient - 1e-9
        hi = x.max()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mirror_symmetry(seed):
    rng = np.random.default_rng(seed)
    half = {name: rng.uniform(0.5, 2.0, N_HALF) for name in ("h_contact", "h_rotor", "h_shell_ambient")}
    p = PlantParams(**{k: np.concatenate((v, v)) for k, v in half.items()},
                    node_volume=0.1, heater_power=1e4, a_shell_ambient=3.0, h_blanket_ambient=1.0)
    prop = Propagator(p, 120.0)
    x = initial_hot_shutdown_state(p).to_vector()
    for _ in range(60):
        u_half = rng.random(N_HALF) < 0.5
        x = prop.step_once(x, np.concatenate((u_half, u_half)))
        np.testing.assert_allclose(x[:CHAIN], x[CHAIN : 2 * CHAIN], rtol=0, atol=1e-9)
        np.testing.assert_allclose(x[BLANKET0 : BLANKET0 + N_HALF], x[BLANKET0 + N_HALF : ROTOR], rtol=0, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
def test_window_conservation(seed, n):
    p = PlantParams()
    rng = np.random.default_rng(seed)
    dt = 60.0
    prop = Propagator(p, dt)
    sys_ = prop.system
    x0 = x = initial_hot_shutdown_state(p).to_vector()
    net = 0.0
    gross = 0.0
    for _ in range(n):
        u = rng.random(N_ZONES) < 0.5
        x = prop.step_once(x, u)
        heat, loss = boundary_flows(sys_, x, u, p)
        net += (heat - loss) * dt
        gross += (heat + loss) * dt
    d_e = stored_energy(sys_, x, p.t_ambient) - stored_energy(sys_, x0, p.t_ambient)
    assert abs(d_e - net) <= 1e-3 * gross


def test_folded_propagator_equals_repeated_steps():
    p = PlantParams()
    u = np.zeros(N_ZONES)
    u[[2, 11, 17]] = 1.0
    folded = Propagator(p, 15.0, substeps=4)
    x = initial_hot_shutdown_state(p).to_vector()
    y = x.copy()
    for _ in range(4):
        y = folded.step_once(y, u)
    np.testing.assert_allclose(folded.advance(x, u), y, rtol=1e-12)
