import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from castaway_tracking.seaworld import (
    CastawayTruth,
    WaveSource,
    drift_step,
    generate_truth,
    water_velocity,
)

DEFAULT = dict(origin=(0.0, 0.0), wavelength=50.0, wave_height=1.0, decay_rate=0.001, water_depth=500.0)

# Independent 40-digit evaluation (mpmath) of the wave formula for the
# default wave at d = 25 m, tau = 3 s, frozen here.
V_D25_T3 = -0.1018841752073864904335625
OMEGA_DEFAULT = 1.110297688581145730727222
PERIOD_DEFAULT = 5.659009625795849799832937


def wave(**kw):
    return WaveSource(**{**DEFAULT, **kw})


def test_derived_quantities_match_frozen_values():
    w = wave()
    assert w.wave_number == pytest.approx(2 * math.pi / 50.0, abs=1e-15)
    assert w.frequency == pytest.approx(OMEGA_DEFAULT, abs=1e-12)
    assert w.period == pytest.approx(PERIOD_DEFAULT, abs=1e-12)


def test_velocity_at_quarter_wavelength_matches_direct_oracle():
    assert water_velocity(wave(), (25.0, 0.0, 0.0), 3.0) == pytest.approx(V_D25_T3, abs=1e-12)
    # the distance is planar, the direction irrelevant
    assert water_velocity(wave(), (0.0, -25.0, 0.4), 3.0) == pytest.approx(V_D25_T3, abs=1e-12)


def test_phase_zero_gives_zero_velocity():
    assert water_velocity(wave(), (0.0, 0.0, 0.0), 0.0) == 0.0


def test_dispersion_relation_holds():
    for L, D in [(50, 500), (120, 30), (20, 5), (300, 1000)]:
        w = wave(wavelength=L, water_depth=D, wave_height=0.1)
        q = 2 * math.pi / L
        assert w.frequency**2 == pytest.approx(9.81 * q * math.tanh(q * D), rel=1e-12, abs=1e-9)


@pytest.mark.parametrize(
    "kw",
    [
        dict(wavelength=0.0),
        dict(wavelength=-5.0),
        dict(wave_height=0.0),
        dict(water_depth=0.0),
        dict(gravity=0.0),
        dict(decay_rate=-0.1),
        dict(wavelength=10.0, wave_height=1.0),  # q h = 0.63, far from small amplitude
    ],
)
def test_invalid_waves_rejected(kw):
    with pytest.raises(ValueError):
        wave(**kw)


def test_steepness_threshold_is_configurable():
    with pytest.raises(ValueError):
        wave(max_steepness=0.1)  # default wave has q h = 0.126
    assert wave(max_steepness=0.13).wave_number > 0


def test_drift_step_due_east_moves_only_in_x_and_z():
    w = wave()
    c = CastawayTruth(3, np.array([25.0, 0.0, 0.0]))
    nxt = drift_step(w, c, 3.0, 1.0)
    v = water_velocity(w, c.position, 3.0)
    assert nxt.id == 3
    assert nxt.position[1] == 0.0
    assert nxt.position[0] == pytest.approx(25.0 + v, abs=1e-15)
    assert nxt.position[2] == pytest.approx(v, abs=1e-15)


def test_drift_step_at_origin_uses_zero_angle():
    w = wave()
    c = CastawayTruth(0, np.zeros(3))
    nxt = drift_step(w, c, 1.3, 1.0)
    v = water_velocity(w, c.position, 1.3)
    np.testing.assert_allclose(nxt.position, [v, 0.0, v], atol=1e-15)


def test_zero_velocity_leaves_position_unchanged():
    c = CastawayTruth(0, np.zeros(3))
    assert np.array_equal(drift_step(wave(), c, 0.0, 1.0).position, c.position)


def _oracle_rollout(waves, start, steps, dt):
    """Straight re-implementation of the two-line recursion, scalar math only."""
    pos = [list(p) for p in start]
    for s in range(steps):
        tau = s * dt
        new = []
        for x, y, z in pos:
            dx = dy = dz = 0.0
            for w in waves:
                ox, oy = w.origin
                d = math.hypot(x - ox, y - oy)
                T = math.sqrt(2 * math.pi * w.wavelength / (w.gravity * math.tanh(2 * math.pi / w.wavelength * w.water_depth)))
                om = 2 * math.pi / T
                v = om * w.wave_height / 2 * math.exp(-w.decay_rate * d) * math.sin(2 * math.pi / w.wavelength * d - om * tau)
                phi = math.atan2(y - oy, x - ox) if d > 0 else 0.0
                dx += v * math.cos(phi) * dt
                dy += v * math.sin(phi) * dt
                dz += v * dt
            new.append([x + dx, y + dy, z + dz])
        pos = new
    return np.array(pos)


def test_600_step_rollout_matches_recursion_oracle():
    w = wave()
    start = [(10.0, 5.0, 0.0), (-20.0, 3.0, 0.0), (0.5, -40.0, 0.0)]
    table = generate_truth([w], start, 600.0, 1.0)
    np.testing.assert_allclose(table.positions[-1], _oracle_rollout([w], start, 600, 1.0), atol=1e-9, rtol=0)


def test_multi_source_rollout_matches_oracle():
    ws = [wave(), wave(origin=(-60.0, 80.0), wavelength=40.0, wave_height=0.6, decay_rate=0.002)]
    start = [(7.0, -2.0, 0.0)]
    table = generate_truth(ws, start, 120.0, 0.5)
    np.testing.assert_allclose(table.positions[-1], _oracle_rollout(ws, start, 240, 0.5), atol=1e-9, rtol=0)


def test_single_source_truth_equals_repeated_drift_step():
    w = wave()
    c = CastawayTruth(0, np.array([12.0, -7.0, 0.0]))
    table = generate_truth([w], [c.position], 50.0, 1.0)
    for s in range(50):
        c = drift_step(w, c, s * 1.0, 1.0)
        assert np.array_equal(table.positions[s + 1, 0], c.position)


def test_no_sources_means_stationary():
    start = [(1.0, 2.0, 0.0), (3.0, 4.0, 0.0)]
    table = generate_truth([], start, 30.0, 1.0)
    assert table.positions.shape == (31, 2, 3)
    assert np.all(table.positions == np.asarray(start))


def test_duration_must_be_integral_multiple_of_dt():
    with pytest.raises(ValueError):
        generate_truth([wave()], [(0, 0, 0)], 10.5, 1.0)


def test_truth_csv_columns(tmp_path):
    table = generate_truth([wave()], [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], 5.0, 1.0, ids=[4, 9])
    lines = table.to_csv(tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,castaway_id,x,y,z"
    assert len(lines) == 1 + 6 * 2
    assert lines[2].startswith("0,9,")


def test_drift_paths_are_bounded_and_oscillatory():
    # qualitative shape: paths wander but stay within tens of metres over ten minutes
    start = [(-7.0, 0.0, 0.0), (6.0, -1.5, 0.0), (8.0, 1.5, 0.0)]
    table = generate_truth([wave()], start, 600.0, 1.0)
    disp = np.linalg.norm(table.positions[-1, :, :2] - table.positions[0, :, :2], axis=1)
    assert np.all(disp < 50.0)
    vx = np.diff(table.positions[:, 0, 0])
    assert np.sum(np.diff(np.sign(vx)) != 0) > 50  # many reversals


# --- properties -------------------------------------------------------------

waves_st = st.builds(
    lambda L, frac, w, D: WaveSource((0.0, 0.0), L, frac * 0.2 * L / (2 * math.pi), w, D),
    st.floats(5.0, 500.0),
    st.floats(0.01, 0.99),
    st.floats(0.0, 0.05),
    st.floats(1.0, 2000.0),
)


@settings(max_examples=200, deadline=None)
@given(waves_st, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1e4))
def test_envelope_bound(w, x, y, tau):
    assert abs(water_velocity(w, (x, y, 0.0), tau)) <= w.envelope * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(waves_st)
def test_dispersion_property(w):
    assert w.frequency**2 == pytest.approx(w.gravity * w.wave_number * math.tanh(w.wave_number * w.water_depth),
                                           rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(waves_st, st.floats(-100, 100), st.floats(-100, 100))
def test_superposition_doubles_displacement(w, x, y):
    start = [(x, y, 0.0)]
    one = generate_truth([w], start, 1.0, 1.0).positions
    two = generate_truth([w, w], start, 1.0, 1.0).positions
    np.testing.assert_allclose(two[1] - two[0], 2 * (one[1] - one[0]), atol=1e-12)


def test_generate_truth_is_pure():
    start = [(3.0, 1.0, 0.0)]
    a = generate_truth([wave()], start, 100.0, 1.0).positions
    b = generate_truth([wave()], start, 100.0, 1.0).positions
    assert np.array_equal(a, b)
