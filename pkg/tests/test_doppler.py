import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfkinect import generators, pipeline
from rfkinect.doppler import (
    PhasePair, bin_tag_velocity, doppler_to_velocity, estimate_doppler, estimate_tag_velocities,
    pair_same_frequency, wrap_pi,
)
from rfkinect.reader import C, CHANNELS, PhaseReading, make_carrier_plan, path_phase, read_events
from rfkinect.timebase import bin_index

F1, F2 = 915.25e6, 903.75e6


def readings(freqs, dt=0.01):
    return [PhaseReading(1, 1, i * dt, f, 0.1 * i) for i, f in enumerate(freqs)]


def test_pairing_examples():
    assert len(pair_same_frequency(readings([F1, F1, F2, F2]))) == 2
    assert pair_same_frequency(readings([F1, F2])) == []
    chained = pair_same_frequency(readings([F1, F1, F1]))
    assert len(chained) == 2
    assert all(p.dt > 0 for p in chained)
    assert pair_same_frequency([]) == []


def physical_doppler(dphi, dt, f):
    # phase falls by 4*pi*f*dd/c as range shrinks by dd; Doppler is 2*f*v/c with v the closing speed
    closing_speed = -dphi * C / (4 * math.pi * f) / dt
    return 2 * f * closing_speed / C


def test_doppler_examples():
    fd = estimate_doppler(PhasePair(1.0, 0.5, 0.05, F1))
    assert fd > 0
    assert fd == pytest.approx(physical_doppler(-0.5, 0.05, F1), rel=1e-12)
    assert estimate_doppler(PhasePair(2.0, 2.0, 0.05, F1)) == 0.0
    assert wrap_pi(6.2 - 0.1) == pytest.approx(6.1 - 2 * math.pi)
    assert wrap_pi(6.2 - 0.1) == pytest.approx(-0.18319, abs=1e-5)
    fd = estimate_doppler(PhasePair(0.1, 6.2, 0.02, F1))
    assert fd == pytest.approx(physical_doppler(6.1 - 2 * math.pi, 0.02, F1), rel=1e-12)
    assert wrap_pi(math.pi) == pytest.approx(math.pi)
    assert wrap_pi(-math.pi) == pytest.approx(math.pi)


@pytest.mark.parametrize("dt", [0.0, -0.01, 0.41])
def test_bad_pair_interval_rejected(dt):
    with pytest.raises(ValueError):
        estimate_doppler(PhasePair(0.0, 0.1, dt, F1))


def test_velocity_conversion():
    assert doppler_to_velocity(1.0, 915e6) == pytest.approx(0.163821, abs=1e-6)
    assert doppler_to_velocity(0.0, 915e6) == 0.0
    spread = [doppler_to_velocity(2.68, f) for f in (CHANNELS[0], CHANNELS[-1])]
    assert 0.433 <= min(spread) <= max(spread) <= 0.445


def _pair_for_velocity(v, f, dt=0.05):
    return PhasePair(0.0, -4 * math.pi * f * v * dt / C, dt, f)


def test_bin_mean_and_failure():
    pairs = [_pair_for_velocity(v, F1) for v in (0.50, 0.52, 0.48)]
    assert bin_tag_velocity(1, 0, 1, pairs).v == pytest.approx(0.50)
    assert bin_tag_velocity(1, 0, 1, pairs).n_pairs == 3
    failed = bin_tag_velocity(1, 0, 1, [])
    assert failed.failed and failed.v is None
    assert bin_tag_velocity(1, 0, 1, pairs[:1]).v == pytest.approx(0.50)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(-20, 20), st.floats(0.001, 0.4))
def test_offset_cancels(p1, p2, offset, dt):
    a = estimate_doppler(PhasePair(p1, p2, dt, F1))
    b = estimate_doppler(PhasePair((p1 + offset) % (2 * math.pi), (p2 + offset) % (2 * math.pi), dt, F1))
    # wrap_pi is exact only up to rounding of the shifted phases near the +-pi seam
    if abs(abs(wrap_pi(p2 - p1)) - math.pi) > 1e-6:
        assert a == pytest.approx(b, abs=1e-9 / dt)


@settings(max_examples=200)
@given(st.sampled_from(list(CHANNELS)), st.floats(0.001, 0.05), st.floats(0, 1), st.floats(0.3, 5.0))
def test_noiseless_recovery_within_unwrap_bound(f, dt, frac, d0):
    bound = C / (4 * f * dt)
    v = (2 * frac - 1) * 0.999 * bound
    d1 = d0 - v * dt
    pair = PhasePair(float(path_phase(f, d0)[0]), float(path_phase(f, d1)[0]), dt, f)
    assert doppler_to_velocity(estimate_doppler(pair), f) == pytest.approx(v, abs=1e-6)


def test_unwrap_bound_value():
    assert C / (4 * 928e6 * 0.05) == pytest.approx(1.615, abs=1e-3)


def test_grid_matches_per_bin_reference():
    s = generators.walkers(1, 12.0, seed=4, extra_tags=2)
    table = read_events(s, make_carrier_plan(1, s.duration), np.random.default_rng(2))
    tags, ants = [t.tag_id for t in s.tags], [a.antenna_id for a in s.antennas]
    grid = estimate_tag_velocities(table, tags, ants, 30)
    for tag in tags:
        for ant in ants:
            rows = list(table.where(tag, ant).readings())
            for k in range(30):
                in_bin = [r for r in rows if bin_index(r.t) == k]
                ref = bin_tag_velocity(tag, k, ant, pair_same_frequency(in_bin))
                got = grid.sample(tags.index(tag), ants.index(ant), k)
                assert got.failed == ref.failed
                if not ref.failed:
                    assert got.v == pytest.approx(ref.v, abs=1e-12)
                    assert got.n_pairs == ref.n_pairs


def test_sign_agrees_with_truth_for_moving_tag():
    s = generators.walkers(1, 120.0, seed=1, pause_prob=0.0)
    st_ = pipeline.sense(s, seed=1)
    vel = pipeline.tag_velocity_table(st_)
    v = np.asarray(vel["v"], float)
    truth = np.asarray(vel["v_true"], float)
    use = np.isfinite(v) & (np.abs(truth) > 0.1)
    assert use.sum() > 200
    assert np.mean(np.sign(v[use]) == np.sign(truth[use])) >= 0.99
