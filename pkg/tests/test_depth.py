import math

import numpy as np
import pytest

from rfkinect import depth
from rfkinect.depth import DepthSensor, FRAME_RATE, MAX_BODIES, camera_coords, visible
from rfkinect.scenario import Antenna, KinectPose, NoiseProfile, Person, Scenario, world_state_at
from rfkinect.timebase import bin_index
from rfkinect.tracker import project_head

POSE = KinectPose((2.0, 2.0, 0.0), 10.0)


def scenario(persons, duration=10.0, sigma=0.0):
    return Scenario(((0, 4), (0, 6)), POSE, (Antenna(1, (0, 2)),), tuple(persons), (), duration,
                    noise=NoiseProfile(head_sigma=sigma))


def standing(pid, x, z, h=1.7):
    return Person(pid, ((0.0, x, z),), h)


def test_visibility_examples():
    s = scenario([])
    assert visible(s, (2.0, 3.0))
    assert not visible(s, (2.0, 6.0))
    off = math.radians(40.0)
    assert not visible(s, (2.0 + 2.0 * math.sin(off), 2.0 * math.cos(off)))
    assert not visible(s, (2.0, 0.3))  # inside the minimum range


def test_noiseless_projection_recovers_floor_position():
    rng = np.random.default_rng(1)
    persons = [standing(i + 1, float(rng.uniform(1.2, 2.8)), float(rng.uniform(1.5, 3.8)),
                        float(rng.uniform(1.5, 1.9))) for i in range(5)]
    s = scenario(persons)
    truth = {p.person_id: p.waypoints[0][1:] for p in persons}
    sensor = DepthSensor(s, rng)
    frame = sensor.sample_frame(world_state_at(s, 0.0))
    for body in frame.bodies:
        xp, zp = project_head(body.head_camera, POSE.tilt_theta)
        x, z = truth[sensor.skeleton_person[body.skeleton_id]]
        assert xp + POSE.position[0] == pytest.approx(x, abs=1e-9)
        assert zp + POSE.position[2] == pytest.approx(z, abs=1e-9)


def test_camera_coords_carry_head_height():
    s = scenario([])
    _, y, _ = camera_coords(s, (2.0, 3.0), 1.8)
    assert y == pytest.approx(1.8 - POSE.position[1])


def test_six_body_cap_keeps_nearest():
    persons = [standing(i + 1, 2.0 + 0.1 * (-1) ** i, 1.0 + 0.4 * i) for i in range(7)]
    s = scenario(persons)
    sensor = DepthSensor(s, np.random.default_rng(0))
    frame = sensor.sample_frame(world_state_at(s, 0.0))
    assert len(frame.bodies) == MAX_BODIES
    shown = {sensor.skeleton_person[b.skeleton_id] for b in frame.bodies}
    ranges = {p.person_id: depth.camera_range(s, p.waypoints[0][1:]) for p in persons}
    dropped = set(ranges) - shown
    assert len(dropped) == 1
    assert ranges[dropped.pop()] == max(ranges.values())


def test_cap_tie_break_prefers_lower_person_id():
    persons = [standing(i + 1, 2.0, 1.0 + 0.3 * i) for i in range(5)]
    persons += [standing(6, 3.0, 3.0), standing(7, 1.0, 3.0)]  # exact tie, farthest pair
    s = scenario(persons)
    sensor = DepthSensor(s, np.random.default_rng(0))
    frame = sensor.sample_frame(world_state_at(s, 0.0))
    shown = {sensor.skeleton_person[b.skeleton_id] for b in frame.bodies}
    assert 6 in shown and 7 not in shown


def test_reentry_gets_fresh_skeleton_id():
    # in view, then 1 s outside the field of view, then back
    p = Person(1, ((0.0, 2.0, 2.0), (2.0, 2.0, 2.0), (2.01, 3.95, 0.6), (3.0, 3.95, 0.6),
                   (3.01, 2.0, 2.0), (6.0, 2.0, 2.0)))
    s = scenario([p], duration=6.0)
    sensor = DepthSensor(s, np.random.default_rng(0))
    ids_before, ids_after, gap = set(), set(), 0
    for frame in sensor.frames():
        sids = {b.skeleton_id for b in frame.bodies}
        if frame.t < 2.0:
            ids_before |= sids
        elif 2.05 < frame.t < 3.0:
            gap += len(sids)
        elif frame.t > 3.05:
            ids_after |= sids
    assert gap == 0
    assert len(ids_before) == 1 and len(ids_after) == 1
    assert ids_before != ids_after


def test_ids_stable_and_unique_while_visible():
    from rfkinect import generators
    s = generators.walkers(6, 60.0, seed=2)
    sensor = DepthSensor(s, np.random.default_rng(0))
    owner = {}
    for frame in sensor.frames():
        sids = [b.skeleton_id for b in frame.bodies]
        assert len(sids) == len(set(sids)) <= MAX_BODIES
        for sid in sids:
            owner.setdefault(sid, sensor.skeleton_person[sid])
            assert owner[sid] == sensor.skeleton_person[sid]


def test_frame_cadence():
    s = scenario([standing(1, 2.0, 2.0)], duration=8.0)
    ts = np.array([f.t for f in DepthSensor(s, np.random.default_rng(0)).frames()])
    assert np.allclose(ts, np.arange(ts.size) / FRAME_RATE)
    counts = np.bincount([bin_index(t) for t in ts])
    assert counts[: int(8.0 / 0.4)].min() >= 11


def _chi3_median() -> float:
    # median of the distance of a 3D standard normal, by bisection on its CDF
    cdf = lambda x: math.erf(x / math.sqrt(2)) - math.sqrt(2 / math.pi) * x * math.exp(-x * x / 2)
    lo, hi = 0.0, 5.0
    for _ in range(100):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if cdf(mid) < 0.5 else (lo, mid)
    return lo


def test_head_noise_is_isotropic_gaussian():
    s = scenario([standing(1, 2.0, 2.5)], sigma=0.05)
    sensor = DepthSensor(s, np.random.default_rng(5))
    exact = np.array(camera_coords(s, (2.0, 2.5), 1.7))
    world = world_state_at(s, 0.0)
    errs = np.array([np.array(sensor.sample_frame(world).bodies[0].head_camera) - exact for _ in range(20000)])
    assert errs.std(axis=0) == pytest.approx([0.05] * 3, rel=0.03)
    median_3d = float(np.median(np.linalg.norm(errs, axis=1)))
    assert median_3d == pytest.approx(0.05 * _chi3_median(), rel=0.03)
