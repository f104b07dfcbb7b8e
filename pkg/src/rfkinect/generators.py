"""Scenario builders for the standard layout and the experiment families."""
from __future__ import annotations

import math

import numpy as np

from .depth import FOV_HALF_ANGLE, MIN_RANGE
from .scenario import Antenna, KinectPose, NoiseProfile, Person, ReadModel, Scenario, Tag

ROOM = ((0.0, 4.0), (0.0, 4.0))
POSE = KinectPose((2.0, 2.0, 0.0), 10.0)
ANTENNAS = (Antenna(1, (0.0, 2.0)), Antenna(2, (2.5, 4.0)))

# walkers stay where the camera sees them: z range and half-angle margin
STAGE_Z = (1.0, 3.8)
STAGE_HALF_ANGLE = 30.0


def in_stage(x: float, z: float) -> bool:
    (x0, x1), _ = ROOM
    if not (STAGE_Z[0] <= z <= STAGE_Z[1] and x0 + 0.05 <= x <= x1 - 0.05):
        return False
    return abs(x - POSE.position[0]) <= (z - POSE.position[2]) * math.tan(math.radians(STAGE_HALF_ANGLE))


def stage_point(rng: np.random.Generator) -> tuple[float, float]:
    while True:
        x = float(rng.uniform(*ROOM[0]))
        z = float(rng.uniform(*STAGE_Z))
        if in_stage(x, z):
            return x, z


def out_of_view_point(rng: np.random.Generator) -> tuple[float, float]:
    """A room point the camera cannot see (beside or behind its field of view)."""
    (x0, x1), (z0, z1) = ROOM
    cx, _, cz = POSE.position
    while True:
        x = float(rng.uniform(x0 + 0.1, x1 - 0.1))
        z = float(rng.uniform(z0 + 0.1, z1 - 0.1))
        dx, dz = x - cx, z - cz
        if math.hypot(dx, dz) < MIN_RANGE or abs(math.degrees(math.atan2(dx, dz))) > FOV_HALF_ANGLE + 5.0:
            return x, z


def random_walk(
    rng: np.random.Generator,
    duration: float,
    speed=(0.5, 1.2),
    pause_prob: float = 0.3,
    pause=(2.0, 8.0),
    min_leg: float = 1.0,
    leave_prob: float = 0.0,
) -> tuple[tuple[float, float, float], ...]:
    """Legs between random points, sometimes followed by a standstill.

    Legs end inside the camera's view except with probability ``leave_prob``,
    when they end somewhere in the room the camera cannot see.
    """
    x, z = stage_point(rng)
    t = 0.0
    wps = [(t, x, z)]
    while t < duration:
        pick = out_of_view_point if rng.uniform() < leave_prob else stage_point
        while True:
            nx, nz = pick(rng)
            if math.hypot(nx - x, nz - z) >= min_leg:
                break
        t += math.hypot(nx - x, nz - z) / float(rng.uniform(*speed))
        x, z = nx, nz
        wps.append((t, x, z))
        if rng.uniform() < pause_prob:
            t += float(rng.uniform(*pause))
            wps.append((t, x, z))
    return tuple(wps)


def _background_tags(rng, n: int, first_id: int) -> list[Tag]:
    (x0, x1), (z0, z1) = ROOM
    return [
        Tag(first_id + i, None, (float(rng.uniform(x0 + 0.2, x1 - 0.2)), float(rng.uniform(z0 + 0.2, z1 - 0.2))))
        for i in range(n)
    ]


def _heights(rng, n):
    return [round(float(rng.uniform(1.6, 1.85)), 3) for _ in range(n)]


def walkers(
    n_people: int,
    duration: float = 300.0,
    seed: int = 0,
    n_antennas: int = 2,
    tagged: int | None = None,
    extra_tags: int = 0,
    pause_prob: float = 0.3,
    leave_prob: float = 0.0,
    pause=(2.0, 8.0),
    speed=(0.5, 1.2),
    noise: NoiseProfile | None = None,
) -> Scenario:
    """``n_people`` random walkers; the first ``tagged`` of them wear tags."""
    rng = np.random.default_rng(seed)
    tagged = n_people if tagged is None else tagged
    persons = [
        Person(i + 1, random_walk(rng, duration, speed, pause_prob, pause, leave_prob=leave_prob), h)
        for i, h in zip(range(n_people), _heights(rng, n_people))
    ]
    tags = [Tag(i + 1, i + 1) for i in range(tagged)]
    tags += _background_tags(rng, extra_tags, len(tags) + 1)
    return Scenario(
        ROOM, POSE, ANTENNAS[:n_antennas], tuple(persons), tuple(tags), duration, seed,
        noise or NoiseProfile(), ReadModel(), target_tag=1 if tagged else None,
    )


def target_among_movers(n_people: int = 6, duration: float = 300.0, seed: int = 0) -> Scenario:
    """One tagged target plus untagged movers."""
    return walkers(n_people, duration, seed, tagged=1)


def stationary_tags(n_tags: int, n_antennas: int, duration: float = 60.0, seed: int = 0) -> Scenario:
    """Tags left on furniture; nobody in the room."""
    rng = np.random.default_rng(seed)
    return Scenario(
        ROOM, POSE, ANTENNAS[:n_antennas], (), tuple(_background_tags(rng, n_tags, 1)), duration, seed
    )


def in_and_out_walker(n_tags: int, n_antennas: int, duration: float = 300.0, seed: int = 0) -> Scenario:
    """One tagged walker who repeatedly leaves the camera's view, plus stationary tags.

    Each visit lasts 20-35 s of walking inside the stage; between visits the
    walker stands for 4-8 s at the room edge behind the camera's field of view.
    """
    rng = np.random.default_rng(seed)
    outside = ((0.2, 0.3), (3.8, 0.3))
    t, wps = 0.0, []
    x, z = outside[0]
    wps.append((t, x, z))
    while t < duration:
        visit_end = t + float(rng.uniform(20.0, 35.0))
        while t < visit_end:
            nx, nz = stage_point(rng)
            t += math.hypot(nx - x, nz - z) / float(rng.uniform(0.6, 1.2))
            x, z = nx, nz
            wps.append((t, x, z))
        x2, z2 = outside[int(rng.integers(2))]
        t += math.hypot(x2 - x, z2 - z) / 1.0
        x, z = x2, z2
        wps.append((t, x, z))
        t += float(rng.uniform(4.0, 8.0))
        wps.append((t, x, z))
    person = Person(1, tuple(wps), _heights(rng, 1)[0])
    tags = [Tag(1, 1)] + _background_tags(rng, n_tags - 1, 2)
    return Scenario(ROOM, POSE, ANTENNAS[:n_antennas], (person,), tuple(tags), duration, seed, target_tag=1)


def cross_worn_pair(duration: float = 60.0, seed: int = 0) -> Scenario:
    """Two walkers on different loops; person 1 wears tag 2 and person 2 wears tag 1."""
    p1 = [(0.0, 1.4, 1.5), (4.0, 1.4, 3.5), (8.0, 2.6, 3.5), (12.0, 2.6, 1.5)]
    p2 = [(0.0, 2.8, 2.0), (3.0, 1.6, 2.0), (6.0, 1.6, 3.2), (9.0, 2.8, 3.2)]

    def loop(base, period):
        out, k = [], 0
        while k * period <= duration:
            out += [(k * period + t, x, z) for t, x, z in base]
            k += 1
        out.append((k * period, base[0][1], base[0][2]))
        return tuple(out)

    persons = (Person(1, loop(p1, 16.0), 1.75), Person(2, loop(p2, 12.0), 1.65))
    tags = (Tag(1, 2), Tag(2, 1))
    return Scenario(ROOM, POSE, ANTENNAS, persons, tags, duration, seed)


def divergent_pair(duration: float = 60.0, seed: int = 0) -> Scenario:
    """Two walkers pacing on crossing lines at different rates.

    Person 1 paces along x, toward and away from antenna 1; person 2 paces
    along z, mostly across it, so their radial velocities differ strongly.
    """
    def pace(a, b, period, fixed, along_x):
        wps, t, k = [], 0.0, 0
        while t <= duration + period:
            u = a if k % 2 == 0 else b
            wps.append((t, u, fixed) if along_x else (t, fixed, u))
            t += period / 2
            k += 1
        return tuple(wps)

    persons = (
        Person(1, pace(1.3, 2.7, 3.2, 2.5, True), 1.75),
        Person(2, pace(1.5, 3.5, 5.0, 2.2, False), 1.65),
    )
    return Scenario(ROOM, POSE, ANTENNAS, persons, (Tag(1, 1), Tag(2, 2)), duration, seed)


def mid_perpendicular_pair(duration: float = 40.0, seed: int = 0) -> Scenario:
    """Two walkers mirrored across the line joining two side-wall antennas.

    Both stay on the perpendicular bisector; one walks toward the baseline
    while the other walks away, so both have the same range to each antenna.
    """
    base = 3.0
    period = 1.6
    wps1, wps2 = [], []
    t = 0.0
    near, far = 0.15, 0.95
    flip = False
    while t <= duration + period:
        u = far if flip else near
        wps1.append((t, 2.0, base - u))
        wps2.append((t, 2.0, base + u))
        flip = not flip
        t += period
    persons = (Person(1, tuple(wps1), 1.7), Person(2, tuple(wps2), 1.7))
    tags = (Tag(1, 1), Tag(2, 2))
    antennas = (Antenna(1, (0.0, base)), Antenna(2, (4.0, base)))
    return Scenario(ROOM, POSE, antennas, persons, tags, duration, seed)


def radial_approach(duration: float = 2.8, speed: float = 1.0, noise: NoiseProfile | None = None) -> Scenario:
    """Single walker heading straight at a single antenna."""
    z0 = 1.0
    ant = Antenna(1, (2.0, 4.0))
    person = Person(1, ((0.0, 2.0, z0), (duration, 2.0, z0 + speed * duration)), 1.7)
    return Scenario(
        ROOM, POSE, (ant,), (person,), (Tag(1, 1),), duration, 0,
        noise or NoiseProfile.named("noiseless"),
    )


def silenced_walker(silent=(40.0, 42.0), duration: float = 90.0, seed: int = 0) -> Scenario:
    """Single tagged walker whose tag stops answering during ``silent``."""
    s = walkers(1, duration, seed, pause_prob=0.0)
    tag = s.tags[0]
    return s.replace(tags=(Tag(tag.tag_id, tag.attached_person_id, None, (tuple(silent),)),))
