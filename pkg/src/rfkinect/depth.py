"""Depth-camera model: noisy head joints in camera space with skeleton IDs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .scenario import Scenario, WorldState, world_state_at

FRAME_RATE = 30.0
MAX_BODIES = 6
MIN_RANGE = 0.5
MAX_RANGE = 4.5
FOV_HALF_ANGLE = 35.0  # degrees, horizontal


@dataclass(frozen=True)
class Body:
    skeleton_id: int
    head_camera: tuple[float, float, float]


@dataclass(frozen=True)
class SkeletonFrame:
    t: float
    bodies: tuple[Body, ...]


def _offset(s: Scenario, floor_position):
    cx, _, cz = s.kinect_pose.position
    return floor_position[0] - cx, floor_position[1] - cz


def camera_range(s: Scenario, floor_position) -> float:
    dx, dz = _offset(s, floor_position)
    return math.hypot(dx, dz)


def visible(s: Scenario, floor_position) -> bool:
    """Range gate plus horizontal field of view; the camera looks along +z."""
    dx, dz = _offset(s, floor_position)
    rng = math.hypot(dx, dz)
    if not (MIN_RANGE <= rng <= MAX_RANGE):
        return False
    return abs(math.degrees(math.atan2(dx, dz))) <= FOV_HALF_ANGLE


def camera_coords(s: Scenario, floor_position, head_height: float) -> tuple[float, float, float]:
    """Camera-space head joint whose floor projection is exactly ``floor_position``.

    y is the head's height relative to the camera; z is then chosen so the
    tilt projection returns the camera-relative floor depth.
    """
    dx, dz = _offset(s, floor_position)
    theta = math.radians(s.kinect_pose.tilt_theta)
    y = head_height - s.kinect_pose.position[1]
    z = (dz + y * math.sin(theta)) / math.cos(theta)
    return dx, y, z


class DepthSensor:
    """Stateful frame generator; skeleton IDs persist while a person stays in view."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator, sigma: float | None = None):
        self.scenario = scenario
        self.rng = rng
        self.sigma = scenario.noise.head_sigma if sigma is None else sigma
        self._next_id = 1
        self._active: dict[int, int] = {}  # person_id -> skeleton_id
        self.skeleton_person: dict[int, int] = {}  # ground truth for metrics

    def sample_frame(self, world: WorldState) -> SkeletonFrame:
        s = self.scenario
        candidates = []
        for pid, st in world.persons.items():
            if visible(s, st.floor_position):
                candidates.append((camera_range(s, st.floor_position), pid))
        candidates.sort()
        shown = [pid for _, pid in candidates[:MAX_BODIES]]

        active = {}
        for pid in shown:
            sid = self._active.get(pid)
            if sid is None:
                sid = self._next_id
                self._next_id += 1
                self.skeleton_person[sid] = pid
            active[pid] = sid
        self._active = active

        bodies = []
        for pid in sorted(shown):
            p = s.person(pid)
            x, y, z = camera_coords(s, world.persons[pid].floor_position, p.head_height)
            if self.sigma > 0:
                nx, ny, nz = self.rng.normal(0.0, self.sigma, 3)
                x, y, z = x + nx, y + ny, z + nz
            bodies.append(Body(active[pid], (float(x), float(y), float(z))))
        return SkeletonFrame(world.t, tuple(bodies))

    def frames(self) -> Iterator[SkeletonFrame]:
        n = int(math.floor(self.scenario.duration * FRAME_RATE + 1e-9))
        if n / FRAME_RATE > self.scenario.duration:
            n -= 1
        for k in range(n + 1):
            yield self.sample_frame(world_state_at(self.scenario, k / FRAME_RATE))


def sample_frame(s: Scenario, world: WorldState, rng: np.random.Generator) -> SkeletonFrame:
    """Single frame with fresh skeleton IDs; use DepthSensor for a continuous stream."""
    return DepthSensor(s, rng).sample_frame(world)
