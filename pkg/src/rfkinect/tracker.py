"""Kinect-side tracking: floor projection of head joints and binned radial velocities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .depth import SkeletonFrame
from .scenario import Antenna, Scenario
from .timebase import bin_index

# Fewer frames than this in a bin (a body just found or about to be lost)
# gives a first-to-last secant too short to beat the joint noise.
MIN_TRACK_FRAMES = 7


@dataclass(frozen=True)
class FloorPosition:
    """Head projected to the floor, in room coordinates (camera floor offset added)."""

    skeleton_id: int
    t: float
    x: float
    z: float


@dataclass(frozen=True)
class PersonVelocitySample:
    skeleton_id: int
    bin_index: int
    antenna_id: int
    v: float  # m/s, positive toward the antenna


def project_head(joint, theta: float) -> tuple[float, float]:
    """Rotate a camera-space joint into the floor plane for tilt ``theta`` (degrees)."""
    x, y, z = joint
    th = math.radians(theta)
    return x, -y * math.sin(th) + z * math.cos(th)


def floor_positions(frame: SkeletonFrame, s: Scenario) -> list[FloorPosition]:
    cx, _, cz = s.kinect_pose.position
    out = []
    for body in frame.bodies:
        xp, zp = project_head(body.head_camera, s.kinect_pose.tilt_theta)
        out.append(FloorPosition(body.skeleton_id, frame.t, cx + xp, cz + zp))
    return out


def radial_velocity(track: Sequence[FloorPosition], antenna_pos) -> float | None:
    """Range change between the first and last position of a bin over the elapsed time.

    Returns None when fewer than two positions are available.
    """
    if len(track) < 2:
        return None
    first, last = track[0], track[-1]
    dt = last.t - first.t
    if dt <= 0:
        raise ValueError("first and last positions share a timestamp")
    ax, az = antenna_pos
    d_first = math.hypot(first.x - ax, first.z - az)
    d_last = math.hypot(last.x - ax, last.z - az)
    return (d_first - d_last) / dt


def _flush(k, tracks, antennas, min_frames) -> Iterator[PersonVelocitySample]:
    for sid in sorted(tracks):
        track = tracks[sid]
        if len(track) < max(min_frames, 2):
            continue
        for a in antennas:
            yield PersonVelocitySample(sid, k, a.antenna_id, radial_velocity(track, a.position))


def bin_track_velocities(
    positions: Iterable[FloorPosition], antennas: Sequence[Antenna], min_frames: int = MIN_TRACK_FRAMES
) -> Iterator[PersonVelocitySample]:
    """Bin a time-ordered floor-position stream on the shared grid.

    Skeletons with fewer than ``min_frames`` positions in a bin get no sample.
    """
    current = None
    tracks: dict[int, list[FloorPosition]] = {}
    last_t = -math.inf
    for fp in positions:
        if fp.t < last_t:
            raise ValueError("frames must be in timestamp order")
        last_t = fp.t
        k = bin_index(fp.t)
        if k != current:
            if current is not None:
                yield from _flush(current, tracks, antennas, min_frames)
            current, tracks = k, {}
        tracks.setdefault(fp.skeleton_id, []).append(fp)
    if current is not None:
        yield from _flush(current, tracks, antennas, min_frames)


def bin_person_velocities(
    frames: Iterable[SkeletonFrame],
    s: Scenario,
    antennas: Sequence[Antenna] | None = None,
    min_frames: int = MIN_TRACK_FRAMES,
) -> Iterator[PersonVelocitySample]:
    """One sample per (skeleton, antenna, bin) with enough frames in the bin."""
    antennas = s.antennas if antennas is None else antennas
    positions = (fp for frame in frames for fp in floor_positions(frame, s))
    return bin_track_velocities(positions, antennas, min_frames)
