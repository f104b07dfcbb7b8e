"""Ground-truth world: room, sensor poses, walkers and tag attachment.

Scenario files are YAML documents; see ``data/two_walkers.yaml`` for the canonical
layout and README.md for the schema.  Lengths are meters, times seconds and
angles degrees.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

# Antennas per reader; a third antenna slows phase sampling below the hop budget.
MAX_ANTENNAS = 2


class ScenarioError(ValueError):
    """Raised when a scenario is malformed or violates an invariant."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class ScenarioParseError(ScenarioError):
    pass


@dataclass(frozen=True)
class KinectPose:
    position: tuple[float, float, float] = (2.0, 2.0, 0.0)  # x, height, z
    tilt_theta: float = 10.0


@dataclass(frozen=True)
class Antenna:
    antenna_id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class Person:
    person_id: int
    waypoints: tuple[tuple[float, float, float], ...]  # (t, x, z)
    head_height: float = 1.7

    def _arrays(self):
        w = np.asarray(self.waypoints, dtype=float)
        return w[:, 0], w[:, 1], w[:, 2]

    def positions(self, times) -> np.ndarray:
        """Floor positions at ``times`` as an (N, 2) array."""
        ts, xs, zs = self._arrays()
        times = np.asarray(times, dtype=float)
        return np.stack([np.interp(times, ts, xs), np.interp(times, ts, zs)], axis=-1)

    def velocities(self, times) -> np.ndarray:
        """Segment slopes at ``times``; zero before the first and from the last waypoint on."""
        ts, xs, zs = self._arrays()
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((times.size, 2))
        if ts.size < 2:
            return out
        seg = np.searchsorted(ts, times, side="right") - 1
        ok = (seg >= 0) & (seg < ts.size - 1)
        s = seg[ok]
        dt = ts[s + 1] - ts[s]
        out[ok, 0] = (xs[s + 1] - xs[s]) / dt
        out[ok, 1] = (zs[s + 1] - zs[s]) / dt
        return out

    def path_length(self) -> float:
        _, xs, zs = self._arrays()
        return float(np.sum(np.hypot(np.diff(xs), np.diff(zs))))


@dataclass(frozen=True)
class Tag:
    tag_id: int
    attached_person_id: int | None = None
    # floor position of an unattached tag; defaults to the room centre
    position: tuple[float, float] | None = None
    # [start, end) windows during which the tag returns no reads
    silent: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class NoiseProfile:
    head_sigma: float = 0.05
    phase_sigma: float = 0.035
    api_doppler_sigma: float = 2.68
    multipath_factor: float = 1.3

    @classmethod
    def named(cls, name: str) -> "NoiseProfile":
        if name == "default":
            return cls()
        if name == "noiseless":
            return cls(head_sigma=0.0, phase_sigma=0.0, api_doppler_sigma=0.0, multipath_factor=1.0)
        raise ScenarioError("noise_profile", f"unknown profile {name!r} (expected default or noiseless)")


@dataclass(frozen=True)
class ReadModel:
    # Mean same-antenna read interval is base_interval * max(n_tags, min_tags) * n_antennas.
    base_interval: float = 0.0005
    min_tags: int = 16
    interval_shape: float = 4.0  # gamma shape of inter-read times
    dwell: float = 0.4
    antenna_slot: float = 0.025  # antenna switching period within a dwell
    blackout_rate: float = 0.005  # unreadable episodes per second per (tag, antenna)
    blackout_length: float = 0.6  # episode lengths are uniform in [0.5, 1] x this


@dataclass(frozen=True)
class Scenario:
    room_extent: tuple[tuple[float, float], tuple[float, float]]
    kinect_pose: KinectPose
    antennas: tuple[Antenna, ...]
    persons: tuple[Person, ...]
    tags: tuple[Tag, ...]
    duration: float
    rng_seed: int = 0
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    reader: ReadModel = field(default_factory=ReadModel)
    target_tag: int | None = None

    def __post_init__(self):
        validate(self)

    def person(self, person_id: int) -> Person:
        for p in self.persons:
            if p.person_id == person_id:
                return p
        raise KeyError(person_id)

    def tag_of(self, person_id: int) -> int | None:
        for t in self.tags:
            if t.attached_person_id == person_id:
                return t.tag_id
        return None

    @property
    def tagged_person(self) -> dict[int, int]:
        """tag_id -> person_id for attached tags."""
        return {t.tag_id: t.attached_person_id for t in self.tags if t.attached_person_id is not None}

    def tag_positions(self, tag: Tag, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if tag.attached_person_id is not None:
            return self.person(tag.attached_person_id).positions(times)
        (x0, x1), (z0, z1) = self.room_extent
        pos = tag.position if tag.position is not None else ((x0 + x1) / 2, (z0 + z1) / 2)
        return np.broadcast_to(np.asarray(pos, dtype=float), times.shape + (2,)).copy()

    def tag_velocities(self, tag: Tag, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if tag.attached_person_id is not None:
            return self.person(tag.attached_person_id).velocities(times)
        return np.zeros((times.size, 2))

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PersonState:
    person_id: int
    floor_position: tuple[float, float]
    floor_velocity: tuple[float, float]


@dataclass(frozen=True)
class WorldState:
    t: float
    persons: dict[int, PersonState]


def validate(s: Scenario) -> None:
    (x0, x1), (z0, z1) = s.room_extent
    if not (x1 > x0 and z1 > z0):
        raise ScenarioError("room_extent", "bounds must be increasing")
    if not (0.0 <= s.kinect_pose.tilt_theta < 90.0):
        raise ScenarioError("kinect_pose.tilt_theta", "must lie in [0, 90) degrees")
    if not s.antennas:
        raise ScenarioError("antennas", "at least one antenna is required")
    if len(s.antennas) > MAX_ANTENNAS:
        raise ScenarioError("antennas", f"at most {MAX_ANTENNAS} antennas per reader")
    _unique([a.antenna_id for a in s.antennas], "antennas.antenna_id")
    _unique([p.person_id for p in s.persons], "persons.person_id")
    _unique([t.tag_id for t in s.tags], "tags.tag_id")
    if not s.duration > 0:
        raise ScenarioError("duration", "must be positive")
    eps = 1e-9
    for i, p in enumerate(s.persons):
        where = f"persons[{i}].waypoints"
        if not p.waypoints:
            raise ScenarioError(where, "at least one waypoint is required")
        ts = [w[0] for w in p.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError(where, "waypoint times must be strictly increasing")
        for t, x, z in p.waypoints:
            if not (x0 - eps <= x <= x1 + eps and z0 - eps <= z <= z1 + eps):
                raise ScenarioError(where, f"waypoint ({x}, {z}) at t={t} lies outside room_extent")
        if p.head_height <= 0:
            raise ScenarioError(f"persons[{i}].head_height", "must be positive")
    person_ids = {p.person_id for p in s.persons}
    worn: set[int] = set()
    for i, t in enumerate(s.tags):
        pid = t.attached_person_id
        if pid is None:
            continue
        if pid not in person_ids:
            raise ScenarioError(f"tags[{i}].attached_person_id", f"unknown person {pid}")
        if pid in worn:
            raise ScenarioError(f"tags[{i}].attached_person_id", f"person {pid} already wears a tag")
        worn.add(pid)
    if s.target_tag is not None and s.target_tag not in {t.tag_id for t in s.tags}:
        raise ScenarioError("target_tag", f"no tag {s.target_tag} in scenario")


def _unique(ids, where):
    if len(set(ids)) != len(ids):
        raise ScenarioError(where, "ids must be unique")


def world_state_at(s: Scenario, t: float) -> WorldState:
    if not (0.0 <= t <= s.duration):
        raise ValueError(f"t={t} outside [0, {s.duration}]")
    persons = {}
    for p in s.persons:
        pos = p.positions([t])[0]
        vel = p.velocities([t])[0]
        persons[p.person_id] = PersonState(
            p.person_id, (float(pos[0]), float(pos[1])), (float(vel[0]), float(vel[1]))
        )
    return WorldState(t, persons)


def true_radial_velocity(pos, vel, antenna_pos) -> float:
    """Signed range rate toward ``antenna_pos``; positive while closing."""
    r = np.asarray(pos, dtype=float) - np.asarray(antenna_pos, dtype=float)
    norm = math.hypot(r[0], r[1])
    if norm == 0.0:
        raise ValueError("position coincides with antenna; radial direction undefined")
    return float(-(r[0] * vel[0] + r[1] * vel[1]) / norm)


# --- file I/O ---------------------------------------------------------------


def _pair(v, where, n=2) -> tuple[float, ...]:
    try:
        out = tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ScenarioParseError(where, f"expected a list of {n} numbers") from None
    if len(out) != n:
        raise ScenarioParseError(where, f"expected {n} numbers, got {len(out)}")
    return out


def _sub(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ScenarioParseError(where, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ScenarioParseError(where, f"unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ScenarioParseError(where, str(e)) from None


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioParseError("<root>", "expected a mapping")
    known = {
        "room_extent", "kinect_pose", "antennas", "persons", "tags",
        "duration", "rng_seed", "noise", "reader", "target_tag",
    }
    unknown = set(d) - known
    if unknown:
        raise ScenarioParseError("<root>", f"unknown keys {sorted(unknown)}")
    for key in ("room_extent", "antennas", "duration"):
        if key not in d:
            raise ScenarioParseError(key, "missing required field")
    room = d["room_extent"]
    if not isinstance(room, dict) or set(room) != {"x", "z"}:
        raise ScenarioParseError("room_extent", "expected {x: [min, max], z: [min, max]}")
    room_extent = (_pair(room["x"], "room_extent.x"), _pair(room["z"], "room_extent.z"))

    kp = d.get("kinect_pose") or {}
    if not isinstance(kp, dict):
        raise ScenarioParseError("kinect_pose", "expected a mapping")
    pose = KinectPose(
        position=_pair(kp.get("position", KinectPose.position), "kinect_pose.position", 3),
        tilt_theta=float(kp.get("tilt_theta", KinectPose.tilt_theta)),
    )

    antennas = []
    for i, a in enumerate(d["antennas"] or []):
        where = f"antennas[{i}]"
        if not isinstance(a, dict) or "position" not in a:
            raise ScenarioParseError(where, "expected {antenna_id, position}")
        antennas.append(Antenna(int(a.get("antenna_id", i + 1)), _pair(a["position"], where + ".position")))

    persons = []
    for i, p in enumerate(d.get("persons") or []):
        where = f"persons[{i}]"
        if not isinstance(p, dict) or "waypoints" not in p:
            raise ScenarioParseError(where, "expected {person_id, waypoints, head_height}")
        wps = tuple(_pair(w, f"{where}.waypoints", 3) for w in p["waypoints"])
        persons.append(Person(int(p.get("person_id", i + 1)), wps, float(p.get("head_height", Person.head_height))))

    tags = []
    for i, t in enumerate(d.get("tags") or []):
        where = f"tags[{i}]"
        if not isinstance(t, dict):
            raise ScenarioParseError(where, "expected a mapping")
        pid = t.get("attached_person_id")
        pos = t.get("position")
        silent = tuple(_pair(w, f"{where}.silent") for w in (t.get("silent") or []))
        tags.append(Tag(
            int(t.get("tag_id", i + 1)),
            None if pid is None else int(pid),
            None if pos is None else _pair(pos, f"{where}.position"),
            silent,
        ))

    try:
        duration = float(d["duration"])
    except (TypeError, ValueError):
        raise ScenarioParseError("duration", "expected a number") from None
    return Scenario(
        room_extent=room_extent,
        kinect_pose=pose,
        antennas=tuple(antennas),
        persons=tuple(persons),
        tags=tuple(tags),
        duration=duration,
        rng_seed=int(d.get("rng_seed", 0)),
        noise=_sub(NoiseProfile, d.get("noise"), "noise"),
        reader=_sub(ReadModel, d.get("reader"), "reader"),
        target_tag=None if d.get("target_tag") is None else int(d["target_tag"]),
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    tags = []
    for t in s.tags:
        entry: dict[str, Any] = {"tag_id": t.tag_id, "attached_person_id": t.attached_person_id}
        if t.position is not None:
            entry["position"] = list(t.position)
        if t.silent:
            entry["silent"] = [list(w) for w in t.silent]
        tags.append(entry)
    return {
        "room_extent": {"x": list(s.room_extent[0]), "z": list(s.room_extent[1])},
        "kinect_pose": {"position": list(s.kinect_pose.position), "tilt_theta": s.kinect_pose.tilt_theta},
        "antennas": [{"antenna_id": a.antenna_id, "position": list(a.position)} for a in s.antennas],
        "persons": [
            {"person_id": p.person_id, "head_height": p.head_height, "waypoints": [list(w) for w in p.waypoints]}
            for p in s.persons
        ],
        "tags": tags,
        "duration": s.duration,
        "rng_seed": s.rng_seed,
        "target_tag": s.target_tag,
        "noise": dataclasses.asdict(s.noise),
        "reader": dataclasses.asdict(s.reader),
    }


def dumps_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s), encoding="utf-8")


def loads_scenario(text: str) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioParseError("<file>", f"malformed YAML: {e}") from None
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioParseError("<file>", f"cannot read {path}: {e.strerror}") from None
    return loads_scenario(text)


def canonical_scenario_path() -> Path:
    return Path(__file__).with_name("data") / "two_walkers.yaml"
