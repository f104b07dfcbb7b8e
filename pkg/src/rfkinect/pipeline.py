"""End-to-end runs: world -> sensor models -> trackers -> fusion -> logs -> report."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import __version__, generators, logs
from .depth import DepthSensor
from .doppler import TagVelocityGrid, estimate_tag_velocities
from .fusion import IdentificationEngine
from .metrics import (
    drop_rate, finite_std, identification_accuracy, identification_times, median_or_inf,
    target_tracking_accuracy, tracking_rmse, velocity_error,
)
from .reader import ReadingTable, make_carrier_plan, read_events
from .scenario import Scenario, dumps_scenario, loads_scenario
from .timebase import BIN_SECONDS, bin_index, n_complete_bins
from .tracker import bin_track_velocities, floor_positions

LOG_NAMES = (
    "tracks", "skeletons", "tags", "readings", "velocities", "person_velocities", "sync", "identity", "events",
)


@dataclass
class SensorStreams:
    scenario: Scenario
    seed: int
    n_bins: int
    tracks: dict
    skeletons: dict
    readings: ReadingTable
    grid: TagVelocityGrid
    person_bins: dict[int, dict[int, dict[int, float]]]  # bin -> skeleton -> antenna -> v
    person_velocities: dict

    def bins(self) -> Iterator[tuple[int, dict, dict]]:
        for k in range(self.n_bins):
            yield k, self.person_bins.get(k, {}), self.grid.bin_values(k)


@dataclass
class FusionLog:
    sync: dict = field(default_factory=lambda: logs.empty_table("sync"))
    identity: dict = field(default_factory=lambda: logs.empty_table("identity"))
    events: dict = field(default_factory=lambda: logs.empty_table("events"))


def _rngs(seed: int):
    depth_ss, plan_ss, read_ss = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(depth_ss), plan_ss, np.random.default_rng(read_ss)


def _range_rate(s: Scenario, positions_a, positions_b, dt):
    """Secant radial velocity toward each antenna between two position arrays."""
    out = []
    for a in s.antennas:
        ap = np.asarray(a.position)
        ra = np.hypot(*(positions_a - ap).T)
        rb = np.hypot(*(positions_b - ap).T)
        out.append((ra - rb) / dt)
    return out


def sense(s: Scenario, seed: int) -> SensorStreams:
    """Run both sensor models and both per-bin velocity estimators."""
    depth_rng, plan_ss, read_rng = _rngs(seed)
    n_bins = n_complete_bins(s.duration)

    sensor = DepthSensor(s, depth_rng)
    tracks = logs.empty_table("tracks")
    positions = []
    span: dict[tuple[int, int], list[float]] = {}
    first_seen: dict[int, float] = {}
    for frame in sensor.frames():
        fps = floor_positions(frame, s)
        for fp in fps:
            pid = sensor.skeleton_person[fp.skeleton_id]
            tx, tz = s.person(pid).positions([fp.t])[0]
            for c, v in zip(logs.SCHEMAS["tracks"], (fp.t, fp.skeleton_id, fp.x, fp.z, float(tx), float(tz))):
                tracks[c[0]].append(v)
            first_seen.setdefault(fp.skeleton_id, fp.t)
            key = (bin_index(fp.t), fp.skeleton_id)
            span.setdefault(key, [fp.t, fp.t])[1] = fp.t
        positions.extend(fps)

    skeletons = logs.empty_table("skeletons")
    for sid in sorted(sensor.skeleton_person):
        pid = sensor.skeleton_person[sid]
        for c, v in zip(("skeleton_id", "person_id", "tag_id", "first_seen"), (sid, pid, s.tag_of(pid), first_seen[sid])):
            skeletons[c].append(v)

    person_bins: dict[int, dict[int, dict[int, float]]] = {}
    pv = logs.empty_table("person_velocities")
    samples = [p for p in bin_track_velocities(positions, s.antennas) if p.bin_index < n_bins]
    ant_pos = {a.antenna_id: np.asarray(a.position) for a in s.antennas}
    for p in samples:
        person_bins.setdefault(p.bin_index, {}).setdefault(p.skeleton_id, {})[p.antenna_id] = p.v
        t0, t1 = span[(p.bin_index, p.skeleton_id)]
        person = s.person(sensor.skeleton_person[p.skeleton_id])
        a, b = person.positions([t0, t1])
        v_true = (np.hypot(*(a - ant_pos[p.antenna_id])) - np.hypot(*(b - ant_pos[p.antenna_id]))) / (t1 - t0)
        for c, v in zip(("bin", "skeleton_id", "antenna_id", "v", "v_true"),
                        (p.bin_index, p.skeleton_id, p.antenna_id, p.v, float(v_true))):
            pv[c].append(v)

    plan = make_carrier_plan(plan_ss, s.duration, s.reader.dwell)
    table = read_events(s, plan, read_rng)
    grid = estimate_tag_velocities(table, [t.tag_id for t in s.tags], [a.antenna_id for a in s.antennas], n_bins)
    return SensorStreams(s, seed, n_bins, tracks, skeletons, table, grid, person_bins, pv)


def tag_velocity_table(st: SensorStreams) -> dict:
    s, grid = st.scenario, st.grid
    out = logs.empty_table("velocities")
    if st.n_bins == 0:
        return out
    starts = BIN_SECONDS * np.arange(st.n_bins)
    for ti, tag in enumerate(s.tags):
        a = s.tag_positions(tag, starts)
        b = s.tag_positions(tag, starts + BIN_SECONDS)
        truth = _range_rate(s, a, b, BIN_SECONDS)
        for k in range(st.n_bins):
            for ai, ant in enumerate(grid.antenna_ids):
                row = (k, tag.tag_id, ant, grid.v[ti, ai, k], grid.f_D[ti, ai, k], grid.n_pairs[ti, ai, k],
                       truth[ai][k])
                for (c, kind), v in zip(logs.SCHEMAS["velocities"], row):
                    out[c].append(int(v) if kind == "i" else float(v))
    return out


def fuse(
    st: SensorStreams,
    engine: IdentificationEngine | None = None,
    on_bin: Callable[[int, IdentificationEngine], None] | None = None,
) -> FusionLog:
    """Feed the merged bin stream through the identification engine."""
    s = st.scenario
    engine = engine or IdentificationEngine([a.antenna_id for a in s.antennas], [t.tag_id for t in s.tags])
    log = FusionLog()
    last_second = int(math.floor(s.duration + 1e-9))
    next_second = 1

    def emit(upto: float):
        nonlocal next_second
        while next_second <= last_second and next_second <= upto + 1e-9:
            for sid, tag in engine.identity_map().items():
                for c, v in zip(("t_s", "skeleton_id", "tag_id", "status"),
                                (next_second, sid, tag, engine.status(sid))):
                    log.identity[c].append(v)
            next_second += 1

    for k, person_v, tag_v in st.bins():
        if on_bin is not None:
            on_bin(k, engine)
        result = engine.step(k, person_v, tag_v)
        complete = all(
            v is not None for row in tag_v.values() for v in row.values()
        )
        for c, v in zip(("bin", "retained", "complete"), (k, int(result.retained), int(complete))):
            log.sync[c].append(v)
        for e in result.events:
            row = (e.bin_index, BIN_SECONDS * (e.bin_index + 1), e.kind, e.tag_id, e.skeleton_id,
                   math.nan if e.distance is None else e.distance)
            for (c, _), v in zip(logs.SCHEMAS["events"], row):
                log.events[c].append(v)
        emit(BIN_SECONDS * (k + 1))
    emit(s.duration)
    return log


def simulate(s: Scenario, seed: int | None = None) -> dict:
    """All run logs as column tables."""
    seed = s.rng_seed if seed is None else seed
    st = sense(s, seed)
    fl = fuse(st)
    tags = logs.empty_table("tags")
    for t in s.tags:
        tags["tag_id"].append(t.tag_id)
        tags["person_id"].append(t.attached_person_id)
    r = st.readings
    readings = {c: getattr(r, c).tolist() for c in ReadingTable.columns}
    return {
        "tracks": st.tracks, "skeletons": st.skeletons, "tags": tags, "readings": readings,
        "velocities": tag_velocity_table(st), "person_velocities": st.person_velocities,
        "sync": fl.sync, "identity": fl.identity, "events": fl.events,
    }


def compute_report(tables: dict, s: Scenario, seed: int, skip_convergence: float = 0.0) -> dict:
    """Metrics from run logs; used both in-run and by replay."""
    tr = tables["tracks"]
    rmse = tracking_rmse(tr["x"], tr["z"], tr["x_true"], tr["z_true"]) if tr["t"] else None

    sk = tables["skeletons"]
    skeleton_tag = dict(zip(sk["skeleton_id"], sk["tag_id"]))
    idl = tables["identity"]
    _, stats = identification_accuracy(
        idl["t_s"], idl["skeleton_id"], idl["tag_id"], idl["status"], skeleton_tag, skip_convergence
    )
    seconds = [t for t in range(1, int(math.floor(s.duration + 1e-9)) + 1) if t >= skip_convergence]
    target = None
    if s.target_tag is not None and seconds:
        target = target_tracking_accuracy(
            idl["t_s"], idl["skeleton_id"], idl["tag_id"], idl["status"], skeleton_tag, s.target_tag, seconds,
            [t.tag_id for t in s.tags],
        )

    sync = tables["sync"]
    drop = drop_rate(sync["complete"]) if sync["bin"] else None

    worn = {t for t, p in zip(tables["tags"]["tag_id"], tables["tags"]["person_id"]) if p is not None}
    vel = tables["velocities"]
    vt = np.asarray(vel["tag_id"], dtype=np.int64)
    is_worn = np.isin(vt, list(worn))
    v = np.asarray(vel["v"], float)
    v_err = velocity_error(v[is_worn], np.asarray(vel["v_true"], float)[is_worn])
    est_std = finite_std(np.asarray(vel["f_d"], float)[~is_worn])
    rd = tables["readings"]
    api_still = ~np.isin(np.asarray(rd["tag_id"], dtype=np.int64), list(worn))
    api_std = finite_std(np.asarray(rd["f_d_api"], float)[api_still])

    ev = tables["events"]
    matches = [(t, tag, sid) for t, kind, tag, sid in zip(ev["t"], ev["kind"], ev["tag_id"], ev["skeleton_id"])
               if kind == "match"]
    times = identification_times(matches, dict(zip(sk["skeleton_id"], sk["first_seen"])), skeleton_tag)
    med = median_or_inf(times)

    return {
        "tool": "rfkinect",
        "version": __version__,
        "seed": seed,
        "config": {
            "duration_s": s.duration,
            "persons": len(s.persons),
            "tags": len(s.tags),
            "antennas": len(s.antennas),
            "noise": {"head_sigma": s.noise.head_sigma, "phase_sigma": s.noise.phase_sigma,
                      "api_doppler_sigma": s.noise.api_doppler_sigma},
            "target_tag": s.target_tag,
            "skip_convergence_s": skip_convergence,
        },
        "rmse_cm": rmse,
        "identification_accuracy": None if stats is None else {
            "min": stats.min, "max": stats.max, "mean": stats.mean, "std": stats.std, "seconds": stats.n,
        },
        "target_tracking_accuracy": target,
        "drop_rate": drop,
        "velocity_error_cm_s": v_err,
        "doppler_std_stationary_hz": {"estimator": est_std, "api": api_std},
        "identification_time_s": {"median": None if math.isinf(med) else med, "count": len(times)},
        "matches": len(matches),
        "revocations": sum(1 for k in ev["kind"] if k == "revoke"),
    }


def _fmt(v, unit=""):
    if v is None:
        return "n/a"
    return f"{v:.4f}{unit}" if isinstance(v, float) else f"{v}{unit}"


def format_report(r: dict) -> str:
    acc = r["identification_accuracy"]
    c = r["config"]
    lines = [
        f"persons={c['persons']} tags={c['tags']} antennas={c['antennas']} duration={c['duration_s']} s",
        f"tracking RMSE            {_fmt(r['rmse_cm'], ' cm')}",
        "identification accuracy  " + ("n/a" if acc is None else
                                       f"mean {acc['mean']:.4f} std {acc['std']:.4f} "
                                       f"min {acc['min']:.4f} max {acc['max']:.4f} over {acc['seconds']} s"),
        f"target tracking accuracy {_fmt(r['target_tracking_accuracy'])}",
        f"drop rate                {_fmt(r['drop_rate'])}",
        f"velocity error           {_fmt(r['velocity_error_cm_s'], ' cm/s')}",
        f"doppler std (stationary) estimator {_fmt(r['doppler_std_stationary_hz']['estimator'], ' Hz')}"
        f" api {_fmt(r['doppler_std_stationary_hz']['api'], ' Hz')}",
        f"identification time      median {_fmt(r['identification_time_s']['median'], ' s')}"
        f" over {r['identification_time_s']['count']}",
        f"matches {r['matches']} revocations {r['revocations']}",
    ]
    return "\n".join(lines) + "\n"


def report_json(r: dict) -> str:
    return json.dumps(r, indent=2) + "\n"


def write_run(out_dir, tables: dict, report: dict, s: Scenario, seed: int) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in LOG_NAMES:
        logs.write_table(out / f"{name}.csv", name, tables[name], seed)
    logs.write_text(out / "scenario.yaml", dumps_scenario(s), seed)
    logs.write_text(out / "report.json", report_json(report), seed)
    logs.write_text(out / "report.txt", format_report(report), seed)


def load_run(out_dir) -> tuple[dict, Scenario, int]:
    out = Path(out_dir)
    seed, text = logs.read_text(out / "scenario.yaml")
    s = loads_scenario(text)
    tables = {}
    for name in LOG_NAMES:
        file_seed, tables[name] = logs.read_table(out / f"{name}.csv", name)
        if file_seed != seed:
            raise logs.LogFormatError(f"{name}.csv carries seed {file_seed}, expected {seed}")
    return tables, s, seed


def run(s: Scenario, seed: int | None = None, out_dir=None, skip_convergence: float = 0.0) -> dict:
    seed = s.rng_seed if seed is None else seed
    tables = simulate(s, seed)
    report = compute_report(tables, s, seed, skip_convergence)
    if out_dir is not None:
        write_run(out_dir, tables, report, s, seed)
    return report


def replay(out_dir, skip_convergence: float = 0.0) -> dict:
    tables, s, seed = load_run(out_dir)
    return compute_report(tables, s, seed, skip_convergence)


def drop_rate_point(n_tags: int, n_antennas: int, duration: float, seed: int) -> dict:
    """Drop rate for stationary tags only; a bin counts as dropped when any tag lacks a velocity."""
    st = sense(generators.stationary_tags(n_tags, n_antennas, duration, seed), seed)
    complete = (st.grid.n_pairs > 0).all(axis=(0, 1))
    return {"antennas": n_antennas, "tags": n_tags, "drop_rate": drop_rate(complete.tolist())}


def identification_time_point(n_tags: int, n_antennas: int, duration: float, seed: int) -> dict:
    """Median time to identify a walker who keeps leaving and re-entering the view."""
    s = generators.in_and_out_walker(n_tags, n_antennas, duration, seed)
    st = sense(s, seed)
    fl = fuse(st)
    sk = st.skeletons
    skeleton_tag = dict(zip(sk["skeleton_id"], sk["tag_id"]))
    ev = fl.events
    matches = [(t, tag, sid) for t, kind, tag, sid in zip(ev["t"], ev["kind"], ev["tag_id"], ev["skeleton_id"])
               if kind == "match"]
    times = identification_times(matches, dict(zip(sk["skeleton_id"], sk["first_seen"])), skeleton_tag)
    return {
        "antennas": n_antennas, "tags": n_tags, "median_s": median_or_inf(times), "identified": len(times),
        "appearances": len(sk["skeleton_id"]),
    }


def sweep(tag_counts, antenna_counts, duration: float, seed: int, single_person: bool = False) -> list[dict]:
    point = identification_time_point if single_person else drop_rate_point
    return [point(n, a, duration, seed) for a in antenna_counts for n in tag_counts]


def sweep_csv(rows: list[dict], seed: int) -> str:
    cols = list(rows[0]) if rows else []
    out = [logs.header_line(seed), ",".join(cols)]
    for r in rows:
        out.append(",".join(logs._fmt(r[c], "f" if isinstance(r[c], float) else "i") for c in cols))
    return "\n".join(out) + "\n"
