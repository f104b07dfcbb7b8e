"""Frequency-hopping UHF reader model with time-multiplexed antennas."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .scenario import ReadModel, Scenario

C = 299_792_458.0
CHANNELS = 902.75e6 + 0.5e6 * np.arange(50)
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Dwell:
    start: float
    end: float
    channel_freq: float


@dataclass(frozen=True)
class CarrierPlan:
    dwells: tuple[Dwell, ...]

    def channel_at(self, t: float) -> float:
        starts = np.fromiter((d.start for d in self.dwells), float)
        i = int(np.searchsorted(starts, t, side="right")) - 1
        return self.dwells[max(i, 0)].channel_freq


@dataclass(frozen=True)
class PhaseReading:
    tag_id: int
    antenna_id: int
    t: float
    channel_freq: float
    phi: float


@dataclass(frozen=True)
class ReaderDopplerReading:
    tag_id: int
    antenna_id: int
    t: float
    f_D_api: float


def make_carrier_plan(seed, duration: float, dwell: float = 0.4) -> CarrierPlan:
    """Pseudo-random hop sequence; the first dwell is truncated so hops do not align with bins."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    edges = [0.0]
    t = float(rng.uniform(0.1, 1.0)) * dwell
    while t < duration:
        edges.append(t)
        t += dwell
    edges.append(float(duration))
    ch = int(rng.integers(len(CHANNELS)))
    dwells = []
    for a, b in zip(edges, edges[1:]):
        dwells.append(Dwell(a, b, float(CHANNELS[ch])))
        ch = (ch + int(rng.integers(1, len(CHANNELS)))) % len(CHANNELS)
    return CarrierPlan(tuple(dwells))


def antenna_slots(plan: CarrierPlan, n_antennas: int, slot: float = 0.025):
    """Round-robin antenna slots of length ``slot`` restarted in every dwell.

    Returns, per antenna, (start, end, freq, dwell index) arrays.
    """
    out = [([], [], [], []) for _ in range(n_antennas)]
    for di, d in enumerate(plan.dwells):
        n = max(int(np.ceil((d.end - d.start) / slot - 1e-9)), 1)
        edges = np.minimum(d.start + slot * np.arange(n + 1), d.end)
        for j in range(n):
            if edges[j + 1] <= edges[j]:
                continue
            cols = out[j % n_antennas]
            cols[0].append(edges[j])
            cols[1].append(edges[j + 1])
            cols[2].append(d.channel_freq)
            cols[3].append(di)
    return [
        (np.array(a, float), np.array(b, float), np.array(f, float), np.array(i, np.int64))
        for a, b, f, i in out
    ]


def _renewal_times(slot_start, slot_end, mean, shape, rng) -> tuple[np.ndarray, np.ndarray]:
    """Gamma renewal process in antenna-active time, mapped back to wall clock.

    Intervals carry over slot boundaries.  Returns (t, slot index).
    """
    lengths = slot_end - slot_start
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cum[-1]
    scale = mean / shape
    chunks = [np.array([rng.uniform() * rng.gamma(shape, scale)])]
    acc = chunks[0][0]
    while acc < total:
        n = int((total - acc) / mean * 1.1) + 16
        draws = rng.gamma(shape, scale, n)
        chunks.append(draws)
        acc += draws.sum()
    active = np.cumsum(np.concatenate(chunks))
    active = active[active < total]
    idx = np.searchsorted(cum, active, side="right") - 1
    idx = np.clip(idx, 0, lengths.size - 1)
    return slot_start[idx] + (active - cum[idx]), idx


def _blackouts(rm: ReadModel, duration: float, rng) -> list[tuple[float, float]]:
    """Short windows in which one tag is unreadable by one antenna."""
    if rm.blackout_rate <= 0:
        return []
    n = rng.poisson(rm.blackout_rate * duration)
    starts = rng.uniform(0.0, duration, n)
    lengths = rm.blackout_length * rng.uniform(0.5, 1.0, n)
    return list(zip(starts.tolist(), (starts + lengths).tolist()))


def api_doppler(true_radial_v, channel_freq, rng: np.random.Generator, sigma: float = 2.68):
    """Reader-reported Doppler (Hz): the true shift plus the reader's Gaussian error."""
    true_radial_v = np.asarray(true_radial_v, dtype=float)
    f = 2.0 * np.asarray(channel_freq, dtype=float) * true_radial_v / C
    if sigma > 0:
        f = f + rng.normal(0.0, sigma, np.shape(f))
    return f if np.ndim(f) else float(f)


def _wrap_2pi(phi):
    w = np.mod(phi, TWO_PI)
    w[w >= TWO_PI] = 0.0
    return w


def path_phase(freq, distance):
    """Two-way free-space phase 4*pi*f*d/c reduced to [0, 2*pi)."""
    return _wrap_2pi(np.atleast_1d(2.0 * TWO_PI * np.asarray(freq, float) * np.asarray(distance, float) / C))


def phase_sigma(s: Scenario) -> float:
    extra = max(len(s.persons) - 1, 0)
    return s.noise.phase_sigma * s.noise.multipath_factor ** extra


def same_antenna_interval(read_model: ReadModel, n_tags: int, n_antennas: int) -> float:
    """Mean wall-clock interval between reads of one tag by one antenna."""
    return read_model.base_interval * max(n_tags, read_model.min_tags) * n_antennas


class ReadingTable:
    """Time-ordered column store of phase readings and the reader's own Doppler values."""

    columns = ("t", "tag_id", "antenna_id", "channel_freq", "phi", "f_d_api")

    def __init__(self, t, tag_id, antenna_id, channel_freq, phi, f_d_api):
        self.t = np.asarray(t, dtype=float)
        self.tag_id = np.asarray(tag_id, dtype=np.int64)
        self.antenna_id = np.asarray(antenna_id, dtype=np.int64)
        self.channel_freq = np.asarray(channel_freq, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.f_d_api = np.asarray(f_d_api, dtype=float)

    def __len__(self):
        return self.t.size

    def take(self, idx) -> "ReadingTable":
        return ReadingTable(*(getattr(self, c)[idx] for c in self.columns))

    def where(self, tag_id=None, antenna_id=None) -> "ReadingTable":
        mask = np.ones(len(self), bool)
        if tag_id is not None:
            mask &= self.tag_id == tag_id
        if antenna_id is not None:
            mask &= self.antenna_id == antenna_id
        return self.take(mask)

    def readings(self) -> Iterator[PhaseReading]:
        for i in range(len(self)):
            yield PhaseReading(
                int(self.tag_id[i]), int(self.antenna_id[i]), float(self.t[i]),
                float(self.channel_freq[i]), float(self.phi[i]),
            )

    def doppler_readings(self) -> Iterator[ReaderDopplerReading]:
        for i in range(len(self)):
            yield ReaderDopplerReading(
                int(self.tag_id[i]), int(self.antenna_id[i]), float(self.t[i]), float(self.f_d_api[i])
            )

    @classmethod
    def concat(cls, parts) -> "ReadingTable":
        parts = list(parts)
        if not parts:
            return cls(*([] for _ in cls.columns))
        cols = [np.concatenate([getattr(p, c) for p in parts]) for c in cls.columns]
        order = np.lexsort((cols[2], cols[1], cols[0]))
        return cls(*(c[order] for c in cols))


def read_events(
    s: Scenario,
    plan: CarrierPlan,
    rng: np.random.Generator,
    read_model: ReadModel | None = None,
) -> ReadingTable:
    """Simulate every successful tag read over the scenario's duration."""
    rm = s.reader if read_model is None else read_model
    n_ant = len(s.antennas)
    n_tags = len(s.tags)
    mean_active = same_antenna_interval(rm, n_tags, n_ant) / n_ant
    slots = antenna_slots(plan, n_ant, rm.antenna_slot)
    sigma = phase_sigma(s)
    offsets = rng.uniform(0.0, TWO_PI, (n_tags, n_ant, len(CHANNELS)))
    parts = []
    for ti, tag in enumerate(s.tags):
        for ai, ant in enumerate(s.antennas):
            start, end, freq, _ = slots[ai]
            t, slot = _renewal_times(start, end, mean_active, rm.interval_shape, rng)
            keep = np.ones(t.size, bool)
            for a, b in list(tag.silent) + _blackouts(rm, plan.dwells[-1].end, rng):
                keep &= ~((t >= a) & (t < b))
            t, f = t[keep], freq[slot[keep]]
            pos = s.tag_positions(tag, t).reshape(-1, 2)
            vel = s.tag_velocities(tag, t)
            rel = pos - np.asarray(ant.position)
            d = np.hypot(rel[:, 0], rel[:, 1])
            phi = path_phase(f, d)
            ch = np.rint((f - CHANNELS[0]) / 0.5e6).astype(int)
            phi = phi + offsets[ti, ai, ch]
            if sigma > 0:
                phi = phi + rng.normal(0.0, sigma, t.size)
            v_true = -np.einsum("ij,ij->i", rel, vel) / d
            f_api = api_doppler(v_true, f, rng, s.noise.api_doppler_sigma)
            parts.append(ReadingTable(
                t, np.full(t.size, tag.tag_id), np.full(t.size, ant.antenna_id),
                f, _wrap_2pi(phi), np.atleast_1d(f_api),
            ))
    return ReadingTable.concat(parts)
