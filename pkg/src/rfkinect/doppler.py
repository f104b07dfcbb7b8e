"""Tag radial velocity from same-carrier phase pairs.

Phase is two-way path phase, so a range change dd moves it by 4*pi*f*dd/c.
The per-pair Doppler shift is therefore -dphi/(2*pi*dt) Hz, and the
velocity c*f_D/(2*f) recovers -dd/dt exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .reader import C, PhaseReading, ReadingTable
from .timebase import BIN_SECONDS, bin_indices

MAX_PAIR_DT = BIN_SECONDS


@dataclass(frozen=True)
class PhasePair:
    phi1: float
    phi2: float
    dt: float
    freq: float


@dataclass(frozen=True)
class TagVelocitySample:
    tag_id: int
    bin_index: int
    antenna_id: int
    v: float | None  # None marks a failed bin
    f_D: float | None = None
    n_pairs: int = 0

    @property
    def failed(self) -> bool:
        return self.v is None


def wrap_pi(x):
    """Map angles to (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)
    return float(w) if np.ndim(w) == 0 else w


def pair_same_frequency(readings: Sequence[PhaseReading]) -> list[PhasePair]:
    """Chain consecutive readings on the same carrier; a reading before a hop is discarded."""
    pairs = []
    for a, b in zip(readings, readings[1:]):
        if a.channel_freq == b.channel_freq and b.t > a.t:
            pairs.append(PhasePair(a.phi, b.phi, b.t - a.t, a.channel_freq))
    return pairs


def estimate_doppler(pair: PhasePair) -> float:
    """Doppler shift in Hz; positive while the tag approaches the antenna."""
    if not (0.0 < pair.dt <= MAX_PAIR_DT):
        raise ValueError(f"pair interval {pair.dt} s outside (0, {MAX_PAIR_DT}]")
    dphi = wrap_pi(pair.phi2 - pair.phi1)
    return -dphi / (2.0 * math.pi * pair.dt)


def doppler_to_velocity(f_D, f_t):
    return C * f_D / (2.0 * f_t)


def bin_tag_velocity(tag_id: int, k: int, antenna_id: int, pairs: Sequence[PhasePair]) -> TagVelocitySample:
    """Mean of the per-pair velocities in one bin; FAILED without any pair."""
    usable = [p for p in pairs if 0.0 < p.dt <= MAX_PAIR_DT]
    if not usable:
        return TagVelocitySample(tag_id, k, antenna_id, None)
    fds = [estimate_doppler(p) for p in usable]
    vs = [doppler_to_velocity(fd, p.freq) for fd, p in zip(fds, usable)]
    return TagVelocitySample(tag_id, k, antenna_id, sum(vs) / len(vs), sum(fds) / len(fds), len(vs))


class TagVelocityGrid:
    """Dense (tag, antenna, bin) arrays of estimator output; NaN marks failure."""

    def __init__(self, tag_ids, antenna_ids, v, f_D, n_pairs):
        self.tag_ids = list(tag_ids)
        self.antenna_ids = list(antenna_ids)
        self.v = v
        self.f_D = f_D
        self.n_pairs = n_pairs

    @property
    def n_bins(self) -> int:
        return self.v.shape[2]

    def samples(self):
        for ti, tag in enumerate(self.tag_ids):
            for k in range(self.n_bins):
                for ai, ant in enumerate(self.antenna_ids):
                    yield self.sample(ti, ai, k)

    def sample(self, ti, ai, k) -> TagVelocitySample:
        tag, ant = self.tag_ids[ti], self.antenna_ids[ai]
        n = int(self.n_pairs[ti, ai, k])
        if n == 0:
            return TagVelocitySample(tag, k, ant, None)
        return TagVelocitySample(tag, k, ant, float(self.v[ti, ai, k]), float(self.f_D[ti, ai, k]), n)

    def bin_values(self, k: int) -> dict[int, dict[int, float | None]]:
        out = {}
        for ti, tag in enumerate(self.tag_ids):
            row = {}
            for ai, ant in enumerate(self.antenna_ids):
                row[ant] = None if self.n_pairs[ti, ai, k] == 0 else float(self.v[ti, ai, k])
            out[tag] = row
        return out


def estimate_tag_velocities(table: ReadingTable, tag_ids, antenna_ids, n_bins: int) -> TagVelocityGrid:
    """Vectorised equivalent of pairing + per-bin averaging over a whole reading log."""
    tag_ids, antenna_ids = list(tag_ids), list(antenna_ids)
    shape = (len(tag_ids), len(antenna_ids), n_bins)
    v_sum = np.zeros(shape)
    fd_sum = np.zeros(shape)
    count = np.zeros(shape, dtype=np.int64)
    if len(table):
        tpos = {t: i for i, t in enumerate(tag_ids)}
        apos = {a: i for i, a in enumerate(antenna_ids)}
        ti = np.array([tpos[t] for t in table.tag_id.tolist()], dtype=np.int64)
        ai = np.array([apos[a] for a in table.antenna_id.tolist()], dtype=np.int64)
        k = bin_indices(table.t)
        order = np.lexsort((table.t, ai, ti))
        ti, ai, k = ti[order], ai[order], k[order]
        t, f, phi = table.t[order], table.channel_freq[order], table.phi[order]
        dt = t[1:] - t[:-1]
        ok = (
            (ti[1:] == ti[:-1]) & (ai[1:] == ai[:-1]) & (k[1:] == k[:-1])
            & (f[1:] == f[:-1]) & (dt > 0) & (dt <= MAX_PAIR_DT)
            & (k[:-1] >= 0) & (k[:-1] < n_bins)
        )
        idx = np.nonzero(ok)[0]
        fd = -wrap_pi(phi[idx + 1] - phi[idx]) / (2.0 * np.pi * dt[idx])
        vel = doppler_to_velocity(fd, f[idx])
        where = (ti[idx], ai[idx], k[idx])
        np.add.at(v_sum, where, vel)
        np.add.at(fd_sum, where, fd)
        np.add.at(count, where, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(count > 0, v_sum / np.maximum(count, 1), np.nan)
        f_D = np.where(count > 0, fd_sum / np.maximum(count, 1), np.nan)
    return TagVelocityGrid(tag_ids, antenna_ids, v, f_D, count)
