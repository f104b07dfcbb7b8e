"""Identity assignment by matching person and tag radial-velocity sequences.

Both pipelines deliver one velocity per (entity, antenna, 400 ms bin).  A bin
is kept only when every active tag and every tracked person has a velocity
from every antenna; otherwise it is dropped for everybody, so retained
sequences stay aligned without interpolation.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

WINDOW = 20
VALIDATION_WINDOW = 40
THRESHOLD_CM_S = 30.0
DEPARTURE_BINS = 3

Velocities = Mapping[int, Mapping[int, "float | None"]]  # entity -> antenna -> v (m/s)


def sequence_distance(a, b) -> float:
    """Per-sample RMS difference in cm/s over all antennas.

    ``a`` and ``b`` are (n_antennas, n_samples) arrays in m/s.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"sequence shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty sequences")
    return 100.0 * math.sqrt(float(np.sum((a - b) ** 2)) / a.size)


@dataclass(frozen=True)
class Match:
    tag_id: int
    skeleton_id: int
    distance: float


@dataclass(frozen=True)
class Assignment:
    matches: tuple[Match, ...]
    unmatched_tags: tuple[int, ...]
    unmatched_people: tuple[int, ...]


def assign_identities(distances, tag_ids: Sequence[int], skeleton_ids: Sequence[int]) -> Assignment:
    """Greedy one-to-one assignment: repeatedly take the global minimum entry.

    Rows are tags, columns skeletons.  Ties go to the lower tag id, then the
    lower skeleton id.
    """
    d = np.asarray(distances, dtype=float).reshape(len(tag_ids), len(skeleton_ids))
    order = sorted(
        ((d[i, j], tag_ids[i], skeleton_ids[j], i, j) for i in range(len(tag_ids)) for j in range(len(skeleton_ids))),
        key=lambda e: e[:3],
    )
    used_rows, used_cols, matches = set(), set(), []
    for value, tag, sid, i, j in order:
        if i in used_rows or j in used_cols:
            continue
        used_rows.add(i)
        used_cols.add(j)
        matches.append(Match(tag, sid, float(value)))
    return Assignment(
        tuple(matches),
        tuple(t for i, t in enumerate(tag_ids) if i not in used_rows),
        tuple(s for j, s in enumerate(skeleton_ids) if j not in used_cols),
    )


@dataclass
class TagLifecycle:
    consecutive_failures: int = 0
    state: str = "active"  # active | departed


@dataclass
class ValidationState:
    window: deque = field(default_factory=lambda: deque(maxlen=VALIDATION_WINDOW))
    status: str = "accumulating"  # accumulating | valid | revoked
    last_distance: float | None = None


@dataclass(frozen=True)
class AlignedWindow:
    bin_indices: tuple[int, ...]
    person_seqs: dict[int, np.ndarray]  # skeleton -> (n_antennas, WINDOW)
    tag_seqs: dict[int, np.ndarray]


@dataclass(frozen=True)
class Event:
    bin_index: int
    kind: str  # match | revoke | release | depart | return
    tag_id: int | None = None
    skeleton_id: int | None = None
    distance: float | None = None


@dataclass(frozen=True)
class BinResult:
    bin_index: int
    retained: bool
    events: tuple[Event, ...]


class _History:
    """Velocity vectors for the most recent contiguous run of retained bins."""

    def __init__(self, maxlen: int):
        self.bins: deque = deque(maxlen=maxlen)
        self.vecs: deque = deque(maxlen=maxlen)
        self.fresh = 0  # retained bins since the entity last took part in a round

    def push(self, k: int, vec: np.ndarray) -> None:
        self.bins.append(k)
        self.vecs.append(vec)
        self.fresh += 1

    def clear(self) -> None:
        self.bins.clear()
        self.vecs.clear()
        self.fresh = 0

    def __len__(self):
        return len(self.bins)


class DropSynchronizer:
    """Per-bin drop decision and tag lifecycle bookkeeping."""

    def __init__(self, antenna_ids: Sequence[int], tag_ids: Iterable[int], departure_bins: int = DEPARTURE_BINS):
        self.antenna_ids = list(antenna_ids)
        self.departure_bins = departure_bins
        self.lifecycle = {t: TagLifecycle() for t in tag_ids}

    def _complete(self, row) -> bool:
        return row is not None and all(row.get(a) is not None for a in self.antenna_ids)

    def step(self, k: int, person_v: Velocities, tag_v: Velocities):
        """Returns (retained, departed tags, returned tags)."""
        was_active = {t for t, lc in self.lifecycle.items() if lc.state == "active"}
        departed, returned = [], []
        retained = all(self._complete(person_v[s]) for s in person_v)
        for t, lc in self.lifecycle.items():
            if self._complete(tag_v.get(t)):
                lc.consecutive_failures = 0
                if lc.state == "departed":
                    lc.state = "active"
                    returned.append(t)
                continue
            lc.consecutive_failures += 1
            if t in was_active:
                retained = False
                if lc.consecutive_failures >= self.departure_bins:
                    lc.state = "departed"
                    departed.append(t)
        return retained, departed, returned

    def active_tags(self) -> list[int]:
        return sorted(t for t, lc in self.lifecycle.items() if lc.state == "active")


def synchronize_drop(bins: Iterable[tuple[int, Velocities, Velocities]], antenna_ids, tag_ids):
    """Retained bins of a (bin_index, person velocities, tag velocities) stream.

    Yields (bin_index, persons, tags) for retained bins only; tags are the
    ones active after the bin's lifecycle update.
    """
    sync = DropSynchronizer(antenna_ids, tag_ids)
    for k, person_v, tag_v in bins:
        retained, _, _ = sync.step(k, person_v, tag_v)
        if retained:
            active = sync.active_tags()
            yield k, dict(person_v), {t: tag_v[t] for t in active}


def drop_window_rates(retained_flags: Iterable[bool], window: int = WINDOW) -> list[float]:
    """dropped / (dropped + window) for every completed block of ``window`` retained bins."""
    rates, dropped, kept = [], 0, 0
    for r in retained_flags:
        if r:
            kept += 1
            if kept == window:
                rates.append(dropped / (dropped + window))
                dropped = kept = 0
        else:
            dropped += 1
    return rates


class IdentificationEngine:
    """Sequential consumer of merged per-bin velocities.

    Unmatched entities accumulate retained bins; when an unmatched tag and an
    unmatched person both hold ``window`` aligned samples and one of them has
    gathered a fresh window since its last round, the distance matrix is
    evaluated and assigned greedily.  Matched pairs are re-checked over a
    sliding ``validation_window`` and revoked above ``threshold`` cm/s.
    """

    def __init__(
        self,
        antenna_ids: Sequence[int],
        tag_ids: Iterable[int],
        window: int = WINDOW,
        validation_window: int = VALIDATION_WINDOW,
        threshold: float = THRESHOLD_CM_S,
        departure_bins: int = DEPARTURE_BINS,
    ):
        self.antenna_ids = list(antenna_ids)
        self.window = window
        self.validation_window = validation_window
        self.threshold = threshold
        self.sync = DropSynchronizer(self.antenna_ids, tag_ids, departure_bins)
        self.tag_hist = {t: _History(window) for t in self.sync.lifecycle}
        self.person_hist: dict[int, _History] = {}
        self.match_of_tag: dict[int, int] = {}
        self.match_of_person: dict[int, int] = {}
        self.validation: dict[int, ValidationState] = {}  # keyed by tag
        self.revoked: set[int] = set()  # skeletons whose last match was revoked
        self.events: list[Event] = []
        self.last_window: AlignedWindow | None = None

    # -- public state --------------------------------------------------

    def identity_map(self) -> dict[int, int | None]:
        return {s: self.match_of_person.get(s) for s in sorted(self.person_hist)}

    def status(self, skeleton_id: int) -> str:
        if skeleton_id in self.match_of_person:
            return "matched"
        return "revoked" if skeleton_id in self.revoked else "accumulating"

    def force_match(self, tag_id: int, skeleton_id: int, k: int = -1) -> None:
        """Install a match directly (used to exercise validation)."""
        for t in (tag_id, self.match_of_person.get(skeleton_id)):
            if t is not None and t in self.match_of_tag:
                self._unmatch(t, k, "release")
        self._match(Match(tag_id, skeleton_id, float("nan")), k)

    # -- internals -----------------------------------------------------

    def _vec(self, row) -> np.ndarray:
        return np.array([row[a] for a in self.antenna_ids], dtype=float)

    def _match(self, m: Match, k: int) -> None:
        self.match_of_tag[m.tag_id] = m.skeleton_id
        self.match_of_person[m.skeleton_id] = m.tag_id
        self.validation[m.tag_id] = ValidationState(deque(maxlen=self.validation_window))
        self.revoked.discard(m.skeleton_id)
        self.events.append(Event(k, "match", m.tag_id, m.skeleton_id, m.distance))

    def _unmatch(self, tag: int, k: int, kind: str, distance: float | None = None) -> None:
        sid = self.match_of_tag.pop(tag)
        self.match_of_person.pop(sid, None)
        self.validation.pop(tag, None)
        if tag in self.tag_hist:
            self.tag_hist[tag].fresh = 0
        if sid in self.person_hist:
            self.person_hist[sid].fresh = 0
            if kind == "revoke":
                self.revoked.add(sid)
        self.events.append(Event(k, kind, tag, sid, distance))

    def step(self, k: int, person_v: Velocities, tag_v: Velocities) -> BinResult:
        n_events = len(self.events)

        # skeletons without a sample have left the view; new ones start accumulating
        for sid in [s for s in self.person_hist if s not in person_v]:
            if sid in self.match_of_person:
                self._unmatch(self.match_of_person[sid], k, "release")
            del self.person_hist[sid]
            self.revoked.discard(sid)
        for sid in person_v:
            self.person_hist.setdefault(sid, _History(self.window))

        retained, departed, returned = self.sync.step(k, person_v, tag_v)
        for t in departed:
            self.events.append(Event(k, "depart", t))
            if t in self.match_of_tag:
                self._unmatch(t, k, "release")
            self.tag_hist[t].clear()
        for t in returned:
            self.events.append(Event(k, "return", t))
            self.tag_hist[t].clear()

        if retained:
            active = self.sync.active_tags()
            pvec = {s: self._vec(person_v[s]) for s in person_v}
            tvec = {t: self._vec(tag_v[t]) for t in active}
            for s, v in pvec.items():
                self.person_hist[s].push(k, v)
            for t, v in tvec.items():
                self.tag_hist[t].push(k, v)
            self._validate(k, pvec, tvec)
            self._identify(k)
        return BinResult(k, retained, tuple(self.events[n_events:]))

    def _validate(self, k, pvec, tvec) -> None:
        for tag, sid in list(self.match_of_tag.items()):
            if tag not in tvec or sid not in pvec:
                continue
            state = self.validation[tag]
            state.window.append((pvec[sid], tvec[tag]))
            if len(state.window) < self.validation_window:
                continue
            p = np.stack([w[0] for w in state.window], axis=1)
            q = np.stack([w[1] for w in state.window], axis=1)
            d = sequence_distance(p, q)
            state.last_distance = d
            if d > self.threshold:
                state.status = "revoked"
                self._unmatch(tag, k, "revoke", d)
            else:
                state.status = "valid"

    def _identify(self, k) -> None:
        w = self.window
        tags = [t for t in self.sync.active_tags() if t not in self.match_of_tag and len(self.tag_hist[t]) >= w]
        people = [s for s in sorted(self.person_hist) if s not in self.match_of_person and len(self.person_hist[s]) >= w]
        if not tags or not people:
            return
        hists = [self.tag_hist[t] for t in tags] + [self.person_hist[s] for s in people]
        if not any(h.fresh >= w for h in hists):
            return
        bins = tuple(hists[0].bins)
        assert all(tuple(h.bins) == bins for h in hists), "retained sequences out of alignment"
        tag_seqs = {t: np.stack(self.tag_hist[t].vecs, axis=1) for t in tags}
        person_seqs = {s: np.stack(self.person_hist[s].vecs, axis=1) for s in people}
        self.last_window = AlignedWindow(bins, person_seqs, tag_seqs)
        d = np.array([[sequence_distance(person_seqs[s], tag_seqs[t]) for s in people] for t in tags])
        for h in hists:
            h.fresh = 0
        for m in assign_identities(d, tags, people).matches:
            self._match(m, k)
