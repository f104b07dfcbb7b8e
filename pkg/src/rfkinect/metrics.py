"""Run metrics.  Every function here is a pure function of logged columns."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .fusion import WINDOW, drop_window_rates


@dataclass(frozen=True)
class SeriesStats:
    min: float
    max: float
    mean: float
    std: float
    n: int

    @classmethod
    def of(cls, values) -> "SeriesStats | None":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return None
        return cls(float(v.min()), float(v.max()), float(v.mean()), float(v.std()), int(v.size))


def tracking_rmse(x, z, x_true, z_true) -> float:
    """Floor-plane RMSE in cm over all frames."""
    x, z = np.asarray(x, float), np.asarray(z, float)
    if x.size == 0:
        raise ValueError("empty track log")
    err2 = (x - np.asarray(x_true, float)) ** 2 + (z - np.asarray(z_true, float)) ** 2
    return 100.0 * math.sqrt(float(err2.mean()))


def _is_correct(tag, sid, skeleton_tag: Mapping[int, int | None]) -> bool:
    if tag is None or (isinstance(tag, float) and math.isnan(tag)):
        return False
    worn = skeleton_tag.get(int(sid))
    return worn is not None and int(tag) == worn


def identification_accuracy(
    t_s: Sequence[int],
    skeleton_ids: Sequence[int],
    tag_ids: Sequence,
    statuses: Sequence[str],
    skeleton_tag: Mapping[int, int | None],
    skip_convergence: float = 0.0,
) -> tuple[list[tuple[int, float]], SeriesStats | None]:
    """Per-second fraction of visible tagged people holding their own tag.

    ``skeleton_tag`` maps each skeleton to the tag its wearer carries (None if
    untagged).  Seconds without any visible tagged person are skipped.
    """
    hit: dict[int, int] = {}
    total: dict[int, int] = {}
    for t, sid, tag, status in zip(t_s, skeleton_ids, tag_ids, statuses):
        if t < skip_convergence or skeleton_tag.get(int(sid)) is None:
            continue
        total[t] = total.get(t, 0) + 1
        ok = status == "matched" and _is_correct(tag, sid, skeleton_tag)
        hit[t] = hit.get(t, 0) + int(ok)
    series = [(t, hit[t] / total[t]) for t in sorted(total)]
    return series, SeriesStats.of([a for _, a in series])


def target_tracking_accuracy(
    t_s, skeleton_ids, tag_ids, statuses, skeleton_tag, target_tag: int, seconds: Sequence[int],
    all_tags: Sequence[int] | None = None,
) -> float:
    """Fraction of ``seconds`` in which ``target_tag`` is bound to its wearer's skeleton."""
    if all_tags is not None and target_tag not in set(all_tags):
        raise ValueError(f"no tag {target_tag} in scenario")
    seconds = list(seconds)
    if not seconds:
        raise ValueError("no sampled seconds")
    good = set()
    for t, sid, tag, status in zip(t_s, skeleton_ids, tag_ids, statuses):
        if status == "matched" and _is_correct(tag, sid, skeleton_tag) and int(tag) == target_tag:
            good.add(t)
    return sum(1 for t in seconds if t in good) / len(seconds)


def drop_rate(retained_flags, window: int = WINDOW) -> float:
    """Mean over completed windows of dropped / (dropped + window).

    If no window of ``window`` retained bins completes, returns the lower
    bound dropped / (dropped + window) from the whole log.
    """
    flags = [bool(f) for f in retained_flags]
    rates = drop_window_rates(flags, window)
    if rates:
        return float(np.mean(rates))
    dropped = flags.count(False)
    return dropped / (dropped + window)


def velocity_error(v_est, v_true) -> float | None:
    """Mean |v_est - v_true| in cm/s over defined samples."""
    v_est, v_true = np.asarray(v_est, float), np.asarray(v_true, float)
    ok = np.isfinite(v_est) & np.isfinite(v_true)
    if not ok.any():
        return None
    return 100.0 * float(np.mean(np.abs(v_est[ok] - v_true[ok])))


def finite_std(values) -> float | None:
    v = np.asarray(values, float)
    v = v[np.isfinite(v)]
    return float(v.std()) if v.size > 1 else None


def identification_times(
    match_events: Sequence[tuple[float, int, int]],
    skeleton_first_seen: Mapping[int, float],
    skeleton_tag: Mapping[int, int | None],
) -> list[float]:
    """Seconds from each tagged skeleton's first frame to its first correct match.

    ``match_events`` holds (time, tag_id, skeleton_id).  Skeletons never
    matched correctly are censored and left out.
    """
    first: dict[int, float] = {}
    for t, tag, sid in match_events:
        if sid not in first and _is_correct(tag, sid, skeleton_tag):
            first[sid] = t
    return [first[sid] - skeleton_first_seen[sid] for sid in sorted(first) if sid in skeleton_first_seen]


def median_or_inf(values) -> float:
    return float(np.median(values)) if len(values) else math.inf
