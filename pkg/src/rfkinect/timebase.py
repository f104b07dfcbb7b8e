"""Shared 400 ms bin grid used by both sensor pipelines."""
import math

import numpy as np

BIN_SECONDS = 0.4
_EPS = 1e-9


def bin_index(t: float) -> int:
    return int(math.floor(t / BIN_SECONDS + _EPS))


def bin_indices(t) -> np.ndarray:
    return np.floor(np.asarray(t, dtype=float) / BIN_SECONDS + _EPS).astype(np.int64)


def bin_start(k: int) -> float:
    return k * BIN_SECONDS


def n_complete_bins(duration: float) -> int:
    return int(math.floor(duration / BIN_SECONDS + _EPS))
