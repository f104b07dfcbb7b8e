"""CSV logs with a version/seed header line.

Floats are written with ``repr`` so a log read back yields bit-identical
values; empty cells stand for missing values (NaN for floats, None for
optional ids).
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import __version__

# column name -> kind: f float, i int, o optional int, s string
SCHEMAS: dict[str, list[tuple[str, str]]] = {
    "tracks": [("t", "f"), ("skeleton_id", "i"), ("x", "f"), ("z", "f"), ("x_true", "f"), ("z_true", "f")],
    "skeletons": [("skeleton_id", "i"), ("person_id", "i"), ("tag_id", "o"), ("first_seen", "f")],
    "tags": [("tag_id", "i"), ("person_id", "o")],
    "readings": [
        ("t", "f"), ("tag_id", "i"), ("antenna_id", "i"), ("channel_freq", "f"), ("phi", "f"), ("f_d_api", "f"),
    ],
    "velocities": [
        ("bin", "i"), ("tag_id", "i"), ("antenna_id", "i"), ("v", "f"), ("f_d", "f"), ("n_pairs", "i"),
        ("v_true", "f"),
    ],
    "person_velocities": [("bin", "i"), ("skeleton_id", "i"), ("antenna_id", "i"), ("v", "f"), ("v_true", "f")],
    "sync": [("bin", "i"), ("retained", "i"), ("complete", "i")],
    "identity": [("t_s", "i"), ("skeleton_id", "i"), ("tag_id", "o"), ("status", "s")],
    "events": [("bin", "i"), ("t", "f"), ("kind", "s"), ("tag_id", "o"), ("skeleton_id", "o"), ("distance", "f")],
}


class LogFormatError(RuntimeError):
    pass


def header_line(seed: int) -> str:
    return f"# rfkinect {__version__} seed={seed}"


def parse_header(line: str) -> int:
    parts = line.strip().split()
    if len(parts) != 4 or parts[:2] != ["#", "rfkinect"] or not parts[3].startswith("seed="):
        raise LogFormatError(f"bad header line: {line.strip()!r}")
    return int(parts[3][5:])


def _fmt(v, kind):
    if kind == "f":
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    if kind == "o":
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return ""
        return str(int(v))
    if kind == "i":
        return str(int(v))
    return str(v)


def _parse(text, kind):
    if kind == "f":
        return math.nan if text == "" else float(text)
    if kind == "o":
        return None if text == "" else int(text)
    if kind == "i":
        return int(text)
    return text


def empty_table(name: str) -> dict[str, list]:
    return {c: [] for c, _ in SCHEMAS[name]}


def write_table(path, name: str, table: dict, seed: int) -> None:
    schema = SCHEMAS[name]
    cols = [table[c] for c, _ in schema]
    n = len(cols[0]) if cols else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(seed) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c for c, _ in schema])
        kinds = [k for _, k in schema]
        for i in range(n):
            w.writerow([_fmt(col[i], k) for col, k in zip(cols, kinds)])


def read_table(path, name: str) -> tuple[int, dict[str, list]]:
    schema = SCHEMAS[name]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise LogFormatError(f"cannot read {path}: {e.strerror}") from None
    with fh:
        seed = parse_header(fh.readline())
        r = csv.reader(fh)
        names = next(r, None)
        if names != [c for c, _ in schema]:
            raise LogFormatError(f"{path}: unexpected columns {names}")
        table = empty_table(name)
        for row in r:
            for (c, k), text in zip(schema, row):
                table[c].append(_parse(text, k))
    return seed, table


def as_array(table: dict, column: str, dtype=float) -> np.ndarray:
    return np.asarray(table[column], dtype=dtype)


def write_text(path, text: str, seed: int, comment: str = "#") -> None:
    Path(path).write_text(f"{comment} rfkinect {__version__} seed={seed}\n{text}", encoding="utf-8")


def read_text(path) -> tuple[int, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise LogFormatError(f"cannot read {path}: {e.strerror}") from None
    first, _, rest = text.partition("\n")
    return parse_header(first), rest
