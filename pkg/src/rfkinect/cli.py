"""Command-line entry point: run, sweep, replay, validate-scenario.

Exit status is 0 on success, 1 for configuration errors and 2 for runtime
failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, logs, pipeline
from .scenario import (
    NoiseProfile, Scenario, ScenarioError, Tag, canonical_scenario_path, load_scenario,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
DEFAULT_SWEEP_TAGS = "10..100"
SWEEP_STEP = 25


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_counts(text: str, where: str) -> list[int]:
    """``"1,2"`` -> [1, 2]; ``"a..b"`` -> a then every multiple of 25 up to b; ``"a..b:s"`` -> range."""
    try:
        if ".." in text:
            lo, rest = text.split("..", 1)
            hi, _, step = rest.partition(":")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            if step:
                values = list(range(lo, hi + 1, int(step)))
            else:
                values = [lo] + [v for v in range(SWEEP_STEP, hi + 1, SWEEP_STEP) if v > lo]
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None
    if not values or min(values) < 1:
        raise ConfigError(f"{where}: counts must be positive")
    return values


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rfkinect", description="RFID + depth-camera identity fusion simulator")
    p.add_argument("--version", action="version", version=f"rfkinect {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one scenario and write logs and a report")
    r.add_argument("--scenario", type=Path, default=None, help="scenario YAML (default: bundled layout)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--duration", type=float, default=None)
    r.add_argument("--antennas", type=int, default=None, help="use the first N antennas")
    r.add_argument("--tags", type=int, default=None, help="pad with (or drop) stationary tags to N total")
    r.add_argument("--noise-profile", choices=("default", "noiseless"), default=None)
    r.add_argument("--single-person", action="store_true", help="keep only the first person")
    r.add_argument("--skip-convergence", type=float, default=0.0, metavar="S")
    r.add_argument("--out-dir", type=Path, default=Path("out"))

    sw = sub.add_parser("sweep", help="drop-rate or identification-time sweep")
    sw.add_argument("--tags", default=DEFAULT_SWEEP_TAGS, help="e.g. 10..100, 10..100:10 or 10,25,50")
    sw.add_argument("--antennas", default="1,2")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--duration", type=float, default=None, help="default 600 s, or 300 s with --single-person")
    sw.add_argument("--single-person", action="store_true", help="identification time of one walker")
    sw.add_argument("--out-dir", type=Path, default=Path("out"))

    rp = sub.add_parser("replay", help="recompute the report from a run's logs")
    rp.add_argument("--out-dir", type=Path, required=True)
    rp.add_argument("--skip-convergence", type=float, default=0.0, metavar="S")

    v = sub.add_parser("validate-scenario", help="check a scenario file")
    v.add_argument("--scenario", type=Path, required=True)
    return p


def apply_overrides(s: Scenario, args) -> Scenario:
    if args.single_person:
        if not s.persons:
            raise ScenarioError("persons", "--single-person needs at least one person")
        keep = s.persons[0].person_id
        tags = tuple(t for t in s.tags if t.attached_person_id in (None, keep))
        target = s.target_tag if s.target_tag in {t.tag_id for t in tags} else None
        s = s.replace(persons=s.persons[:1], tags=tags, target_tag=target)
    if args.duration is not None:
        s = s.replace(duration=args.duration)
    if args.antennas is not None:
        if not 1 <= args.antennas <= len(s.antennas):
            raise ScenarioError("antennas", f"scenario defines {len(s.antennas)} antennas, asked for {args.antennas}")
        s = s.replace(antennas=s.antennas[: args.antennas])
    if args.tags is not None:
        worn = [t for t in s.tags if t.attached_person_id is not None]
        loose = [t for t in s.tags if t.attached_person_id is None]
        if args.tags < len(worn):
            raise ScenarioError("tags", f"{len(worn)} tags are worn; cannot reduce to {args.tags}")
        loose = loose[: args.tags - len(worn)]
        next_id = max((t.tag_id for t in s.tags), default=0) + 1
        (x0, x1), (z0, z1) = s.room_extent
        while len(worn) + len(loose) < args.tags:
            i = len(loose)
            # golden-ratio scatter keeps padded tags spread out and deterministic
            fx, fz = ((i * 0.618034) % 1.0), ((i * 0.381966) % 1.0)
            loose.append(Tag(next_id, None, (x0 + (0.1 + 0.8 * fx) * (x1 - x0), z0 + (0.1 + 0.8 * fz) * (z1 - z0))))
            next_id += 1
        s = s.replace(tags=tuple(worn + loose))
    if args.noise_profile is not None:
        s = s.replace(noise=NoiseProfile.named(args.noise_profile))
    return s


def _run(args) -> int:
    path = args.scenario or canonical_scenario_path()
    s = apply_overrides(load_scenario(path), args)
    report = pipeline.run(s, args.seed, args.out_dir, args.skip_convergence)
    print(pipeline.format_report(report), end="")
    print(f"logs written to {args.out_dir}")
    return EXIT_OK


def _sweep(args) -> int:
    tags = parse_counts(args.tags, "--tags")
    antennas = parse_counts(args.antennas, "--antennas")
    if max(antennas) > 2:
        raise ConfigError("--antennas: at most 2 antennas per reader")
    duration = args.duration or (300.0 if args.single_person else 600.0)
    if duration <= 0:
        raise ConfigError("--duration: must be positive")
    rows = pipeline.sweep(tags, antennas, duration, args.seed, args.single_person)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    name = "identification_time.csv" if args.single_person else "drop_rate.csv"
    text = pipeline.sweep_csv(rows, args.seed)
    (args.out_dir / name).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def _replay(args) -> int:
    report = pipeline.replay(args.out_dir, args.skip_convergence)
    print(pipeline.report_json(report), end="")
    return EXIT_OK


def _validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"ok: {len(s.persons)} persons, {len(s.tags)} tags, {len(s.antennas)} antennas, {s.duration} s")
    return EXIT_OK


COMMANDS = {"run": _run, "sweep": _sweep, "replay": _replay, "validate-scenario": _validate}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (logs.LogFormatError, OSError, json.JSONDecodeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
