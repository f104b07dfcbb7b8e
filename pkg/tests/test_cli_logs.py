import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from rfkinect import __version__, cli, generators, logs
from rfkinect.scenario import save_scenario


@pytest.fixture(scope="module")
def short_scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "short.yaml"
    save_scenario(generators.walkers(2, 30.0, seed=5, extra_tags=3), path)
    return path


@pytest.fixture(scope="module")
def run_dir(short_scenario, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run", "--scenario", str(short_scenario), "--seed", "11", "--out-dir", str(out)]) == 0
    return out


def test_every_output_file_has_header(run_dir):
    files = sorted(run_dir.iterdir())
    assert len(files) >= 12
    for f in files:
        first = f.read_text().splitlines()[0]
        assert first == f"# rfkinect {__version__} seed=11"


def test_run_is_byte_identical(short_scenario, run_dir, tmp_path):
    assert cli.main(["run", "--scenario", str(short_scenario), "--seed", "11", "--out-dir", str(tmp_path)]) == 0
    for f in run_dir.iterdir():
        assert (tmp_path / f.name).read_bytes() == f.read_bytes(), f.name


def test_different_seed_changes_logs(short_scenario, run_dir, tmp_path):
    cli.main(["run", "--scenario", str(short_scenario), "--seed", "12", "--out-dir", str(tmp_path)])
    assert (tmp_path / "readings.csv").read_bytes() != (run_dir / "readings.csv").read_bytes()


def test_replay_matches_report(run_dir, capsys):
    capsys.readouterr()
    assert cli.main(["replay", "--out-dir", str(run_dir)]) == 0
    replayed = json.loads(capsys.readouterr().out)
    _, body = logs.read_text(run_dir / "report.json")
    assert replayed == json.loads(body)


def test_report_fields_in_range(run_dir):
    _, body = logs.read_text(run_dir / "report.json")
    r = json.loads(body)
    acc = r["identification_accuracy"]
    assert 0.0 <= acc["min"] <= acc["mean"] <= acc["max"] <= 1.0
    assert r["rmse_cm"] >= 0.0
    assert 0.0 <= r["drop_rate"] < 1.0
    assert 0.0 <= r["target_tracking_accuracy"] <= 1.0
    assert r["seed"] == 11 and r["config"]["persons"] == 2


def test_overrides(short_scenario, tmp_path, capsys):
    args = ["run", "--scenario", str(short_scenario), "--seed", "1", "--duration", "12", "--antennas", "1",
            "--tags", "8", "--single-person", "--noise-profile", "noiseless", "--out-dir", str(tmp_path)]
    assert cli.main(args) == 0
    _, body = logs.read_text(tmp_path / "report.json")
    c = json.loads(body)["config"]
    assert (c["persons"], c["tags"], c["antennas"], c["duration_s"]) == (1, 8, 1, 12.0)
    assert json.loads(body)["rmse_cm"] < 0.01


def test_validate(short_scenario, tmp_path, capsys):
    assert cli.main(["validate-scenario", "--scenario", str(short_scenario)]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text(short_scenario.read_text().replace("tilt_theta: 10.0", "tilt_theta: 95.0"))
    assert cli.main(["validate-scenario", "--scenario", str(bad)]) == 1
    assert "tilt_theta" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--bogus"],
    ["frobnicate"],
    ["run", "--antennas", "5"],
    ["run", "--noise-profile", "loud"],
    ["sweep", "--tags", "x..y"],
    ["sweep", "--antennas", "3"],
    ["validate-scenario", "--scenario", "/nonexistent/file.yaml"],
])
def test_config_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 1
    assert not (tmp_path / "out").exists()


def test_runtime_errors_exit_2(tmp_path, run_dir):
    assert cli.main(["replay", "--out-dir", str(tmp_path / "missing")]) == 2
    broken = tmp_path / "broken"
    broken.mkdir()
    for f in run_dir.iterdir():
        (broken / f.name).write_bytes(f.read_bytes())
    (broken / "sync.csv").write_text("no header\n")
    assert cli.main(["replay", "--out-dir", str(broken)]) == 2


def test_sweep_writes_table(tmp_path):
    argv = ["sweep", "--tags", "10,20", "--antennas", "1", "--duration", "20", "--out-dir", str(tmp_path)]
    assert cli.main(argv) == 0
    lines = (tmp_path / "drop_rate.csv").read_text().splitlines()
    assert lines[0] == f"# rfkinect {__version__} seed=0"
    assert lines[1] == "antennas,tags,drop_rate"
    assert len(lines) == 4


def test_parse_counts():
    assert cli.parse_counts("10..100", "t") == [10, 25, 50, 75, 100]
    assert cli.parse_counts("10..30:10", "t") == [10, 20, 30]
    assert cli.parse_counts("1,2", "a") == [1, 2]
    with pytest.raises(cli.ConfigError):
        cli.parse_counts("0,1", "a")


def test_header_parsing():
    assert logs.parse_header("# rfkinect 0.1.0 seed=42\n") == 42
    with pytest.raises(logs.LogFormatError):
        logs.parse_header("t,skeleton_id\n")


rows = st.lists(
    st.tuples(
        st.floats(allow_nan=True, allow_infinity=False), st.integers(-10**6, 10**6),
        st.one_of(st.none(), st.integers(0, 10**6)), st.floats(allow_nan=False, allow_infinity=False),
    ),
    max_size=20,
)


@settings(max_examples=50, deadline=None)
@given(rows, st.integers(0, 2**31))
def test_table_round_trip_is_exact(tmp_path_factory, data, seed):
    path = tmp_path_factory.mktemp("tbl") / "events.csv"
    table = logs.empty_table("events")
    for dist, b, tag, t in data:
        for c, v in zip(("bin", "t", "kind", "tag_id", "skeleton_id", "distance"), (b, t, "match", tag, tag, dist)):
            table[c].append(v)
    logs.write_table(path, "events", table, seed)
    got_seed, back = logs.read_table(path, "events")
    assert got_seed == seed
    for c, kind in logs.SCHEMAS["events"]:
        for a, b in zip(table[c], back[c]):
            if kind == "f" and math.isnan(a):
                assert math.isnan(b)
            else:
                assert a == b
