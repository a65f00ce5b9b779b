import csv
import json
from importlib import resources

import numpy as np
import pytest
import yaml

from mirrorsink.cli import main
from mirrorsink.errors import ConfigurationError
from mirrorsink.io import (
    db_from_dict,
    db_to_dict,
    digest,
    load_db,
    load_scene,
    read_snapshots,
    save_db,
    write_snapshots,
)

DATA = resources.files("mirrorsink").joinpath("data")


def test_scene_and_db_roundtrip(tmp_path):
    db, lam = load_scene(DATA / "default_scene.yaml")
    assert lam == 0.125 and db.n_total == 12 and db.L == 4
    again = db_from_dict(db_to_dict(db))
    for (_, ra), (_, rb) in zip(db.aps, again.aps):
        for a, b in zip(ra, rb):
            assert a.source_wall == b.source_wall and a.path_index == b.path_index
            np.testing.assert_array_equal(a.array.positions, b.array.positions)
    save_db(db, tmp_path / "db.json", lam)
    loaded, lam2 = load_db(tmp_path / "db.json")
    assert lam2 == lam and db_to_dict(loaded) == db_to_dict(db)


def test_snapshot_file_roundtrip(tmp_path, rng):
    X = rng.standard_normal((4, 7)) + 1j * rng.standard_normal((4, 7))
    write_snapshots(tmp_path / "s.msnk", X, {"seed": 5})
    Y, header = read_snapshots(tmp_path / "s.msnk")
    assert Y.tobytes() == X.tobytes() and header["seed"] == 5


def test_snapshot_file_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(ConfigurationError):
        read_snapshots(tmp_path / "bad")


def test_digest_is_order_insensitive():
    assert digest({"a": 1, "b": [1, 2]}) == digest({"b": [1, 2], "a": 1})
    assert len(digest({})) == 16


@pytest.fixture
def files(tmp_path):
    db = tmp_path / "db.json"
    snaps = tmp_path / "snaps.msnk"
    assert main(["build-db", "--scene", str(DATA / "default_scene.yaml"), "--out", str(db)]) == 0
    assert main(["synth", "--db", str(db), "--config", str(DATA / "default_synth.yaml"), "--out", str(snaps)]) == 0
    return tmp_path, db, snaps


def test_synth_output(files):
    _, _, snaps = files
    data, header = read_snapshots(snaps)
    assert data.shape == (12, 128)
    assert header["seed"] == 1 and header["n_users"] == 2


def test_spectrum_command(files):
    tmp, db, snaps = files
    out = tmp / "music.csv"
    rc = main(["spectrum", "--method", "music", "--db", str(db), "--snapshots", str(snaps),
               "--spacing", "0.5", "--out", str(out), "--svg", str(tmp / "m.svg"), "--dump-eigen", str(tmp / "e.csv")])
    assert rc == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x", "y", "value", "gamma_hat"]
    assert len(rows) == 1 + 41 * 61
    assert (tmp / "m.svg").exists()
    eig = list(csv.reader((tmp / "e.csv").open()))
    assert len(eig) == 13
    mvdr = tmp / "mvdr.csv"
    assert main(["spectrum", "--method", "mvdr", "--db", str(db), "--snapshots", str(snaps),
                 "--spacing", "0.5", "--out", str(mvdr)]) == 0
    assert next(csv.reader(mvdr.open())) == ["x", "y", "value"]


def test_locate_command(files, capsys):
    tmp, db, snaps = files
    rc = main(["locate", "--method", "music", "--db", str(db), "--snapshots", str(snaps), "--spacing", "0.5"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert sorted(map(tuple, doc["estimates"])) == [(7.0, 12.0), (9.0, 13.0)]
    assert len(doc["gamma_hat"]) == 2 and doc["k"] == 2


def test_music_known_needs_gamma(files, tmp_path):
    tmp, db, _ = files
    X = np.ones((12, 3), complex)
    write_snapshots(tmp / "bare.msnk", X, {})
    rc = main(["spectrum", "--method", "music-known", "--db", str(db), "--snapshots", str(tmp / "bare.msnk"),
               "--out", str(tmp / "x.csv")])
    assert rc == 2


def test_exit_code_config_errors(tmp_path):
    assert main(["build-db", "--scene", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "db.json")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"trials": 0}))
    assert main(["sweep", "--config", str(bad), "--out-dir", str(tmp_path / "o")]) == 2


def test_exit_code_numerical_failure(files):
    tmp, db, _ = files
    write_snapshots(tmp / "zero.msnk", np.zeros((12, 20), complex), {"n_users": 2})
    rc = main(["spectrum", "--method", "mvdr", "--db", str(db), "--snapshots", str(tmp / "zero.msnk"),
               "--spacing", "1", "--out", str(tmp / "z.csv")])
    assert rc == 3


def test_sweep_command(tmp_path, capsys):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text(yaml.safe_dump({"n_antennas": [6], "gamma_db": [-15, -7], "trials": 2, "grid_spacing": 1.0}))
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "sweep.csv").open()))
    assert len(rows) == 8 and rows[0]["seed"] == "2018"
    assert (tmp_path / "out" / "sweep.svg").exists()
    meta = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert set(meta) == {"config_digest", "seed", "version"}


def test_scenario_command(tmp_path, capsys):
    cfg = tmp_path / "scn.yaml"
    cfg.write_text(yaml.safe_dump({"users": [[7, 12], [9, 13]], "ideal": True, "grid_spacing": 0.5, "n_antennas": [6]}))
    assert main(["scenario", "--config", str(cfg), "--gamma-db", "-30", "--out-dir", str(tmp_path / "s")]) == 0
    doc = json.loads((tmp_path / "s" / "scenario.json").read_text())
    assert doc["methods"]["MUSIC_EST"]["rmse_m"] == 0.0
    assert len(list((tmp_path / "s").glob("*.svg"))) == 4
