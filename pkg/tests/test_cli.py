import csv
import json
from pathlib import Path

import numpy as np
import pytest

import planargibbs as pg
from planargibbs.cli import main

MODELS = Path(__file__).resolve().parent.parent / "models"
WR = str(MODELS / "widom_rowlinson.json")
WR_WIDE = str(MODELS / "widom_rowlinson_wide.json")


def run(*argv):
    return main(list(argv))


def test_sample_zero_sweeps(tmp_path):
    out = tmp_path / "run"
    code = run("sample", "--model", WR, "--seed", "1", "--out", str(out),
               "--window", "3", "--sweeps", "0", "--burn-in", "0")
    assert code == 0
    assert (out / "samples.jsonl").read_text() == ""
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1
    assert manifest["n_samples"] == 0


def test_sample_deterministic_and_nonempty(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("sample", "--model", WR, "--seed", "7", "--out", str(out),
                   "--window", "3", "--sweeps", "4000", "--burn-in", "500",
                   "--thinning", "100") == 0
    assert (a / "samples.jsonl").read_bytes() == (b / "samples.jsonl").read_bytes()
    lines = (a / "samples.jsonl").read_text().strip().splitlines()
    assert len(lines) == 40
    counts = [len(json.loads(line)["interior"]) for line in lines]
    assert max(counts) > 0


def test_missing_model_is_usage_error(tmp_path):
    assert run("sample", "--model", str(tmp_path / "nope.json"), "--seed", "0",
               "--out", str(tmp_path / "x")) == 2


def test_bad_model_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1, "name": "x"}')
    assert run("sample", "--model", str(bad), "--seed", "0",
               "--out", str(tmp_path / "x")) == 2
    worse = tmp_path / "worse.json"
    worse.write_text("{not json")
    assert run("sample", "--model", str(worse), "--seed", "0",
               "--out", str(tmp_path / "y")) == 2


def _write_config(path, positions, spins, window_r=20.0):
    cfg = pg.Configuration(pg.Window(window_r), positions, spins)
    path.write_text(json.dumps(cfg.to_json()))
    return cfg


def test_transform_identity_outside(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    _write_config(cfgfile, [[17.0, 0.0], [18.0, -2.0]], [0, 1])
    out = tmp_path / "tr"
    assert run("transform", "--model", WR, "--seed", "2", "--out", str(out),
               "--config", str(cfgfile), "--direction", "fwd",
               "--taper", "0.5,4,16,1,0.25") == 0
    with open(out / "taper_profile.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["translation"]) == 0.0 for r in rows)


def test_transform_inner_only_and_round_trip(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    _write_config(cfgfile, [[0.5, 0.5], [-1.0, 2.0]], [0, 1])
    out = tmp_path / "tr"
    assert run("transform", "--model", WR, "--seed", "2", "--out", str(out),
               "--config", str(cfgfile), "--direction", "fwd",
               "--taper", "0.5,4,16,1,0.25", "--round-trip") == 0
    with open(out / "taper_profile.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["translation"]) == 0.5 for r in rows)
    payload = json.loads((out / "transform.json").read_text())
    assert payload["round_trip_max_error"] < 1e-9


def test_transform_bond_hash_mismatch(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfg = _write_config(cfgfile, [[0.5, 0.5], [-1.0, 2.0]], [0, 1])
    bonds = pg.BondSet([(0, 1)], 2, scope_n=16)
    other = pg.Configuration(pg.Window(20.0), [[0.5, 0.5], [-1.0, 2.5]], [0, 1])
    bondfile = tmp_path / "bonds.json"
    bondfile.write_text(json.dumps(bonds.to_json(other)))
    code = run("transform", "--model", WR, "--seed", "2",
               "--out", str(tmp_path / "tr"), "--config", str(cfgfile),
               "--bonds", str(bondfile), "--taper", "0.5,4,16,1,0.25")
    assert code == 2


def test_verify_unknown_suite(tmp_path):
    assert run("verify", "--model", WR, "--seed", "0",
               "--out", str(tmp_path / "v"), "--suite", "bogus") == 2


def test_verify_symmetry_suite(tmp_path):
    out = tmp_path / "v"
    assert run("verify", "--model", WR, "--seed", "3", "--out", str(out),
               "--suite", "symmetry-criterion") == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["passed"] is True


def test_verify_density_negative_control_exits_nonzero(tmp_path):
    out = tmp_path / "v"
    code = run("verify", "--model", WR_WIDE, "--seed", "4", "--out", str(out),
               "--suite", "density", "--samples", "6000",
               "--taper", "0.5,1,3,1,0.25", "--negative-control")
    assert code == 1
    report = json.loads((out / "verify_report.json").read_text())
    assert report["passed"] is False


def test_stats_outputs(tmp_path):
    srun = tmp_path / "run"
    assert run("sample", "--model", WR, "--seed", "5", "--out", str(srun),
               "--window", "4", "--sweeps", "30000", "--burn-in", "3000",
               "--thinning", "300") == 0
    s1, s2 = tmp_path / "s1", tmp_path / "s2"
    for out in (s1, s2):
        assert run("stats", "--model", WR, "--seed", "5", "--out", str(out),
                   "--samples-file", str(srun / "samples.jsonl")) == 0
    for name in ("count_histogram.csv", "spin_fractions.csv",
                 "pair_distances.csv", "correlation.csv"):
        assert (s1 / name).read_bytes() == (s2 / name).read_bytes()
    # unlike pairs keep out of the exclusion disc
    with open(s1 / "pair_distances.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        if float(r["bin_right"]) <= 1.0:
            assert int(r["unlike_pairs"]) == 0
    # empty samples file is a usage error
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert run("stats", "--model", WR, "--seed", "5",
               "--out", str(tmp_path / "s3"),
               "--samples-file", str(empty)) == 2
