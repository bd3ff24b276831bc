import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from elosslab.rigidity import RigidityError
from elosslab.spin import SpinError, true_energy
from elosslab.tasks.bench import BENCH_HEADER, benchmark_losses, scaling_exponent
from elosslab.tasks.config import ConfigError, TrainConfig
from elosslab.tasks.io import (FormatError, format_cell, parse_key_values, read_arrays, read_csv,
                               read_config, write_arrays, write_config, write_csv)
from elosslab.tasks.manifest import RunManifest
from elosslab.tasks.shapes import (ShapeConfigError, batch_shape_quality, gen_shape_dataset,
                                   polygon, shape_quality, train_shape)
from elosslab.tasks.spins import gen_spin_dataset, train_spin, worker_count
from elosslab.tasks.svg import line_plot

from oracles import quality_by_hand

seeds = st.integers(0, 2**32 - 1)


# -- formats ---------------------------------------------------------------

def test_array_bundle_round_trip(tmp_path):
    arrays = {"a": np.arange(6.0).reshape(2, 3), "scalar": np.array(2.5), "empty": np.zeros((0, 4)),
              "tricky": np.array([np.pi, -0.0, 1e-310, 1e300])}
    write_arrays(tmp_path / "x.bin", 2**64 - 1, arrays)
    seed, back = read_arrays(tmp_path / "x.bin")
    assert seed == 2**64 - 1 and list(back) == list(arrays)
    for k in arrays:
        assert back[k].shape == arrays[k].shape
        assert back[k].tobytes() == np.asarray(arrays[k], "<f8").tobytes()


def test_array_bundle_rejects_corruption(tmp_path):
    path = tmp_path / "x.bin"
    write_arrays(path, 1, {"a": np.ones(4)})
    raw = path.read_bytes()
    for bad in (b"NOTMAGIC" + raw[8:], raw[:-3], raw + b"\x00"):
        path.write_bytes(bad)
        with pytest.raises(FormatError):
            read_arrays(path)


def test_key_value_config(tmp_path):
    text = "# comment\nlr = 0.001  # trailing\n\nseed=7\n"
    assert parse_key_values(text) == {"lr": "0.001", "seed": "7"}
    with pytest.raises(FormatError):
        parse_key_values("just words")
    write_config(tmp_path / "c.txt", {"a": "1", "b": "x y"})
    assert read_config(tmp_path / "c.txt") == {"a": "1", "b": "x y"}


def test_csv_round_trip_is_exact(tmp_path):
    rows = [{"x": 0.1 + 0.2, "name": "a,b", "k": 3}, {"x": float("nan"), "name": "q\"", "k": 0}]
    write_csv(tmp_path / "m.csv", ["x", "name", "k"], rows)
    raw = (tmp_path / "m.csv").read_bytes()
    assert raw.startswith(b"x,name,k\r\n")
    header, back = read_csv(tmp_path / "m.csv")
    assert header == ["x", "name", "k"]
    assert float(back[0]["x"]) == 0.1 + 0.2 and back[0]["name"] == "a,b" and back[1]["name"] == 'q"'
    assert format_cell(np.float64(1 / 3)) == repr(1 / 3)


def test_manifest_round_trip(tmp_path):
    m = RunManifest("shapes-train", 12, {"lr": "0.001"}, "0.1.0", 1.5, {"quality": 7.25})
    m.save(tmp_path)
    back = RunManifest.load(tmp_path / "manifest.txt")
    assert (back.command, back.seed, back.config, back.version) == ("shapes-train", 12, {"lr": "0.001"}, "0.1.0")
    assert float(back.metrics["quality"]) == 7.25


def test_train_config_parsing():
    cfg = TrainConfig.from_mapping({"seed": "3", "lr": "0.01"}, task="shapes")
    assert cfg.loss == "energy" and cfg.lr == 0.01 and cfg.hidden_dim == 64
    assert TrainConfig.from_mapping(cfg.to_mapping()) == cfg
    spins = TrainConfig.from_mapping({"seed": "1"}, task="spins")
    assert (spins.loss, spins.hidden_dim, spins.T, spins.h0) == ("local-energy", 256, 0.1, 4.01)
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"lr": "0.01"}, task="shapes")
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"seed": "1", "loss": "margin"}, task="shapes")
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"seed": "1", "colour": "red"}, task="shapes")
    with pytest.raises(ConfigError):
        TrainConfig.from_mapping({"seed": "1", "L": "6"}, task="spins")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("ELOSSLAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("ELOSSLAB_THREADS", "lots")
    with pytest.raises(ValueError):
        worker_count()


def test_svg_plot(tmp_path):
    line_plot({"a": ([0, 1, 2], [1.0, 3.0, 2.0]), "b": ([0, 2], [0.0, 1.0])}, tmp_path / "p.svg",
              title="t", xlabel="x", ylabel="y")
    text = (tmp_path / "p.svg").read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert text.count("<polyline") == 2


# -- shapes ----------------------------------------------------------------

def test_shape_dataset_examples():
    assert np.all(gen_shape_dataset(5, 0.0, 50, seed=0).rotation == 0.0)
    with pytest.raises(ShapeConfigError):
        gen_shape_dataset(2, 0.0, 5, seed=0)
    with pytest.raises(ShapeConfigError):
        gen_shape_dataset(5, 4.0, 5, seed=0)
    a, b = gen_shape_dataset(6, 1.0, 20, seed=4), gen_shape_dataset(6, 1.0, 20, seed=4)
    assert np.array_equal(a.target, b.target)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(3, 9), st.floats(0.0, math.pi))
def test_shape_targets_are_regular_polygons(seed, n, theta):
    data = gen_shape_dataset(n, theta, 50, seed)
    assert np.all((data.radius >= 0.3) & (data.radius <= 5.0))
    assert np.all(np.abs(data.rotation) <= theta)
    centred = data.target - data.target.mean(axis=1, keepdims=True)
    radii = np.hypot(centred[..., 0], centred[..., 1])
    assert np.max(np.abs(radii - data.radius[:, None])) <= 1e-9
    ang = np.arctan2(centred[..., 1], centred[..., 0])
    gaps = np.mod(np.diff(ang, axis=1, append=ang[:, :1]), 2 * np.pi)
    assert np.max(np.abs(gaps - 2 * np.pi / n)) <= 1e-9


def test_shape_radius_distribution_ks():
    radius = gen_shape_dataset(5, math.pi, 100_000, seed=11).radius
    assert stats.kstest(radius, stats.uniform(0.3, 4.7).cdf).statistic < 0.02


def test_quality_examples():
    penta = polygon(5, 2.0, 0.3)
    assert shape_quality(penta) == pytest.approx(-math.log(1e-12), abs=1e-9)
    assert shape_quality(penta) == pytest.approx(27.631, abs=1e-3)
    bumped = penta.copy()
    bumped[2] *= 1.1
    assert shape_quality(bumped) == pytest.approx(quality_by_hand(bumped), abs=1e-9)
    rot = np.array([[math.cos(1.1), -math.sin(1.1)], [math.sin(1.1), math.cos(1.1)]])
    assert shape_quality(bumped @ rot.T) == pytest.approx(shape_quality(bumped), abs=1e-9)
    degenerate = batch_shape_quality(np.ones((1, 5, 2)))
    assert degenerate.degenerate[0] and degenerate.quality[0] == 0.0
    with pytest.raises(ShapeConfigError):
        shape_quality(np.ones((2, 2)))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(3, 8))
def test_quality_matches_loop_oracle_and_is_order_free(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 2))
    q = shape_quality(pts)
    assert q == pytest.approx(quality_by_hand(pts), abs=1e-9)
    assert shape_quality(pts[rng.permutation(n)]) == pytest.approx(q, abs=1e-12)


def test_shape_training_is_deterministic():
    cfg = TrainConfig.from_mapping({"seed": "5", "epochs": "2", "n_train": "256", "n_test": "64"},
                                   task="shapes")
    a, b = train_shape(cfg), train_shape(cfg)
    assert a.rows == b.rows
    assert [r["epoch"] for r in a.rows if r["split"] == "test"] == [1, 2]


@pytest.mark.parametrize("loss", ["mse", "energy", "kabsch", "sparse-energy"])
def test_unrotated_shapes_are_easy_for_every_loss(loss):
    cfg = TrainConfig.from_mapping({"seed": "0", "loss": loss, "theta_aug": "0.0"}, task="shapes")
    res = train_shape(cfg)
    final = [r for r in res.rows if r["split"] == "test"][-1]
    assert final["mean_quality"] >= 5


# -- spins -----------------------------------------------------------------

def test_spin_dataset_consistency_and_stability():
    data = gen_spin_dataset(3, 40, seed=2, workers=2)
    for i in range(len(data)):
        H = data.hamiltonian(i)
        s = data.ground[i]
        assert abs(true_energy(H, s) - data.energy[i]) <= 1e-12
        for r in range(3):
            for c in range(3):
                flipped = s.copy()
                flipped[r, c] *= -1
                assert true_energy(H, flipped) >= data.energy[i] - 1e-12
    with pytest.raises(SpinError):
        gen_spin_dataset(6, 1, seed=0)


def test_spin_dataset_bytes_do_not_depend_on_workers(tmp_path):
    one = gen_spin_dataset(3, 25, seed=8, workers=1)
    four = gen_spin_dataset(3, 25, seed=8, workers=4)
    write_arrays(tmp_path / "a.bin", 8, one.to_arrays())
    write_arrays(tmp_path / "b.bin", 8, four.to_arrays())
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_spin_training_metric_bounded_by_ground_energy():
    cfg = TrainConfig.from_mapping({"seed": "1", "loss": "cross-entropy", "epochs": "3",
                                    "n_train": "128", "n_test": "64", "L": "3", "hidden_dim": "32",
                                    "batch_size": "32"}, task="spins")
    a, b = train_spin(cfg, workers=1), train_spin(cfg, workers=1)
    assert a.rows == b.rows
    for row in a.rows:
        assert row["mean_pred_energy"] >= row["mean_ground_energy"] - 1e-12
        assert 0.5 <= row["accuracy_per_site"] <= 1.0


# -- bench -----------------------------------------------------------------

def test_benchmark_rows_and_guard():
    rows = benchmark_losses(sizes=(50, 200), repeats=1)
    assert len(rows) == 8 and all(set(r) == set(BENCH_HEADER) for r in rows)
    assert all(r["repeats"] == 1 and r["status"] == "ok" for r in rows)
    assert np.isfinite(scaling_exponent(rows))
    guarded = benchmark_losses(sizes=(30_000,), repeats=1, losses=("energy",))
    assert guarded[0]["status"] == "memory-guard" and math.isnan(guarded[0]["median_seconds"])
    with pytest.raises(ValueError):
        scaling_exponent(guarded, "energy")
