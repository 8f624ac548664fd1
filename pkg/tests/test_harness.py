import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iic.cli import main, sweep_metadata
from iic.errors import ContractViolation, FormatError
from iic.harness import (SweepConfig, SweepRecord, classify_regime, emit_csv, emit_svg,
                         gaussian_kernel, load_mnist_idx, median_heuristic, parse_svg_means, read_csv,
                         rff_transform, run_sweep, series_means, synthetic_dataset, SyntheticSpec, trend_summary)
from iic.harness.data import find_mnist


def write_idx(tmp_path, images, labels):
    img = struct.pack(">IIII", 0x803, *images.shape) + images.astype(np.uint8).tobytes()
    lab = struct.pack(">II", 0x801, labels.size) + labels.astype(np.uint8).tobytes()
    ip, lp = tmp_path / "train-images-idx3-ubyte", tmp_path / "train-labels-idx1-ubyte"
    ip.write_bytes(img)
    lp.write_bytes(lab)
    return ip, lp


class TestMNIST:
    def test_tiny_fixture(self, tmp_path):
        images = np.array([[[0, 255], [51, 102]], [[255, 0], [0, 0]]])
        ip, lp = write_idx(tmp_path, images, np.array([7, 3]))
        assert ip.stat().st_size == 16 + 8
        assert ip.stat().st_size + lp.stat().st_size == 34
        data = load_mnist_idx(ip, lp)
        assert (data.n, data.p, data.m) == (2, 4, 1)
        np.testing.assert_allclose(data.inputs[0], [0.0, 1.0, 0.2, 0.4])
        np.testing.assert_allclose(data.targets[:, 0], [0.7, 0.3])

    def test_bad_magic(self, tmp_path):
        ip, lp = write_idx(tmp_path, np.zeros((1, 2, 2)), np.array([1]))
        ip.write_bytes(b"\x00\x00\x08\x01" + ip.read_bytes()[4:])
        with pytest.raises(FormatError) as info:
            load_mnist_idx(ip, lp)
        assert info.value.offset == 0

    def test_truncated(self, tmp_path):
        ip, lp = write_idx(tmp_path, np.zeros((2, 2, 2)), np.array([1, 2]))
        ip.write_bytes(ip.read_bytes()[:-3])
        with pytest.raises(FormatError, match="expected 24 bytes.*got 21"):
            load_mnist_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, lp = write_idx(tmp_path, np.zeros((2, 2, 2)), np.array([1]))
        with pytest.raises(FormatError):
            load_mnist_idx(ip, lp)

    def test_find(self, tmp_path, monkeypatch):
        write_idx(tmp_path, np.zeros((1, 2, 2)), np.array([1]))
        assert find_mnist(tmp_path) is not None
        monkeypatch.setenv("IIC_MNIST_DIR", str(tmp_path))
        assert find_mnist() is not None
        assert find_mnist(tmp_path / "missing") is None


class TestSynthetic:
    def test_deterministic(self):
        a = synthetic_dataset(SyntheticSpec(n=30), 4)
        b = synthetic_dataset(SyntheticSpec(n=30), 4)
        c = synthetic_dataset(SyntheticSpec(n=30), 5)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)
        assert not np.array_equal(a.inputs, c.inputs)

    def test_noiseless(self):
        data = synthetic_dataset(SyntheticSpec(n=25, p=3, noise=0.0), 0)
        np.testing.assert_array_equal(data.targets[:, 0], np.sin(np.linalg.norm(data.inputs, axis=1)))


class TestRFF:
    @given(st.integers(1, 64), st.integers(0, 1000))
    def test_bounds(self, d, seed):
        x = np.random.default_rng(seed).standard_normal((7, 3))
        phi = rff_transform(x, d, 1.3, seed)
        assert phi.shape == (7, d)
        assert np.all(np.abs(phi) <= np.sqrt(2 / d) + 1e-15)

    def test_kernel_approximation(self):
        x = np.random.default_rng(2).standard_normal((10, 5))
        bw = median_heuristic(x)
        phi = rff_transform(x, 4096, bw, 0)
        assert np.max(np.abs(phi @ phi.T - gaussian_kernel(x, x, bw))) <= 0.05

    def test_deterministic_per_d(self):
        x = np.random.default_rng(3).standard_normal((4, 2))
        np.testing.assert_array_equal(rff_transform(x, 9, 1.0, 1), rff_transform(x, 9, 1.0, 1))
        assert not np.array_equal(rff_transform(x, 9, 1.0, 1), rff_transform(x, 9, 1.0, 2))

    def test_median_heuristic_matches_definition(self):
        x = np.random.default_rng(4).standard_normal((30, 2))
        diff = x[:, None] - x[None]
        dist = np.sqrt((diff**2).sum(-1))[np.triu_indices(30, 1)]
        assert median_heuristic(x) == pytest.approx(np.median(dist))
        assert rff_transform(x, 5, "median-heuristic", 0).shape == (30, 5)

    def test_rejects(self):
        with pytest.raises(ContractViolation):
            rff_transform(np.ones((2, 2)), 0, 1.0, 0)
        with pytest.raises(ContractViolation):
            rff_transform(np.ones((2, 2)), 3, -1.0, 0)


def small_config(**kw):
    base = dict(n_train=20, n_test=30, d_grid=[5, 20, 100], repeats=2, seed=3,
                data_source={"kind": "synthetic", "p": 4})
    base.update(kw)
    return SweepConfig.from_dict(base)


@pytest.fixture(scope="module")
def small_records():
    return run_sweep(small_config())


class TestSweep:
    def test_regimes(self, small_records):
        assert len(small_records) == 6
        assert [r.regime for r in small_records] == ["under"] * 2 + ["critical"] * 2 + ["over"] * 2

    def test_presence_invariants(self, small_records):
        for r in small_records:
            assert (r.iic is not None) == (r.regime == "over")
            assert (r.bic is not None) == (r.regime == "under")
            assert r.bic_ridge is not None and r.error is None

    def test_over_interpolates(self, small_records):
        assert all(r.train_mse <= 1e-8 for r in small_records if r.regime == "over")

    def test_thread_independence(self, small_records):
        assert run_sweep(small_config(), threads=3) == small_records

    def test_classify(self):
        assert [classify_regime(d, 100) for d in (79, 80, 120, 121)] == ["under", "critical", "critical", "over"]

    def test_series_means(self):
        recs = [SweepRecord(1, 0, "under", 0.0, 1.0, bic=2.0), SweepRecord(1, 1, "under", 0.0, 3.0, bic=4.0),
                SweepRecord(9, 0, "over", 0.0, 5.0, iic=1.0)]
        assert series_means(recs, "test_mse") == {1: 2.0, 9: 5.0}
        assert series_means(recs, "bic") == {1: 3.0}


class TestConfig:
    def test_unknown_keys(self):
        with pytest.raises(ContractViolation, match="unknown config keys"):
            SweepConfig.from_dict({"n_trian": 3})
        with pytest.raises(ContractViolation, match="data_source"):
            SweepConfig.from_dict({"data_source": {"kind": "synthetic", "size": 3}})

    def test_invariants(self):
        with pytest.raises(ContractViolation):
            SweepConfig(d_grid=(5, 3))
        with pytest.raises(ContractViolation):
            SweepConfig(repeats=0)
        with pytest.raises(ContractViolation):
            SweepConfig.from_dict({"data_source": {"kind": "imagenet"}})

    def test_round_trip(self, tmp_path):
        cfg = small_config(ridge_lambda=0.5)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert SweepConfig.from_json(path) == cfg

    def test_shipped_default(self):
        from pathlib import Path
        cfg = SweepConfig.from_json(Path(__file__).parents[1] / "scripts/configs/default_sweep.json")
        assert cfg.n_train == 200 and cfg.repeats == 10 and cfg.d_grid[0] == 20


class TestCSV:
    def test_empty(self, tmp_path):
        path = emit_csv([], tmp_path / "e.csv")
        assert path.read_bytes() == b"d,repeat,regime,train_mse,test_mse,iic,bic,bic_ridge\n"

    def test_one_record(self, tmp_path):
        rec = SweepRecord(3, 0, "under", 0.1, 0.2, bic=-1.5, bic_ridge=0.25)
        lines = emit_csv([rec], tmp_path / "o.csv").read_bytes().split(b"\n")
        assert lines[-1] == b"" and len(lines) == 3
        assert lines[1] == b"3,0,under,0.10000000000000001,0.20000000000000001,,-1.5,0.25"

    def test_round_trip(self, tmp_path, small_records):
        meta = sweep_metadata(small_config())
        records, got_meta = read_csv(emit_csv(small_records, tmp_path / "r.csv", meta))
        assert records == small_records
        assert got_meta["target"].startswith("sin(|x|)") and got_meta["seed"] == "3"

    def test_io_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            emit_csv([], tmp_path / "missing" / "x.csv")


class TestSVG:
    def test_well_formed_and_means(self, tmp_path, small_records):
        text = emit_svg(small_records, tmp_path / "s.svg", band=(16, 24)).read_text()
        assert text.startswith('<?xml version="1.0"')
        assert text.count("<svg ") == 1
        means = parse_svg_means(text)
        records, _ = read_csv(emit_csv(small_records, tmp_path / "r.csv"))
        for s in ("test_mse", "iic", "bic", "bic_ridge"):
            ref = series_means(records, s)
            assert means[s].keys() == ref.keys()
            for d in ref:
                assert means[s][d] == ref[d]
        assert 'class="critical-band"' in text

    def test_deterministic(self, tmp_path, small_records):
        a = emit_svg(small_records, tmp_path / "a.svg").read_bytes()
        b = emit_svg(small_records, tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_series_subset(self, tmp_path, small_records):
        means = parse_svg_means(emit_svg(small_records, tmp_path / "s.svg", series=["iic"]).read_text())
        assert set(means) == {"iic"}
        with pytest.raises(ContractViolation):
            emit_svg(small_records, tmp_path / "s.svg", series=["loss"])


def parse_report(out):
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line and not line.startswith("#"))


class TestCLI:
    def test_demo_linear(self, capsys):
        assert main(["demo-linear"]) == 0
        vals = parse_report(capsys.readouterr().out)
        assert float(vals["iic_linear"]) - float(vals["iic"]) == pytest.approx(np.log(2), abs=1e-10)
        assert "term_sharpness" in vals

    def test_verify_radial(self, capsys):
        assert main(["verify", "radial"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 12 and "FAIL" not in out

    def test_compute(self, tmp_path, capsys):
        X = np.array([[1.0, 1.0]])
        np.savetxt(tmp_path / "X.csv", X, delimiter=",")
        np.savetxt(tmp_path / "y.csv", [2.0], delimiter=",")
        assert main(["compute", "--design", str(tmp_path / "X.csv"), "--targets", str(tmp_path / "y.csv")]) == 0
        vals = parse_report(capsys.readouterr().out)
        assert float(vals["iic"]) == pytest.approx(np.log(2), abs=1e-14)
        assert "bic_ridge" in vals and "bic" not in vals

    def test_compute_underparameterised(self, tmp_path, capsys):
        np.savetxt(tmp_path / "X.csv", [[1.0], [1.0]], delimiter=",")
        np.savetxt(tmp_path / "y.csv", [0.0, 2.0], delimiter=",")
        assert main(["compute", "--design", str(tmp_path / "X.csv"), "--targets", str(tmp_path / "y.csv")]) == 0
        vals = parse_report(capsys.readouterr().out)
        assert float(vals["bic"]) == pytest.approx(0.5 * np.log(2), abs=1e-14)
        assert "iic" not in vals

    def test_compute_error_exit(self, tmp_path, capsys):
        np.savetxt(tmp_path / "X.csv", [[1.0, 1.0]], delimiter=",")
        np.savetxt(tmp_path / "y.csv", [0.0], delimiter=",")
        assert main(["compute", "--design", str(tmp_path / "X.csv"), "--targets", str(tmp_path / "y.csv")]) == 1
        assert "PriorDegenerate" in capsys.readouterr().err

    def test_sweep(self, tmp_path, small_records):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(small_config().to_dict()))
        csv, svg = tmp_path / "out.csv", tmp_path / "out.svg"
        assert main(["sweep", "--config", str(cfg), "--out-csv", str(csv), "--out-svg", str(svg),
                     "--threads", "2"]) == 0
        records, meta = read_csv(csv)
        assert records == small_records
        assert meta["critical_band"] == "0.8,1.2"
        assert "data-lo=\"16\"" in svg.read_text()

    def test_sweep_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"bogus": 1}')
        assert main(["sweep", "--config", str(cfg)]) == 1


def test_trend_summary_on_handmade_curve():
    mse = {10: 1.0, 20: 2.0, 40: 9.0, 80: 3.0, 160: 2.0}
    recs = []
    for d, v in mse.items():
        regime = classify_regime(d, 40)
        recs.append(SweepRecord(d, 0, regime, 0.0, v, iic=-d if regime == "over" else None,
                                bic=float(d) if regime == "under" else None, bic_ridge=0.0))
    t = trend_summary(recs, 40)
    assert t.bic_increasing and t.peak_d == 40 and t.peak_in_band and t.right_limb_descends
    assert t.iic_spearman == pytest.approx(-1.0) and t.mse_spearman == pytest.approx(-1.0)
    assert t.holds
