import numpy as np
import pytest

from lcirsp.features import build_ir_dataset, build_sp_dataset
from lcirsp.models import Model, ModelSpec
from lcirsp.nn_core import TcnConfig
from lcirsp.storage import (
    FormatError,
    export_dataset_csv,
    load_checkpoint,
    load_dataset,
    load_ir_dataset,
    load_sp_dataset,
    save_checkpoint,
    save_dataset,
    save_ir_dataset,
    save_sp_dataset,
)
from lcirsp.trajectory_io import clean_trajectories

RNG = np.random.default_rng(61)


class TestDatasetContainer:
    def test_roundtrip_arrays_and_meta(self, tmp_path):
        path = tmp_path / "d.bin"
        arrays = {"a": RNG.random((3, 4)).astype(np.float32),
                  "b": RNG.random(7).astype(np.float32)}
        save_dataset(path, arrays, {"kind": "test", "seed": 5})
        loaded, header = load_dataset(path)
        assert header["kind"] == "test" and header["seed"] == 5
        assert header["dtype"] == "<f4"
        for k in arrays:
            np.testing.assert_allclose(loaded[k], arrays[k], atol=1e-7)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + b"\0" * 16)
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "d.bin"
        save_dataset(path, {"a": np.ones((4, 4), dtype=np.float32)}, {})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_export_csv(self, tmp_path):
        path = tmp_path / "d.bin"
        save_dataset(path, {"a": np.array([[1.0, 2.0]], dtype=np.float32)}, {})
        arrays, _ = load_dataset(path)
        csv_path = tmp_path / "d.csv"
        export_dataset_csv(csv_path, arrays)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "array,flat_index,value"
        assert len(lines) == 3


class TestIrSpContainers:
    def test_ir_roundtrip(self, tmp_path, small_noiseless_corpus):
        cfg, trajs, geo, _ = small_noiseless_corpus
        cleaned, _ = clean_trajectories(trajs)
        ds = build_ir_dataset(cleaned, geo, length=150, stride=25, seed=3,
                              vehicle_width=cfg.vehicle_width)
        path = tmp_path / "ir.bin"
        save_ir_dataset(path, ds)
        loaded = load_ir_dataset(path)
        np.testing.assert_allclose(loaded.train_x, ds.train_x, atol=1e-7)
        np.testing.assert_array_equal(loaded.train_y, ds.train_y)
        np.testing.assert_allclose(loaded.scaler.minima, ds.scaler.minima)
        assert loaded.label_map == ds.label_map
        assert loaded.seed == ds.seed

    def test_sp_roundtrip(self, tmp_path, small_noiseless_corpus):
        cfg, trajs, geo, _ = small_noiseless_corpus
        cleaned, _ = clean_trajectories(trajs)
        ds = build_sp_dataset(cleaned, geo, length=150, stride=25, seed=3,
                              vehicle_width=cfg.vehicle_width)
        path = tmp_path / "sp.bin"
        save_sp_dataset(path, ds)
        loaded = load_sp_dataset(path)
        np.testing.assert_allclose(loaded.train_t, ds.train_t, atol=1e-7)
        np.testing.assert_allclose(loaded.target_scaler.maxima, ds.target_scaler.maxima)
        assert loaded.n_bins == 2

    def test_kind_mismatch(self, tmp_path, small_noiseless_corpus):
        cfg, trajs, geo, _ = small_noiseless_corpus
        cleaned, _ = clean_trajectories(trajs)
        ds = build_ir_dataset(cleaned, geo, length=150, stride=40, seed=0,
                              vehicle_width=cfg.vehicle_width)
        path = tmp_path / "ir.bin"
        save_ir_dataset(path, ds)
        with pytest.raises(FormatError):
            load_sp_dataset(path)


class TestCheckpoints:
    def _spec(self, **kw):
        base = dict(kind="tcn_lstm", head="classifier", window_length=16,
                    input_dim=5, lstm_units=6, tower_hidden=8,
                    tcn=TcnConfig(n_filters=8, dropout=0.0), seed=3)
        base.update(kw)
        return ModelSpec(**base)

    def test_roundtrip_identical_outputs(self, tmp_path):
        model = Model(self._spec())
        # give running stats non-default values so buffer persistence is tested
        x = RNG.random((6, 16, 5))
        model(x, training=True, rng=np.random.default_rng(0))
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert loaded.spec == model.spec
        np.testing.assert_array_equal(loaded(x).data, model(x).data)

    def test_regressor_roundtrip(self, tmp_path):
        model = Model(self._spec(head="regressor", tasks=("vx", "ay"), mtl=True))
        path = tmp_path / "r.ckpt"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        x = RNG.random((2, 16, 5))
        a, b = model(x), loaded(x)
        for task in ("vx", "ay"):
            np.testing.assert_array_equal(a[task].data, b[task].data)

    def test_checkpoint_bytes_deterministic(self, tmp_path):
        m1 = Model(self._spec())
        m2 = Model(self._spec())
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, m1)
        save_checkpoint(p2, m2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"XXXX" + b"\0" * 12)
        with pytest.raises(FormatError):
            load_checkpoint(path)
