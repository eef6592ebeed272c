"""On-disk formats: dataset containers, model checkpoints, history CSVs.

Dataset container: magic ``LCDS``, uint64-LE JSON header length, UTF-8 JSON
header (array manifest, channel order, scaler, seed, label map), then the
arrays' raw little-endian float32 payloads in manifest order.

Checkpoint: magic ``LCKP``, uint64-LE JSON header length, UTF-8 JSON header
(model spec, tensor manifest, seed), then per tensor a uint64-LE byte length
followed by raw little-endian float64 data.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import LcirspError
from .features import CHANNEL_NAMES, IrDataset, SpDataset
from .kinematics import INDICATOR_NAMES, NormalizationScaler
from .models import Model, ModelSpec

_DS_MAGIC = b"LCDS"
_CK_MAGIC = b"LCKP"


class FormatError(LcirspError):
    pass


def _write_blob(fh, magic, header: dict):
    # insertion order is deterministic and meaningful (scaler channel order);
    # never sort keys here
    payload = json.dumps(header).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<Q", len(payload)))
    fh.write(payload)


def _read_blob(fh, magic):
    got = fh.read(4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (n,) = struct.unpack("<Q", fh.read(8))
    return json.loads(fh.read(n).decode("utf-8"))


def save_dataset(path, arrays: dict, meta: dict):
    """arrays: name -> ndarray (stored as <f4); meta merged into the header."""
    manifest = [
        {"name": name, "shape": list(np.asarray(a).shape)} for name, a in arrays.items()
    ]
    header = dict(meta)
    header["arrays"] = manifest
    header["dtype"] = "<f4"
    with open(path, "wb") as fh:
        _write_blob(fh, _DS_MAGIC, header)
        for name, a in arrays.items():
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_dataset(path):
    """Returns (arrays dict float64, header dict)."""
    with open(path, "rb") as fh:
        header = _read_blob(fh, _DS_MAGIC)
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise FormatError(f"truncated payload for array {entry['name']}")
            arrays[entry["name"]] = (
                np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
            )
    return arrays, header


def _scaler_meta(scaler: NormalizationScaler):
    return scaler.to_json()


def _scaler_from_meta(doc):
    return NormalizationScaler.from_json(doc)


def save_ir_dataset(path, ds: IrDataset):
    save_dataset(
        path,
        {
            "train_x": ds.train_x, "train_y": ds.train_y,
            "test_x": ds.test_x, "test_y": ds.test_y,
        },
        {
            "kind": "ir",
            "channel_order": list(CHANNEL_NAMES),
            "scaler": _scaler_meta(ds.scaler),
            "seed": ds.seed,
            "label_map": list(ds.label_map),
        },
    )


def load_ir_dataset(path) -> IrDataset:
    arrays, header = load_dataset(path)
    if header.get("kind") != "ir":
        raise FormatError(f"{path} is not an IR dataset")
    return IrDataset(
        train_x=arrays["train_x"],
        train_y=arrays["train_y"].astype(np.int64),
        test_x=arrays["test_x"],
        test_y=arrays["test_y"].astype(np.int64),
        scaler=_scaler_from_meta(header["scaler"]),
        train_records=[],
        test_records=[],
        label_map=tuple(header["label_map"]),
        seed=header["seed"],
    )


def save_sp_dataset(path, ds: SpDataset):
    save_dataset(
        path,
        {
            "train_x": ds.train_x, "train_t": ds.train_t,
            "test_x": ds.test_x, "test_t": ds.test_t,
        },
        {
            "kind": "sp",
            "channel_order": list(CHANNEL_NAMES),
            "target_order": list(INDICATOR_NAMES),
            "scaler": _scaler_meta(ds.scaler),
            "target_scaler": _scaler_meta(ds.target_scaler),
            "seed": ds.seed,
            "n_bins": ds.n_bins,
        },
    )


def load_sp_dataset(path) -> SpDataset:
    arrays, header = load_dataset(path)
    if header.get("kind") != "sp":
        raise FormatError(f"{path} is not an SP dataset")
    return SpDataset(
        train_x=arrays["train_x"],
        train_t=arrays["train_t"],
        test_x=arrays["test_x"],
        test_t=arrays["test_t"],
        scaler=_scaler_from_meta(header["scaler"]),
        target_scaler=_scaler_from_meta(header["target_scaler"]),
        train_records=[],
        test_records=[],
        n_bins=header["n_bins"],
        seed=header["seed"],
    )


def export_dataset_csv(path, arrays: dict):
    """Flat CSV (array, index, value) for manual inspection of a container."""
    with open(path, "w") as fh:
        fh.write("array,flat_index,value\n")
        for name, a in arrays.items():
            flat = np.asarray(a, dtype=np.float64).ravel()
            for i, v in enumerate(flat):
                fh.write(f"{name},{i},{v!r}\n")


def save_checkpoint(path, model: Model):
    state = model.state_arrays()
    header = {
        "spec": model.spec.to_json(),
        "seed": model.spec.seed,
        "tensors": [
            {"name": name, "shape": list(a.shape)} for name, a in state.items()
        ],
    }
    with open(path, "wb") as fh:
        _write_blob(fh, _CK_MAGIC, header)
        for name, a in state.items():
            raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        header = _read_blob(fh, _CK_MAGIC)
        state = {}
        for entry in header["tensors"]:
            (nbytes,) = struct.unpack("<Q", fh.read(8))
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise FormatError(f"truncated tensor {entry['name']}")
            state[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(
                tuple(entry["shape"])
            ).copy()
    spec = ModelSpec.from_json(header["spec"])
    model = Model(spec)
    own = model.state_arrays()
    if set(own) != set(state):
        missing = set(own) ^ set(state)
        raise FormatError(f"checkpoint/model tensor mismatch: {sorted(missing)[:4]}")
    for name, a in own.items():
        a[...] = state[name]
    return model
