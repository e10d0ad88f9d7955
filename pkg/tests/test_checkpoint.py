from __future__ import annotations

import numpy as np
import pytest

from countpoint.checkpoint import CheckpointError, load_arrays, load_checkpoint, save_arrays, save_checkpoint
from countpoint.net import init_for_geometry
from countpoint.optim import Adam
from countpoint.scene import REDUCED_GEOMETRY


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_round_trip_is_bit_exact(tmp_path, dtype):
    params = init_for_geometry(np.random.default_rng(0), REDUCED_GEOMETRY, dtype=dtype, conv_activation="relu")
    save_checkpoint(tmp_path / "a.ckpt", params, {"seed": 3, "phase": "study3"})
    back, meta, extra = load_checkpoint(tmp_path / "a.ckpt")
    assert back.equals(params) and back.dtype == params.dtype
    assert back.conv_activation == "relu"
    assert meta["seed"] == "3" and meta["phase"] == "study3"
    assert extra == {}


def test_manifest_is_readable_text(tmp_path):
    params = init_for_geometry(np.random.default_rng(1), REDUCED_GEOMETRY)
    save_checkpoint(tmp_path / "a.ckpt", params)
    raw = (tmp_path / "a.ckpt").read_bytes()
    head = raw[: raw.index(b"\nend\n")].decode()
    lines = head.splitlines()
    assert lines[0] == "COUNTPOINT-CHECKPOINT 1"
    arrays = [l.split() for l in lines if l.startswith("array ")]
    assert [a[1] for a in arrays][:3] == ["conv_w", "conv_b", "w3"]
    assert arrays[0][2:4] == ["f4", "7,3,3"]
    body = len(raw) - (len(head) + len("\nend\n"))
    assert body == sum(int(a[5]) for a in arrays)
    # little-endian float32 payload
    off = int(arrays[0][4])
    first = np.frombuffer(raw[len(head) + 5 + off: len(head) + 5 + off + 4], dtype="<f4")[0]
    assert first == params.conv_w.flat[0]


def test_extra_arrays_round_trip(tmp_path):
    params = init_for_geometry(np.random.default_rng(2), REDUCED_GEOMETRY)
    opt = Adam()
    opt.m = {"w3": np.ones((2, 2), np.float32)}
    opt.v = {"w3": np.full((2, 2), 2.0, np.float32)}
    opt.t = 7
    save_checkpoint(tmp_path / "a.ckpt", params, extra=opt.state())
    _, _, extra = load_checkpoint(tmp_path / "a.ckpt")
    again = Adam()
    again.load_state(extra)
    assert again.t == 7 and np.array_equal(again.v["w3"], opt.v["w3"])


def test_truncated_file_rejected(tmp_path):
    params = init_for_geometry(np.random.default_rng(3), REDUCED_GEOMETRY)
    save_checkpoint(tmp_path / "a.ckpt", params)
    raw = (tmp_path / "a.ckpt").read_bytes()
    (tmp_path / "b.ckpt").write_bytes(raw[:-10])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "b.ckpt")


def test_wrong_magic_rejected(tmp_path):
    (tmp_path / "x.ckpt").write_bytes(b"hello\nend\n")
    with pytest.raises(CheckpointError):
        load_arrays(tmp_path / "x.ckpt")


def test_missing_parameter_rejected(tmp_path):
    save_arrays(tmp_path / "x.ckpt", {"w3": np.zeros((2, 2), np.float32)})
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "x.ckpt")


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(CheckpointError):
        save_arrays(tmp_path / "x.ckpt", {"a": np.zeros(3, np.int32)})
