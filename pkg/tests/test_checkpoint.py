"""Checkpoint format: bitwise round-trips, meta handling, rejection paths."""
import numpy as np
import pytest

from dcganet.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from dcganet.errors import ConfigurationError


def test_round_trip_bitwise(tmp_path, rng):
    arrays = [
        ("a.w", rng.normal(size=(3, 2, 3, 3)).astype(np.float32)),
        ("a.b", rng.normal(size=3).astype(np.float32)),
        ("b.w", rng.normal(size=(4, 4)).astype(np.float64)),
    ]
    meta = {"epoch": "7", "variant": "full"}
    p = tmp_path / "m.ckpt"
    save_checkpoint(p, arrays, meta)
    got_meta, got_arrays = load_checkpoint(p)
    assert got_meta == meta
    assert [n for n, _ in got_arrays] == [n for n, _ in arrays]
    for (_, want), (_, got) in zip(arrays, got_arrays):
        assert got.dtype == want.dtype
        assert got.tobytes() == want.tobytes()


def test_save_load_save_identical_bytes(tmp_path, rng):
    arrays = [("w", rng.normal(size=(2, 2)).astype(np.float32))]
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, arrays, {"k": "v"})
    meta, loaded = load_checkpoint(p1)
    save_checkpoint(p2, loaded, meta)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_meta_and_scalars(tmp_path):
    p = tmp_path / "e.ckpt"
    save_checkpoint(p, [("s", np.float32(3.5).reshape(()))], {})
    meta, arrays = load_checkpoint(p)
    assert meta == {}
    assert arrays[0][1].shape == ()
    assert float(arrays[0][1]) == 3.5


def test_magic_and_version_checked(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"JUNK" + bytes(16))
    with pytest.raises(ConfigurationError, match="not a checkpoint"):
        load_checkpoint(p)
    p.write_bytes(MAGIC + (99).to_bytes(4, "little") + bytes(8))
    with pytest.raises(ConfigurationError, match="version"):
        load_checkpoint(p)


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="dtype"):
        save_checkpoint(tmp_path / "i.ckpt", [("w", np.zeros(3, dtype=np.int32))], {})
