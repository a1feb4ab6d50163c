import struct

import numpy as np
import pytest

from ganbalance.errors import CheckpointError
from ganbalance.numerics import load_arrays, save_arrays


def _sample_arrays(rng):
    return {
        "gen/emb": rng.normal(size=(11, 4)),
        "gen/b": rng.normal(size=7),
        "disc/w": rng.normal(size=(3, 2, 5)),
        "scalar": np.asarray(3.25),
    }


def test_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arrays = _sample_arrays(rng)
    path = tmp_path / "model.catg"
    save_arrays(path, arrays)
    back = load_arrays(path)
    assert list(back) == list(arrays)
    for name, arr in arrays.items():
        assert back[name].shape == np.asarray(arr).shape
        assert back[name].tobytes() == np.asarray(arr, dtype="<f8").tobytes(order="C")


def test_save_load_save_is_stable(tmp_path):
    rng = np.random.default_rng(1)
    p1 = tmp_path / "a.catg"
    p2 = tmp_path / "b.catg"
    save_arrays(p1, _sample_arrays(rng))
    save_arrays(p2, load_arrays(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.catg"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_arrays(path)


def test_unknown_version_rejected(tmp_path):
    path = tmp_path / "v9.catg"
    path.write_bytes(b"CATG" + struct.pack("<I", 9))
    with pytest.raises(CheckpointError, match="version"):
        load_arrays(path)


@pytest.mark.parametrize("cut", [6, 10, 20, -3, -9])
def test_truncation_raises_not_partial(tmp_path, cut):
    rng = np.random.default_rng(2)
    path = tmp_path / "full.catg"
    save_arrays(path, _sample_arrays(rng))
    blob = path.read_bytes()
    cut_at = cut if cut > 0 else len(blob) + cut
    short = tmp_path / "short.catg"
    short.write_bytes(blob[:cut_at])
    with pytest.raises(CheckpointError, match="truncated"):
        load_arrays(short)


def test_empty_container_roundtrips(tmp_path):
    path = tmp_path / "empty.catg"
    save_arrays(path, {})
    assert load_arrays(path) == {}
