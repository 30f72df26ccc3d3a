import numpy as np
import pytest

from fmnsed_convert.fmnw import FmnwError, read_fmnw, write_fmnw


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "stem.conv.w": rng.normal(size=(8, 1, 3, 3)).astype(np.float32),
        "head.out.b": rng.normal(size=447).astype(np.float32),
        "scalarish": rng.normal(size=(1,)).astype(np.float32),
    }
    path = tmp_path / "t.fmnw"
    write_fmnw(path, tensors)
    back = read_fmnw(path)
    assert list(back) == list(tensors)
    for name, arr in tensors.items():
        assert back[name].shape == arr.shape
        assert np.array_equal(back[name].view(np.uint32), arr.view(np.uint32))


def test_data_section_alignment(tmp_path):
    path = tmp_path / "t.fmnw"
    write_fmnw(path, {"x": np.ones(3, np.float32)})
    blob = path.read_bytes()
    # header for one 1-d tensor: 12 + 2 + 1 + 2 + 4 + 8 = 29 bytes -> pad to 64
    assert len(blob) == 64 + 12
    assert np.frombuffer(blob, dtype="<f4", offset=64).tolist() == [1.0, 1.0, 1.0]


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.fmnw"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(FmnwError, match="magic"):
        read_fmnw(path)


def test_truncated(tmp_path):
    path = tmp_path / "t.fmnw"
    write_fmnw(path, {"x": np.ones(64, np.float32)})
    (tmp_path / "cut.fmnw").write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FmnwError, match="truncated"):
        read_fmnw(tmp_path / "cut.fmnw")


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(FmnwError, match="finite"):
        write_fmnw(tmp_path / "x.fmnw", {"x": np.array([np.nan], np.float32)})
