import numpy as np
import pytest

from ctxrl.serialize import MAGIC, IntegrityError, load_params, save_params


@pytest.fixture
def arrays():
    rng = np.random.default_rng(0)
    return {
        "w0": rng.standard_normal((4, 3)),
        "b0": rng.standard_normal(3),
        "scalar": np.array([1.5]),
    }


def test_roundtrip(tmp_path, arrays):
    path = tmp_path / "p.ckpt"
    save_params(path, arrays, meta={"step": 7, "nested": {"a": [1, 2]}})
    loaded, meta = load_params(path)
    assert meta == {"step": 7, "nested": {"a": [1, 2]}}
    assert list(loaded) == list(arrays)
    for k in arrays:
        assert np.array_equal(loaded[k], arrays[k])


def test_save_load_save_byte_identical(tmp_path, arrays):
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_params(p1, arrays, meta={"step": 1})
    loaded, meta = load_params(p1)
    save_params(p2, loaded, meta=meta)
    assert p1.read_bytes() == p2.read_bytes()


def test_truncated_file_is_integrity_error(tmp_path, arrays):
    path = tmp_path / "p.ckpt"
    save_params(path, arrays, meta={})
    raw = path.read_bytes()
    for cut in (3, len(MAGIC) + 4, len(raw) // 2, len(raw) - 5):
        path.write_bytes(raw[:cut])
        with pytest.raises(IntegrityError):
            load_params(path)


def test_corrupt_blob_detected(tmp_path, arrays):
    path = tmp_path / "p.ckpt"
    save_params(path, arrays, meta={})
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError):
        load_params(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "junk"
    path.write_bytes(b"NOTCTX1" + b"\x00" * 64)
    with pytest.raises(IntegrityError):
        load_params(path)


def test_blob_is_little_endian_float64(tmp_path):
    path = tmp_path / "p.ckpt"
    save_params(path, {"x": np.array([1.0, 2.0])}, meta={})
    raw = path.read_bytes()
    assert raw.endswith(np.array([1.0, 2.0], dtype="<f8").tobytes())
    assert raw.startswith(b"CTXRL1\n")
