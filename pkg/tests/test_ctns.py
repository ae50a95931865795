import numpy as np
import pytest

from branchgrid import ctns


def test_roundtrip_complex(tmp_path):
    arr = (np.arange(24).reshape(2, 3, 4) + 1j * np.arange(24).reshape(2, 3, 4))
    path = tmp_path / "t.ctns"
    ctns.write(path, arr.astype(np.complex64))
    back = ctns.read(path)
    assert back.dtype == np.dtype("<c8")
    assert np.array_equal(back, arr.astype(np.complex64))


def test_roundtrip_float_and_uint8(tmp_path):
    f = np.linspace(0, 1, 12, dtype=np.float32).reshape(3, 4)
    u = np.arange(10, dtype=np.uint8)
    ctns.write(tmp_path / "f.ctns", f)
    ctns.write(tmp_path / "u.ctns", u)
    assert np.array_equal(ctns.read(tmp_path / "f.ctns"), f)
    assert np.array_equal(ctns.read(tmp_path / "u.ctns"), u)


def test_header_layout(tmp_path):
    arr = np.array([1, 2, 3], dtype=np.uint8)
    path = tmp_path / "h.ctns"
    ctns.write(path, arr)
    raw = path.read_bytes()
    assert raw[:8] == bytes.fromhex("43544e5330303031")
    assert raw[8] == 2          # uint8 code
    assert raw[9] == 1          # rank
    assert raw[10:12] == b"\x00\x00"
    assert int.from_bytes(raw[12:16], "little") == 3
    assert raw[16:] == bytes([1, 2, 3])


def test_complex_payload_is_interleaved(tmp_path):
    arr = np.array([1.0 + 2.0j, 3.0 - 4.0j], dtype=np.complex64)
    path = tmp_path / "c.ctns"
    ctns.write(path, arr)
    payload = np.frombuffer(path.read_bytes()[16:], dtype="<f4")
    assert np.array_equal(payload, [1.0, 2.0, 3.0, -4.0])


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ctns"
    path.write_bytes(b"NOTCTNS1" + bytes(8))
    with pytest.raises(ctns.CtnsFormatError):
        ctns.read(path)


def test_rank_limit(tmp_path):
    with pytest.raises(ctns.CtnsFormatError):
        ctns.write(tmp_path / "r.ctns", np.zeros((2, 2, 2, 2, 2), dtype=np.float32))


def test_payload_size_checked(tmp_path):
    path = tmp_path / "s.ctns"
    ctns.write(path, np.zeros(4, dtype=np.float32))
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ctns.CtnsFormatError):
        ctns.read(path)


def test_unsupported_dtype(tmp_path):
    with pytest.raises(ctns.CtnsFormatError):
        ctns.write(tmp_path / "i.ctns", np.zeros(3, dtype=np.int64))
