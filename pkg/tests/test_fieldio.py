import numpy as np
import pytest

from wedge4.fieldio import MAGIC, FieldFormatError, read_field, write_field


@pytest.mark.parametrize("shape,dim", [((6, 4, 4, 4, 4), 4), ((3, 8, 8, 8), 3), ((8, 8, 8), 3), ((4, 4, 4, 4), 4)])
def test_roundtrip_bitwise(tmp_path, rng, shape, dim):
    data = rng.standard_normal(shape)
    path = tmp_path / "f.w4f"
    write_field(path, data, dim=dim)
    back = read_field(path)
    assert back.shape == (shape if len(shape) == dim + 1 else (1,) + shape)
    assert back.tobytes() == data.reshape(back.shape).astype("<f8").tobytes()
    raw = path.read_bytes()
    assert raw[:4] == MAGIC and len(raw) == 12 + 8 * data.size


def test_rejects_bad_files(tmp_path, rng):
    path = tmp_path / "f.w4f"
    with pytest.raises(FieldFormatError):
        write_field(path, rng.standard_normal((6, 8, 8, 4, 4)), dim=4)
    write_field(path, rng.standard_normal((4, 4, 4)), dim=3)
    raw = path.read_bytes()
    (tmp_path / "short").write_bytes(raw[:-8])
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "short")
    (tmp_path / "magic").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "magic")
    (tmp_path / "tiny").write_bytes(raw[:5])
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "tiny")
