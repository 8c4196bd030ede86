"""W4F1 binary field files.

Layout (little endian): magic ``b"W4F1"``, u16 version (=1), u8 dim,
u8 ncomp, u32 n, then ``ncomp * n**dim`` float64 values in row-major order
with the component axis outermost.
"""
import struct

import numpy as np

MAGIC = b"W4F1"
VERSION = 1
_HEADER = struct.Struct("<4sHBBI")


class FieldFormatError(ValueError):
    pass


def write_field(path, data, dim=None):
    """Write a field of shape (n,)*dim or (ncomp,) + (n,)*dim."""
    data = np.asarray(data, dtype="<f8")
    if dim is None:
        dim = data.ndim if data.ndim in (3, 4) and len(set(data.shape)) == 1 else data.ndim - 1
    if data.ndim == dim:
        data = data[None]
    if data.ndim != dim + 1:
        raise FieldFormatError(f"cannot store array of shape {data.shape} as a {dim}-d field")
    spatial = data.shape[1:]
    if len(set(spatial)) != 1:
        raise FieldFormatError("W4F1 stores cubic grids only")
    header = _HEADER.pack(MAGIC, VERSION, dim, data.shape[0], spatial[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data).tobytes(order="C"))


def read_field(path):
    """Return an array of shape (ncomp,) + (n,)*dim."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FieldFormatError("truncated header")
    magic, version, dim, ncomp, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    count = ncomp * n**dim
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise FieldFormatError(f"expected {8 * count} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape((ncomp,) + (n,) * dim).astype(np.float64)
