"""Named parameter collections and their binary serialization.

Every entry is a 2-D float64 array (biases are stored as 1 x n rows).
The wire format is a single binary blob: a 6-byte magic ``INODE1``, a
little-endian u32 version, then one record per entry:

    name_len u32 | name utf-8 | rows u32 | cols u32 | rows*cols f64 (LE)

Records are read until end of file.
"""

import io
import struct

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"INODE1"
VERSION = 1


class ParamStore:
    """Flat, insertion-ordered collection of named weight matrices."""

    def __init__(self):
        self._data = {}

    def add(self, name, value):
        value = np.ascontiguousarray(value, dtype=np.float64)
        if value.ndim == 1:
            value = value.reshape(1, -1)
        if value.ndim != 2:
            raise ShapeError(f"parameter {name!r} must be 1-D or 2-D, got {value.ndim}-D")
        if not np.all(np.isfinite(value)):
            raise ValueError(f"parameter {name!r} contains non-finite entries")
        if name in self._data:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._data[name] = value
        return value

    def __getitem__(self, name):
        return self._data[name]

    def __setitem__(self, name, value):
        if name not in self._data:
            raise KeyError(name)
        if value.shape != self._data[name].shape:
            raise ShapeError(f"cannot reshape {name!r} from {self._data[name].shape} to {value.shape}")
        self._data[name] = np.ascontiguousarray(value, dtype=np.float64)

    def __contains__(self, name):
        return name in self._data

    def __len__(self):
        return len(self._data)

    def names(self):
        return list(self._data)

    def items(self):
        return self._data.items()

    def total_scalars(self, prefix=None):
        """Number of scalar parameters, optionally restricted to a name prefix."""
        return sum(v.size for k, v in self._data.items() if prefix is None or k.startswith(prefix))

    def copy(self):
        out = ParamStore()
        for name, value in self._data.items():
            out._data[name] = value.copy()
        return out


def uniform_init(rng, fan_in, shape):
    """Uniform weights in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def write_records(buf, entries):
    """Append (name, 2-D array) records to a binary stream."""
    for name, value in entries:
        raw = name.encode("utf-8")
        rows, cols = value.shape
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<II", rows, cols))
        buf.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def read_records(buf):
    """Yield (name, array) records until end of stream."""
    while True:
        head = buf.read(4)
        if not head:
            return
        if len(head) != 4:
            raise FormatError("truncated record header")
        (name_len,) = struct.unpack("<I", head)
        raw = buf.read(name_len)
        if len(raw) != name_len:
            raise FormatError("truncated record name")
        dims = buf.read(8)
        if len(dims) != 8:
            raise FormatError("truncated record dimensions")
        rows, cols = struct.unpack("<II", dims)
        payload = buf.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise FormatError("truncated record payload")
        value = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
        yield raw.decode("utf-8"), value


def save_store(store, path_or_buf, extra=()):
    """Write magic + version + records; ``extra`` records are written first."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "wb") if own else path_or_buf
    try:
        buf.write(MAGIC)
        buf.write(struct.pack("<I", VERSION))
        write_records(buf, extra)
        write_records(buf, store.items())
    finally:
        if own:
            buf.close()


def load_records(path_or_buf):
    """Read all records from a checkpoint blob, returning a name -> array dict."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "rb") if own else path_or_buf
    try:
        magic = buf.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        ver = buf.read(4)
        if len(ver) != 4:
            raise FormatError("truncated version field")
        (version,) = struct.unpack("<I", ver)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        out = {}
        for name, value in read_records(buf):
            if name in out:
                raise FormatError(f"duplicate record {name!r}")
            out[name] = value
        return out
    finally:
        if own:
            buf.close()


def store_to_bytes(store, extra=()):
    buf = io.BytesIO()
    save_store(store, buf, extra=extra)
    return buf.getvalue()
