"""Versioned named-array container.

A deliberately simple binary format used for checkpoints, feature
dumps, and embedding exports, so artifacts round-trip bit-exactly and
can be parsed outside Python:

    magic "DGMA" | version u32 | count u32
    then per array:
        name_len u16 | name utf-8 bytes
        dtype tag u8 | ndim u8 | shape ndim x u64
        payload (little-endian, C order)

All integers are little-endian. JSON metadata travels as a uint8 array
under a reserved name (see save_meta/load_meta).
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, IOFailure

MAGIC = b"DGMA"
VERSION = 1
META_KEY = "__meta__"

_DTYPE_TAGS = {
    np.dtype("<f4"): 0,
    np.dtype("<f8"): 1,
    np.dtype("<i8"): 2,
    np.dtype("u1"): 3,
    np.dtype("<i4"): 4,
}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def save_arrays(path, arrays: dict) -> None:
    """Write a {name: ndarray} mapping to the container format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
            arr = arr.astype(dtype, copy=False)
            if arr.dtype not in _DTYPE_TAGS:
                raise FormatError(f"unsupported dtype {arr.dtype} for array '{name}'")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<BB", _DTYPE_TAGS[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_arrays(path) -> dict:
    """Read a container back into a {name: ndarray} mapping."""
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"array container not found: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic in {path}: not an array container")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version} in {path}")
    offset = 12
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        tag, ndim = struct.unpack_from("<BB", data, offset)
        offset += 2
        if tag not in _TAG_DTYPES:
            raise FormatError(f"unknown dtype tag {tag} for array '{name}' in {path}")
        shape = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        dtype = _TAG_DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + nbytes > len(data):
            raise FormatError(f"truncated payload for array '{name}' in {path}")
        arr = np.frombuffer(data[offset : offset + nbytes], dtype=dtype).reshape(shape)
        offset += nbytes
        arrays[name] = arr.copy()
    return arrays


def pack_meta(meta: dict) -> np.ndarray:
    """Encode a JSON-serializable dict as a uint8 array."""
    return np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8).copy()


def unpack_meta(arr: np.ndarray) -> dict:
    return json.loads(bytes(arr.astype(np.uint8)).decode("utf-8"))
