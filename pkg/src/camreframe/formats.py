"""On-disk formats: LRTF tensor container, RealEstate10K text, PPM/PGM images,
and JSON helpers.  All binary layouts are little-endian."""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import BadCRC, BadMagic, TruncatedFile, UnsupportedVersion
from .trajectory import Trajectory

_MAGIC = b"LRTF"
_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("uint8"): 1}


def write_tensor(path, data: np.ndarray) -> None:
    """Write an array as an LRTF container (f32 or u8, row-major, CRC32)."""
    arr = np.ascontiguousarray(data)
    if arr.dtype not in _DTYPE_CODES:
        arr = arr.astype(np.float32)
    code = _DTYPE_CODES[arr.dtype]
    if any(d > 0xFFFFFFFF for d in arr.shape):
        raise ValueError("dimension exceeds u32 range")
    payload = arr.astype(_DTYPES[code]).tobytes(order="C")
    header = _MAGIC + struct.pack("<HBB", _VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    Path(path).write_bytes(header + payload + struct.pack("<I", crc))


def read_tensor(path) -> np.ndarray:
    """Read an LRTF container; raises BadMagic/BadCRC/UnsupportedVersion/TruncatedFile."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: not an LRTF file")
    version, code, ndim = struct.unpack("<HBB", blob[4:8])
    if version != _VERSION:
        raise UnsupportedVersion(f"{path}: version {version}")
    if code not in _DTYPES:
        raise UnsupportedVersion(f"{path}: dtype code {code}")
    dims_end = 8 + 4 * ndim
    if len(blob) < dims_end:
        raise TruncatedFile(f"{path}: header cut short")
    dims = struct.unpack(f"<{ndim}I", blob[8:dims_end])
    dtype = _DTYPES[code]
    n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(blob) < dims_end + n_bytes + 4:
        raise TruncatedFile(f"{path}: payload cut short")
    payload = blob[dims_end : dims_end + n_bytes]
    (crc,) = struct.unpack("<I", blob[dims_end + n_bytes : dims_end + n_bytes + 4])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise BadCRC(f"{path}: checksum mismatch")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def serialize_realestate(t: Trajectory, width: float, height: float) -> str:
    """Inverse of trajectory.parse_realestate; 9 significant digits per field."""
    lines = [t.source_id or "trajectory"]
    for f in t.frames:
        if f.intrinsics is not None:
            k = (f.intrinsics.fx / width, f.intrinsics.fy / height,
                 f.intrinsics.cx / width, f.intrinsics.cy / height)
        else:
            k = (0.5, 0.5, 0.5, 0.5)
        m = f.pose.matrix34().reshape(-1)
        fields = [str(f.timestamp)] + [f"{x:.9g}" for x in k] + ["0", "0"] + [f"{x:.9g}" for x in m]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def write_ppm(path, image: np.ndarray) -> None:
    """Write a (3, H, W) float image in [0,1] as binary 8-bit P6."""
    img = np.asarray(image)
    _, h, w = img.shape
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(data.transpose(1, 2, 0).tobytes())


def write_pgm(path, mask: np.ndarray) -> None:
    """Write an (H, W) {0,1} mask as binary 8-bit P5 (255 = known)."""
    m = np.asarray(mask)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(((m > 0.5).astype(np.uint8) * 255).tobytes())


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
