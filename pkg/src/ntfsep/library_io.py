"""Binary container for basis libraries (``.ntfl``).

Layout, little-endian::

    b"NTFL"  u16 version  u32 Z
    Z times: u16 label length, UTF-8 label, u32 F, u32 K, F*K float64 (row-major)
    u32 CRC-32 of every preceding byte
"""

import struct
import zlib

import numpy as np

from .priors import BasisLibrary, SpectralBasis

MAGIC = b"NTFL"
VERSION = 1
COLUMN_SUM_TOL = 1e-6

__all__ = ["LibraryFormatError", "dumps", "loads", "save_library", "load_library"]


class LibraryFormatError(ValueError):
    pass


def dumps(lib):
    """Serialize a :class:`BasisLibrary` to bytes."""
    parts = [MAGIC, struct.pack("<HI", VERSION, len(lib))]
    for block in lib.blocks:
        label = block.label.encode("utf-8")
        if len(label) > 0xFFFF:
            raise ValueError(f"label too long ({len(label)} bytes)")
        F, K = block.shape
        parts.append(struct.pack("<H", len(label)) + label + struct.pack("<II", F, K))
        parts.append(np.ascontiguousarray(block.matrix, dtype="<f8").tobytes())
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def loads(buf, check_columns=True):
    """Parse bytes produced by :func:`dumps`.

    Raises
    ------
    LibraryFormatError
        On a bad magic, version or CRC, truncation, negative entries, or
        (with ``check_columns``) columns not summing to one.
    """
    buf = bytes(buf)
    if len(buf) < 14:
        raise LibraryFormatError(f"file too short ({len(buf)} bytes)")
    payload, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(payload) != crc:
        raise LibraryFormatError("CRC mismatch: file is corrupted")
    if payload[:4] != MAGIC:
        raise LibraryFormatError(f"bad magic {payload[:4]!r}")
    version, Z = struct.unpack_from("<HI", payload, 4)
    if version != VERSION:
        raise LibraryFormatError(f"unsupported version {version}")
    pos = 10
    blocks = []
    try:
        for z in range(Z):
            (n,) = struct.unpack_from("<H", payload, pos)
            pos += 2
            if pos + n > len(payload):
                raise LibraryFormatError(f"block {z}: label runs past the end")
            label = payload[pos:pos + n].decode("utf-8")
            pos += n
            F, K = struct.unpack_from("<II", payload, pos)
            pos += 8
            size = 8 * F * K
            if pos + size > len(payload):
                raise LibraryFormatError(f"block {z}: {F}x{K} entries run past the end")
            U = np.frombuffer(payload, dtype="<f8", count=F * K, offset=pos).reshape(F, K)
            pos += size
            if np.any(U < 0) or not np.all(np.isfinite(U)):
                raise LibraryFormatError(f"block {z} ({label!r}): negative or non-finite entries")
            if check_columns and np.any(np.abs(U.sum(axis=0) - 1.0) > COLUMN_SUM_TOL):
                raise LibraryFormatError(f"block {z} ({label!r}): columns do not sum to one")
            blocks.append(SpectralBasis(U.astype(np.float64), label))
    except struct.error as exc:
        raise LibraryFormatError(f"truncated at byte {pos}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise LibraryFormatError(f"label is not UTF-8: {exc}") from None
    if pos != len(payload):
        raise LibraryFormatError(f"{len(payload) - pos} trailing bytes")
    try:
        return BasisLibrary(blocks)
    except ValueError as exc:
        raise LibraryFormatError(str(exc)) from None


def save_library(path, lib):
    with open(path, "wb") as fh:
        fh.write(dumps(lib))


def load_library(path, check_columns=True):
    with open(path, "rb") as fh:
        return loads(fh.read(), check_columns)
