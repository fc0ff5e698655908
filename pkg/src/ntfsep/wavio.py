"""Minimal RIFF/WAVE reader and writer (PCM16 and IEEE float32).

Samples are returned as float64 arrays of shape (n_samples, n_channels).
PCM16 maps ``k`` to ``k / 32768`` so full scale negative is exactly -1.
"""

import struct

import numpy as np

PCM = 1
IEEE_FLOAT = 3
EXTENSIBLE = 0xFFFE

__all__ = ["WavError", "read_wav", "write_wav"]


class WavError(ValueError):
    """Malformed or unsupported WAV data; the message names the byte offset."""


def _parse_fmt(body, offset):
    if len(body) < 16:
        raise WavError(f"byte {offset}: fmt chunk has {len(body)} bytes, need 16")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if tag == EXTENSIBLE:
        if len(body) < 26:
            raise WavError(f"byte {offset}: extensible fmt chunk is truncated")
        (tag,) = struct.unpack_from("<H", body, 24)
    if channels == 0:
        raise WavError(f"byte {offset + 2}: zero channels")
    if (tag, bits) == (PCM, 16):
        dtype = np.dtype("<i2")
    elif (tag, bits) == (IEEE_FLOAT, 32):
        dtype = np.dtype("<f4")
    else:
        raise WavError(
            f"byte {offset}: unsupported encoding (format tag {tag}, {bits} bits); "
            "only PCM16 and float32 are supported"
        )
    if block_align != channels * dtype.itemsize:
        raise WavError(f"byte {offset + 12}: block align {block_align} inconsistent with format")
    return dtype, channels, rate


def read_wav(path, raw=False):
    """Read a WAV file.

    Parameters
    ----------
    raw : bool
        Return samples in their stored dtype (int16 or float32) instead of
        float64.

    Returns
    -------
    data : ndarray, (n_samples, n_channels)
    rate : int
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12:
        raise WavError(f"byte {len(buf)}: file too short for a RIFF header")
    if buf[:4] != b"RIFF":
        raise WavError(f"byte 0: expected 'RIFF', found {buf[:4]!r}")
    if buf[8:12] != b"WAVE":
        raise WavError(f"byte 8: expected 'WAVE', found {buf[8:12]!r}")
    pos = 12
    fmt = None
    data = None
    while pos < len(buf):
        if pos + 8 > len(buf):
            raise WavError(f"byte {pos}: truncated chunk header")
        cid = buf[pos:pos + 4]
        (size,) = struct.unpack_from("<I", buf, pos + 4)
        body_start = pos + 8
        if body_start + size > len(buf):
            raise WavError(
                f"byte {pos}: chunk {cid!r} declares {size} bytes, only {len(buf) - body_start} remain"
            )
        body = buf[body_start:body_start + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body, body_start)
        elif cid == b"data":
            if fmt is None:
                raise WavError(f"byte {pos}: data chunk before fmt chunk")
            data = (body, body_start)
            break
        pos = body_start + size + (size & 1)
    if fmt is None:
        raise WavError(f"byte {pos}: no fmt chunk")
    if data is None:
        raise WavError(f"byte {pos}: no data chunk")
    dtype, channels, rate = fmt
    body, start = data
    frame = channels * dtype.itemsize
    if len(body) % frame:
        raise WavError(f"byte {start}: data size {len(body)} is not a multiple of {frame}")
    samples = np.frombuffer(body, dtype=dtype).reshape(-1, channels)
    if raw:
        return samples.copy(), rate
    if dtype.kind == "i":
        return samples.astype(np.float64) / 32768.0, rate
    return samples.astype(np.float64), rate


def write_wav(path, data, rate, encoding="float32"):
    """Write (n_samples,) or (n_samples, n_channels) samples.

    ``encoding`` is ``"float32"`` or ``"pcm16"``; PCM16 scales by 32768,
    rounds and clips.
    """
    data = np.asarray(data)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] == 0:
        raise ValueError(f"expected (n_samples, n_channels), got {data.shape}")
    channels = data.shape[1]
    if encoding == "float32":
        samples = data.astype("<f4")
        tag = IEEE_FLOAT
    elif encoding == "pcm16":
        scaled = np.round(np.asarray(data, dtype=np.float64) * 32768.0)
        samples = np.clip(scaled, -32768, 32767).astype("<i2")
        tag = PCM
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    width = samples.dtype.itemsize
    payload = samples.tobytes()
    fmt = struct.pack("<HHIIHH", tag, channels, int(rate), int(rate) * channels * width,
                      channels * width, 8 * width)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
