"""Checkpoint serialization.

Layout (all integers little-endian):

    bytes 0..3    magic "TSEG"
    u32           version (1)
    u32           config block length
    bytes         config as canonical key=value text, one pair per line
    f32[...]      parameters, raw little-endian, in declared order
    u32           CRC-32 of everything above

The CRC is verified before any parameter is accepted. Parameters are stored
and restored in 32-bit floats only; round-trips are bit-exact.
"""

import zlib
import struct

import numpy as np

from .errors import ContractError, FormatError
from .model import ModelConfig, TemporalSegmenter, param_count

TSEG_MAGIC = b"TSEG"
VERSION = 1

_CONFIG_KEYS = ("window_len", "embed_dim", "num_heads", "num_layers", "ff_dim", "dropout_rate")


def _encode_config(config):
    lines = []
    for key in _CONFIG_KEYS:
        lines.append(f"{key}={getattr(config, key)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _decode_config(blob):
    fields = {}
    try:
        for line in blob.decode("utf-8").splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            if key not in _CONFIG_KEYS:
                raise FormatError(f"checkpoint config: unknown key {key!r}")
            fields[key] = float(value) if key == "dropout_rate" else int(value)
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"checkpoint config block is malformed: {exc}") from None
    missing = set(_CONFIG_KEYS) - set(fields)
    if missing:
        raise FormatError(f"checkpoint config block missing keys: {sorted(missing)}")
    return ModelConfig(**fields)


def save_checkpoint(model, path):
    if model.dtype != np.float32:
        raise ContractError("checkpoints store float32 parameters; cast the model first")
    cfg_blob = _encode_config(model.config)
    parts = [TSEG_MAGIC, struct.pack("<II", VERSION, len(cfg_blob)), cfg_blob]
    for p in model.parameters():
        parts.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != TSEG_MAGIC:
        raise FormatError(f"{path}: not a TSEG checkpoint (bad magic)")
    version, cfg_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    header_end = 12 + cfg_len
    if len(blob) < header_end + 4:
        raise FormatError(f"{path}: truncated checkpoint")
    config = _decode_config(blob[12:header_end])
    expected = header_end + 4 * param_count(config) + 4
    if len(blob) != expected:
        raise FormatError(
            f"{path}: wrong size ({len(blob)} bytes, expected {expected}); truncated or corrupt"
        )
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"{path}: checksum mismatch (stored {stored_crc:#010x}, computed {actual_crc:#010x})"
        )
    model = TemporalSegmenter(config, seed=0)
    offset = header_end
    for p in model.parameters():
        n = p.data.size
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
        p.tensor.data = arr.reshape(p.data.shape).astype(np.float32, copy=True)
        p.adam_m = np.zeros_like(p.tensor.data)
        p.adam_v = np.zeros_like(p.tensor.data)
        offset += 4 * n
    return model
