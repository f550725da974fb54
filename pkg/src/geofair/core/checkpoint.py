"""Binary checkpoint codec for :class:`MlpModel`.

Layout (all integers little-endian)::

    magic      11 bytes  b"GEOFAIR-MLP"
    version    uint16    1
    config_len uint32    length of the JSON config that follows
    config     UTF-8 JSON, sorted keys, no whitespace
    params     per layer: weights (fan_in x fan_out, row-major) then bias, <f8

Encoding the same model twice gives identical bytes, and decode(encode(m))
reproduces every parameter bit for bit.
"""

from __future__ import annotations

import itertools
import json
import struct

import numpy as np

from .errors import CheckpointError, NumericError, ValidationError
from .numerics import MlpConfig, MlpModel

MAGIC = b"GEOFAIR-MLP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<HI")
_FLOAT = np.dtype("<f8")


def encode_model(model: MlpModel) -> bytes:
    config = json.dumps(model.config.to_dict(), sort_keys=True, separators=(",", ":"))
    config_bytes = config.encode("utf-8")
    chunks = [MAGIC, _HEADER.pack(FORMAT_VERSION, len(config_bytes)), config_bytes]
    chunks.extend(np.ascontiguousarray(p, dtype=_FLOAT).tobytes() for p in model.parameters())
    return b"".join(chunks)


def decode_model(data: bytes, expected: MlpConfig | None = None) -> MlpModel:
    """Parse a checkpoint; with ``expected`` set, the stored architecture must match it."""
    if not data.startswith(MAGIC):
        raise CheckpointError("not a GeoFair model checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(data) < offset + _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    version, config_len = _HEADER.unpack_from(data, offset)
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})"
        )
    offset += _HEADER.size
    raw_config = data[offset : offset + config_len]
    if len(raw_config) != config_len:
        raise CheckpointError("truncated checkpoint config")
    try:
        config = MlpConfig.from_dict(json.loads(raw_config.decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
        raise CheckpointError(f"bad checkpoint config: {e}") from e
    offset += config_len

    if expected is not None and config != expected:
        raise CheckpointError(
            f"checkpoint architecture {config.layer_dims} does not match "
            f"expected {expected.layer_dims}"
        )

    dims = config.layer_dims
    expected_size = sum((a + 1) * b for a, b in itertools.pairwise(dims)) * _FLOAT.itemsize
    if len(data) - offset != expected_size:
        raise CheckpointError(
            f"checkpoint holds {len(data) - offset} parameter bytes, expected {expected_size}"
        )

    params = []
    for fan_in, fan_out in itertools.pairwise(dims):
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            params.append(
                np.frombuffer(data, dtype=_FLOAT, count=count, offset=offset)
                .astype(np.float64)
                .reshape(shape)
            )
            offset += count * _FLOAT.itemsize
    try:
        return MlpModel.zeros(config).with_parameters(params)
    except (ValidationError, NumericError) as e:
        raise CheckpointError(f"bad checkpoint parameters: {e}") from e
