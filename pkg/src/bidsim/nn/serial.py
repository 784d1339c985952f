"""Binary parameter snapshots.

Byte layout (all integers and floats little-endian):

====== ===== =====================================================
offset size  field
====== ===== =====================================================
0      4     magic ``b"BSNP"``
4      2     format version (uint16), currently 1
6      2     layer count L (uint16)
8      8*L   per layer: in_dim (uint32), out_dim (uint32)
...          per layer, in order: weights as in_dim*out_dim float64
             row-major (row = input index), then out_dim float64
             biases
====== ===== =====================================================

Only dimensions and parameter values are stored; activations,
normalization schemes and wiring are architecture, not parameters.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ConfigurationError, ValidationError

MAGIC = b"BSNP"
VERSION = 1

_F64LE = np.dtype("<f8")


def dump_params(net) -> bytes:
    """Serialize a network's parameters to the documented container."""
    dims = net.architecture()
    if len(dims) > 0xFFFF:
        raise ConfigurationError("too many layers to serialize")
    out = [MAGIC, struct.pack("<HH", VERSION, len(dims))]
    for in_dim, out_dim in dims:
        out.append(struct.pack("<II", in_dim, out_dim))
    for layer in net.layers:
        out.append(np.ascontiguousarray(layer.weights, dtype=_F64LE).tobytes())
        out.append(np.ascontiguousarray(layer.biases, dtype=_F64LE).tobytes())
    return b"".join(out)


def parse_params(blob: bytes) -> list[tuple[np.ndarray, np.ndarray]]:
    """Decode a snapshot into per-layer (weights, biases) arrays."""
    if blob[:4] != MAGIC:
        raise ValidationError("not a parameter snapshot (bad magic)")
    version, n_layers = struct.unpack_from("<HH", blob, 4)
    if version != VERSION:
        raise ValidationError(f"unsupported snapshot version {version}")
    dims = []
    offset = 8
    for _ in range(n_layers):
        dims.append(struct.unpack_from("<II", blob, offset))
        offset += 8
    layers = []
    for in_dim, out_dim in dims:
        w_bytes = in_dim * out_dim * 8
        w = np.frombuffer(blob, dtype=_F64LE, count=in_dim * out_dim,
                          offset=offset).astype(np.float64).reshape(in_dim, out_dim)
        offset += w_bytes
        b = np.frombuffer(blob, dtype=_F64LE, count=out_dim,
                          offset=offset).astype(np.float64)
        offset += out_dim * 8
        layers.append((w, b))
    if offset != len(blob):
        raise ValidationError("snapshot has trailing bytes")
    return layers


def save_params(net, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_params(net))


def load_params(net, path) -> None:
    """Load a snapshot into an existing network of matching architecture."""
    with open(path, "rb") as fh:
        layers = parse_params(fh.read())
    dims = [(w.shape[0], w.shape[1]) for w, _ in layers]
    if dims != net.architecture():
        raise ConfigurationError(
            f"snapshot architecture {dims} does not match network "
            f"{net.architecture()}")
    for layer, (w, b) in zip(net.layers, layers):
        layer.weights[:] = w
        layer.biases[:] = b
