"""Binary model serialization.

Little-endian layout:
  magic   b"BLNN"
  u32     format version (1)
  u32     layer count
  per layer: u8 kind code, then u32 kernel, in_ch, out_ch, stride,
             channels, in_dim, out_dim
  u32 x 3 input shape (C, H, W); u32 output length; u32 x 2 grid rows/cols
  per layer, for each parameter then buffer array in declaration order:
             u8 dtype code (0 = float32, 1 = float64), u8 ndim,
             u32 x ndim dims, raw array bytes

Round-trips are bit-exact at storage precision; version or shape
mismatches and truncated files raise ValueError.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .net import LayerSpec, ModelSpec, Network, build_network

MAGIC = b"BLNN"
VERSION = 1
_KIND_CODES = {k: i for i, k in enumerate(LayerSpec.KINDS)}
_CODE_KINDS = {i: k for k, i in _KIND_CODES.items()}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.float32, 1: np.float64}


def _layer_arrays(layer) -> list[tuple[str, np.ndarray]]:
    out = sorted(layer.params().items())
    out += sorted(layer.buffers().items())
    return out


def save_model(network: Network, path: str | Path) -> None:
    spec = network.spec
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(spec.layers))
    for ls in spec.layers:
        blob += struct.pack(
            "<BIIIIIII",
            _KIND_CODES[ls.kind],
            ls.kernel,
            ls.in_ch,
            ls.out_ch,
            ls.stride,
            ls.channels,
            ls.in_dim,
            ls.out_dim,
        )
    blob += struct.pack("<IIIIII", *spec.input_shape, spec.output_len, *spec.grid)
    for layer in network.layers:
        for _, arr in _layer_arrays(layer):
            code = _DTYPE_CODES.get(arr.dtype)
            if code is None:
                raise ValueError(f"unsupported parameter dtype {arr.dtype}")
            blob += struct.pack("<BB", code, arr.ndim)
            blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
            blob += np.ascontiguousarray(arr).tobytes()
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path: str | Path, dtype=np.float32) -> Network:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ValueError(f"{path}: not a model file")
    version, n_layers = r.unpack("<II")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    specs = []
    for _ in range(n_layers):
        code, kernel, in_ch, out_ch, stride, channels, in_dim, out_dim = r.unpack("<BIIIIIII")
        if code not in _CODE_KINDS:
            raise ValueError(f"{path}: unknown layer code {code}")
        specs.append(
            LayerSpec(
                kind=_CODE_KINDS[code],
                kernel=kernel,
                in_ch=in_ch,
                out_ch=out_ch,
                stride=max(stride, 1),
                channels=channels,
                in_dim=in_dim,
                out_dim=out_dim,
            )
        )
    c, h, w, out_len, gr, gc = r.unpack("<IIIIII")
    spec = ModelSpec(
        layers=tuple(specs), input_shape=(c, h, w), output_len=out_len, grid=(gr, gc)
    )
    network = build_network(spec, seed=0, dtype=dtype)
    for layer in network.layers:
        for name, arr in _layer_arrays(layer):
            code, ndim = r.unpack("<BB")
            dims = r.unpack(f"<{ndim}I")
            stored = np.frombuffer(
                r.take(int(np.prod(dims)) * np.dtype(_CODE_DTYPES[code]).itemsize),
                dtype=_CODE_DTYPES[code],
            ).reshape(dims)
            if stored.shape != arr.shape:
                raise ValueError(
                    f"{path}: stored {name} has shape {stored.shape}, "
                    f"expected {arr.shape}"
                )
            arr[:] = stored.astype(arr.dtype)
    if r.pos != len(data):
        raise ValueError(f"{path}: trailing bytes after model payload")
    return network
