"""
Binary network files.

Layout (little-endian)::

    "NTNW" | version u32 | c u8 | g u8 | m u16
    per tuple: n u8 | n cells u8 | redundant u8 | fold parent u16
    weights f32, tuple-major then stage-major
    CRC32 u32 of everything above

The same record is embedded in checkpoints, once for V and once per
auxiliary table.
"""

import os
import struct
import zlib
from pathlib import Path
from typing import BinaryIO, List, Tuple

import numpy as np

from ntuple2048.constants import ALPHABET, MAX_STAGE_BITS, WEIGHT_DTYPE
from ntuple2048.core.log import SpdLog
from ntuple2048.error import ChecksumError, ConfigurationError, NetworkFormatError
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.ntuple.shape import TupleShape

MAGIC = b"NTNW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIBBH")
_CRC = struct.Struct("<I")
_CHUNK = 1 << 22  # weights per read/write slice


def _log():
    return SpdLog.get_logger("NetworkIO", level="INFO", flush=True)


def _tuple_header(network: NTupleNetwork) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, ALPHABET, network.stage_bits, network.m)]
    for shape, parent in zip(network.shapes, network.fold_parents):
        parts.append(struct.pack("<B", shape.n))
        parts.append(bytes(shape.locations))
        parts.append(struct.pack("<BH", int(shape.redundant), parent))
    return b"".join(parts)


def record_size(network: NTupleNetwork) -> int:
    return len(_tuple_header(network)) + 4 * network.parameter_count + _CRC.size


def _require_float32(weights: np.ndarray) -> None:
    if weights.dtype != np.float32:
        raise ConfigurationError(
            f"network files hold 32-bit weights, refusing to narrow {weights.dtype}; "
            "build the network with dtype='float32'"
        )


def write_network(f: BinaryIO, network: NTupleNetwork, weights: np.ndarray | None = None) -> int:
    """Write one record to an open binary file; returns the number of bytes written."""
    weights = network.weights if weights is None else weights
    _require_float32(weights)
    header = _tuple_header(network)
    crc = zlib.crc32(header)
    f.write(header)
    written = len(header)
    for start in range(0, weights.shape[0], _CHUNK):
        chunk = np.ascontiguousarray(weights[start : start + _CHUNK], dtype="<f4").tobytes()
        crc = zlib.crc32(chunk, crc)
        f.write(chunk)
        written += len(chunk)
    f.write(_CRC.pack(crc & 0xFFFFFFFF))
    return written + _CRC.size


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise NetworkFormatError(f"truncated network file while reading {what}")
    return data


def parse_header(f: BinaryIO) -> Tuple[List[TupleShape], int, bytes]:
    """``(shapes, stage bits, raw header bytes)`` of the record at the current position."""
    raw = _read_exact(f, _HEADER.size, "header")
    magic, version, alphabet, g, m = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise NetworkFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise NetworkFormatError(f"unsupported network format version {version}")
    if alphabet != ALPHABET:
        raise NetworkFormatError(f"alphabet size {alphabet} is not {ALPHABET}")
    if g > MAX_STAGE_BITS or m == 0:
        raise NetworkFormatError(f"invalid header: g={g} m={m}")
    parts = [raw]
    shapes = []
    for _ in range(m):
        n_raw = _read_exact(f, 1, "tuple header")
        cells = _read_exact(f, n_raw[0], "tuple cells")
        tail = _read_exact(f, 3, "tuple header")
        redundant, _ = struct.unpack("<BH", tail)
        parts.extend((n_raw, cells, tail))
        try:
            shapes.append(TupleShape.from_cells(list(cells), redundant=bool(redundant)))
        except ConfigurationError as e:
            raise NetworkFormatError(f"invalid tuple in network file: {e.message}")
    return shapes, g, b"".join(parts)


def read_header(
    f: BinaryIO, dtype: str | np.dtype = WEIGHT_DTYPE
) -> Tuple[NTupleNetwork, bytes]:
    """Parse the header and build a zero network of the recorded shape."""
    shapes, g, raw = parse_header(f)
    return NTupleNetwork(shapes, stage_bits=g, dtype=dtype), raw


def read_into(f: BinaryIO, network: NTupleNetwork, out: np.ndarray) -> np.ndarray:
    """Read a record whose shape must equal ``network``'s into ``out``."""
    shapes, g, raw = parse_header(f)
    if g != network.stage_bits or [s.locations for s in shapes] != [
        s.locations for s in network.shapes
    ]:
        raise NetworkFormatError("table record does not match the network shape")
    return read_weights(f, out, raw)


def read_weights(f: BinaryIO, out: np.ndarray, header: bytes) -> np.ndarray:
    """Fill ``out`` from the weight block and check the trailing CRC."""
    total = out.shape[0]
    crc = zlib.crc32(header)
    for start in range(0, total, _CHUNK):
        count = min(_CHUNK, total - start)
        chunk = _read_exact(f, 4 * count, "weights")
        crc = zlib.crc32(chunk, crc)
        out[start : start + count] = np.frombuffer(chunk, dtype="<f4")
    (stored,) = _CRC.unpack(_read_exact(f, _CRC.size, "checksum"))
    if stored != crc & 0xFFFFFFFF:
        raise ChecksumError(
            f"CRC mismatch: stored {stored:08x}, computed {crc & 0xFFFFFFFF:08x}"
        )
    return out


def read_network(f: BinaryIO, dtype: str | np.dtype = WEIGHT_DTYPE) -> NTupleNetwork:
    network, header = read_header(f, dtype)
    read_weights(f, network.weights, header)
    return network


def save(network: NTupleNetwork, path: str | os.PathLike) -> Path:
    _require_float32(network.weights)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        size = write_network(f, network)
    os.replace(tmp, path)
    _log().info(f"saved network {network.name or ''} to {path} ({size} bytes)")
    return path


def load(path: str | os.PathLike, dtype: str | np.dtype = WEIGHT_DTYPE) -> NTupleNetwork:
    path = Path(path)
    with open(path, "rb") as f:
        network, header = read_header(f, dtype)
        expected = len(header) + 4 * network.parameter_count + _CRC.size
        actual = path.stat().st_size
        if actual < expected:
            raise NetworkFormatError(f"truncated network file: {actual} of {expected} bytes")
        read_weights(f, network.weights, header)
    network.name = path.stem
    _log().info(f"loaded network {path}: m={network.m} g={network.stage_bits}")
    return network
