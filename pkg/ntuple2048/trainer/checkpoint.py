"""
Checkpoint files.

Layout (little-endian)::

    "NTCK" | version u32 | flags u32 | state length u32 | state JSON | CRC32 u32
    V as a network record
    auxiliary tables as network records, in TCState / AutostepState order

``flags`` bit 0 marks TC tables (E, A), bit 1 Autostep tables (alpha, h, v).
"""

import os
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, List, Tuple

import msgspec
import numpy as np
from msgspec import Struct, field

from ntuple2048.config import RunConfig
from ntuple2048.core.log import SpdLog
from ntuple2048.error import CheckpointError, ConfigurationError, NetworkFormatError
from ntuple2048.learning.rules import AutostepState, TCState, create_tables
from ntuple2048.ntuple.io import read_header, read_into, read_weights, write_network
from ntuple2048.ntuple.network import NTupleNetwork

MAGIC = b"NTCK"
FORMAT_VERSION = 1
FLAG_TC = 1
FLAG_AUTOSTEP = 2
_HEADER = struct.Struct("<4sIII")
_CRC = struct.Struct("<I")


def _log():
    return SpdLog.get_logger("Checkpoint", level="INFO", flush=True)


class TrainerState(Struct, kw_only=True):
    arch: str
    config: Dict[str, Any]
    actions: int = 0
    episodes: int = 0
    worker_actions: List[int] = field(default_factory=list)
    next_eval: int = 0
    checkpoints: int = 0
    wall_s: float = 0.0
    rng_states: List[Dict[str, Any]] = field(default_factory=list)
    eval_rng: Dict[str, Any] = field(default_factory=dict)
    carousel: Dict[str, Any] = field(default_factory=dict)


def _ints_to_str(value):
    if isinstance(value, dict):
        return {k: _ints_to_str(v) for k, v in value.items()}
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, np.integer)):
        return {"int": str(int(value))}
    return value


def _str_to_ints(value):
    if isinstance(value, dict):
        if set(value) == {"int"}:
            return int(value["int"])
        return {k: _str_to_ints(v) for k, v in value.items()}
    return value


def rng_to_state(rng: np.random.Generator) -> Dict[str, Any]:
    """Bit generator state with every integer kept as a decimal string (PCG64 words exceed 64 bits)."""
    return _ints_to_str(rng.bit_generator.state)


def rng_from_state(state: Dict[str, Any]) -> np.random.Generator:
    state = _str_to_ints(state)
    name = state.get("bit_generator", "PCG64")
    try:
        bit_generator = getattr(np.random, name)()
    except AttributeError:
        raise CheckpointError(f"unknown bit generator {name!r} in checkpoint")
    bit_generator.state = state
    return np.random.Generator(bit_generator)


def _aux_arrays(tables) -> Tuple[int, List[np.ndarray]]:
    if isinstance(tables, TCState):
        return FLAG_TC, [tables.E, tables.A]
    if isinstance(tables, AutostepState):
        return FLAG_AUTOSTEP, [tables.alpha, tables.h, tables.v]
    return 0, []


def save_checkpoint(
    path: str | os.PathLike, network: NTupleNetwork, tables, state: TrainerState
) -> Path:
    path = Path(path)
    flags, aux = _aux_arrays(tables)
    payload = msgspec.json.encode(state)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, flags, len(payload))
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(payload)
        f.write(_CRC.pack(zlib.crc32(payload, zlib.crc32(header)) & 0xFFFFFFFF))
        write_network(f, network)
        for array in aux:
            write_network(f, network, array)
    os.replace(tmp, path)
    _log().info(f"checkpoint at {state.actions} actions written to {path}")
    return path


def _read_state(f, path: Path) -> Tuple[int, TrainerState]:
    header = f.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise CheckpointError(f"truncated checkpoint {path}")
    magic, version, flags, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    payload = f.read(length)
    crc = f.read(_CRC.size)
    if len(payload) != length or len(crc) != _CRC.size:
        raise CheckpointError(f"truncated checkpoint {path}")
    (stored,) = _CRC.unpack(crc)
    if stored != zlib.crc32(payload, zlib.crc32(header)) & 0xFFFFFFFF:
        raise CheckpointError(f"checkpoint state CRC mismatch in {path}")
    try:
        return flags, msgspec.json.decode(payload, type=TrainerState)
    except msgspec.DecodeError as e:
        raise CheckpointError(f"corrupt checkpoint state: {e}")


def read_checkpoint_state(path: str | os.PathLike) -> TrainerState:
    """Trainer state only; the weight tables are not read."""
    path = Path(path)
    with open(path, "rb") as f:
        _, state = _read_state(f, path)
    return state


def load_checkpoint(path: str | os.PathLike) -> Tuple[NTupleNetwork, Any, TrainerState]:
    """Returns ``(network, auxiliary tables, trainer state)``."""
    path = Path(path)
    with open(path, "rb") as f:
        flags, state = _read_state(f, path)
        try:
            network, net_header = read_header(f)
            read_weights(f, network.weights, net_header)
            config = RunConfig.from_flat(state.config)
            tables = create_tables(network, config.learning)
            expected, aux = _aux_arrays(tables)
            if flags != expected:
                raise CheckpointError(
                    f"checkpoint flags {flags} do not match rule {config.learning.rule.value}"
                )
            for array in aux:
                read_into(f, network, array)
        except (NetworkFormatError, ConfigurationError) as e:
            raise CheckpointError(f"corrupt checkpoint: {e.message}")
    network.name = state.arch
    _log().info(f"loaded checkpoint {path} at {state.actions} actions")
    return network, tables, state
