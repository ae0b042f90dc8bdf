"""
N-tuple network with symmetric sampling and multi-stage tables.

All weights live in one flat array: tuple-major, then stage-major, then the
``16**n`` entries of the tuple's table. The kernels receive a ``layout`` tuple
``(vlocs, vlen, vtup, offsets, sizes)`` where row ``8*i + k`` of ``vlocs``
holds the cells that tuple ``i`` reads in view ``k``.
"""

from typing import List, Sequence, Tuple

import numba as nb
import numpy as np

from ntuple2048.constants import ALPHABET, MAX_STAGE_BITS, VIEWS, WEIGHT_DTYPE
from ntuple2048.core.log import SpdLog
from ntuple2048.error import ConfigurationError
from ntuple2048.game import cell_at
from ntuple2048.ntuple.shape import TupleShape, find_container, get_architecture
from ntuple2048.ntuple.symmetry import SYMMETRY_TABLE
from ntuple2048.schema import Board

NO_PARENT = 0xFFFF

Layout = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@nb.njit(inline="always")
def view_index(b, vlocs, vlen, j):
    idx = 0
    for q in range(vlen[j]):
        idx |= cell_at(b, vlocs[j, q]) << (4 * q)
    return idx


@nb.njit(cache=True, nogil=True)
def stage_kernel(b, g):
    if g == 0:
        return 0
    lo = 16 - g
    s = 0
    for i in range(16):
        e = cell_at(b, i)
        if e >= lo:
            s |= 1 << (e - lo)
    return s


@nb.njit(inline="always")
def slot_of(layout, b, j, stage):
    vlocs, vlen, vtup, offsets, sizes = layout
    t = vtup[j]
    return offsets[t] + stage * sizes[t] + view_index(b, vlocs, vlen, j)


@nb.njit(cache=True, nogil=True)
def value_kernel(w, layout, b, g):
    offsets = layout[3]
    stage = stage_kernel(b, g)
    buf = np.empty(8, np.int64)
    total = 0.0
    for i in range(offsets.shape[0]):
        for k in range(8):
            buf[k] = slot_of(layout, b, 8 * i + k, stage)
        # sorted reads give the same summation order for every symmetric board
        for a in range(1, 8):
            x = buf[a]
            c = a - 1
            while c >= 0 and buf[c] > x:
                buf[c + 1] = buf[c]
                c -= 1
            buf[c + 1] = x
        for k in range(8):
            total += w[buf[k]]
    return total


@nb.njit(cache=True, nogil=True)
def promote_kernel(w, layout, b, g):
    vtup = layout[2]
    sizes = layout[4]
    stage = stage_kernel(b, g)
    if stage == 0:
        return
    for j in range(vtup.shape[0]):
        slot = slot_of(layout, b, j, stage)
        if w[slot] == 0.0:
            w[slot] = w[slot - sizes[vtup[j]]]


@nb.njit(cache=True, nogil=True)
def refs_kernel(layout, b, g):
    vlocs, vlen, vtup, offsets, sizes = layout
    stage = stage_kernel(b, g)
    out = np.empty((vtup.shape[0], 3), np.int64)
    for j in range(vtup.shape[0]):
        out[j, 0] = vtup[j]
        out[j, 1] = stage
        out[j, 2] = view_index(b, vlocs, vlen, j)
    return out


def build_layout(shapes: Sequence[TupleShape], stage_bits: int) -> Layout:
    m = len(shapes)
    vlocs = np.zeros((VIEWS * m, 7), dtype=np.int64)
    vlen = np.empty(VIEWS * m, dtype=np.int64)
    vtup = np.empty(VIEWS * m, dtype=np.int64)
    offsets = np.empty(m, dtype=np.int64)
    sizes = np.empty(m, dtype=np.int64)
    offset = 0
    for i, shape in enumerate(shapes):
        sizes[i] = shape.table_size
        offsets[i] = offset
        offset += (1 << stage_bits) * shape.table_size
        for k in range(VIEWS):
            j = VIEWS * i + k
            vlen[j] = shape.n
            vtup[j] = i
            for q, loc in enumerate(shape.locations):
                vlocs[j, q] = SYMMETRY_TABLE[k, loc]
    return vlocs, vlen, vtup, offsets, sizes


def stage_of(board: Board, g: int) -> int:
    if not 0 <= g <= MAX_STAGE_BITS:
        raise ConfigurationError(f"stage bits must be in [0, {MAX_STAGE_BITS}], got {g}")
    return int(stage_kernel(board.word, g))


def tuple_index(board: Board, shape: TupleShape) -> int:
    cells = board.cells
    return sum(cells[loc] * ALPHABET**j for j, loc in enumerate(shape.locations))


class NTupleNetwork:
    """
    Value function ``V(s) = sum_i sum_k T_i[stage(s)][index(view_k(s), shape_i)]``.

    The weight array is shared by reference with the learning kernels; workers
    write to it concurrently without locks.
    """

    def __init__(
        self,
        shapes: Sequence[TupleShape],
        stage_bits: int = 0,
        dtype: str | np.dtype = WEIGHT_DTYPE,
        name: str | None = None,
        weights: np.ndarray | None = None,
    ):
        if not shapes:
            raise ConfigurationError("a network needs at least one tuple")
        if not 0 <= stage_bits <= MAX_STAGE_BITS:
            raise ConfigurationError(
                f"stage bits must be in [0, {MAX_STAGE_BITS}], got {stage_bits}"
            )
        self._log = SpdLog.get_logger(type(self).__name__, level="INFO", flush=True)
        self.shapes: Tuple[TupleShape, ...] = tuple(shapes)
        self.stage_bits = stage_bits
        self.name = name
        self.layout: Layout = build_layout(self.shapes, stage_bits)
        self.fold_parents: List[int] = self._resolve_fold_parents()
        size = self.parameter_count
        if weights is None:
            self.weights = np.zeros(size, dtype=dtype)
        else:
            if weights.shape != (size,):
                raise ConfigurationError(
                    f"weight array has shape {weights.shape}, network needs ({size},)"
                )
            self.weights = weights
        self._log.debug(
            f"network {name or '<anonymous>'}: m={self.m} g={stage_bits} params={size}"
        )

    @classmethod
    def from_architecture(
        cls, name: str, stage_bits: int = 0, dtype: str | np.dtype = WEIGHT_DTYPE
    ) -> "NTupleNetwork":
        arch = get_architecture(name)
        return cls(arch.shapes, stage_bits=stage_bits, dtype=dtype, name=arch.name)

    def _resolve_fold_parents(self) -> List[int]:
        retained = [i for i, s in enumerate(self.shapes) if not s.redundant]
        parents = []
        for shape in self.shapes:
            if not shape.redundant or not retained:
                parents.append(NO_PARENT)
                continue
            try:
                pos, _, _ = find_container(shape, [self.shapes[i] for i in retained])
            except ConfigurationError:
                parents.append(NO_PARENT)
                continue
            parents.append(retained[pos])
        return parents

    @property
    def m(self) -> int:
        return len(self.shapes)

    @property
    def stages(self) -> int:
        return 1 << self.stage_bits

    @property
    def view_count(self) -> int:
        return VIEWS * self.m

    @property
    def dtype(self) -> np.dtype:
        return self.weights.dtype

    @property
    def parameter_count(self) -> int:
        return self.stages * sum(s.table_size for s in self.shapes)

    @property
    def has_redundant(self) -> bool:
        return any(s.redundant for s in self.shapes)

    def table(self, i: int) -> np.ndarray:
        """Writable ``(stages, 16**n)`` view of tuple ``i``'s tables."""
        offsets, sizes = self.layout[3], self.layout[4]
        start = int(offsets[i])
        size = int(sizes[i])
        return self.weights[start : start + self.stages * size].reshape(self.stages, size)

    def evaluate(self, board: Board) -> float:
        return float(value_kernel(self.weights, self.layout, board.word, self.stage_bits))

    def stage_of(self, board: Board) -> int:
        return int(stage_kernel(board.word, self.stage_bits))

    def weight_refs(self, board: Board) -> List[Tuple[int, int, int]]:
        refs = refs_kernel(self.layout, board.word, self.stage_bits)
        return [(int(i), int(s), int(x)) for i, s, x in refs]

    def promote(self, board: Board) -> None:
        promote_kernel(self.weights, self.layout, board.word, self.stage_bits)

    def promote_weight(self, i: int, stage: int, index: int) -> None:
        if stage <= 0:
            return
        tables = self.table(i)
        if tables[stage, index] == 0.0:
            tables[stage, index] = tables[stage - 1, index]

    def randomize(self, rng: np.random.Generator, scale: float = 1.0) -> "NTupleNetwork":
        self.weights[:] = rng.uniform(-scale, scale, size=self.weights.shape)
        return self

    def zeros_like(self, fill: float = 0.0) -> np.ndarray:
        return np.full(self.weights.shape, fill, dtype=self.weights.dtype)

    def same_shape(self, other: "NTupleNetwork") -> bool:
        return (
            self.stage_bits == other.stage_bits
            and [(s.locations, s.redundant) for s in self.shapes]
            == [(s.locations, s.redundant) for s in other.shapes]
        )

    def copy(self) -> "NTupleNetwork":
        return NTupleNetwork(
            self.shapes, self.stage_bits, name=self.name, weights=self.weights.copy()
        )

    def __repr__(self) -> str:
        return (
            f"NTupleNetwork(name={self.name!r}, m={self.m}, stages={self.stages}, "
            f"params={self.parameter_count}, dtype={self.dtype})"
        )
