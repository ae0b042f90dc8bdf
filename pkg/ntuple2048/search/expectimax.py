"""
Expectimax over afterstates.

A node of depth ``d >= 1`` averages over every empty cell (weight ``1/k``)
and both spawned tiles (0.9 / 0.1) the best ``reward + value`` of the moves
available after the spawn, recursing with ``d - 1``; depth 0 is the network
value. A spawn that leaves no legal move contributes 0.
"""

from typing import List, Tuple

import numba as nb
import numpy as np

from ntuple2048.constants import PROB_FOUR, PROB_TWO
from ntuple2048.error import GameContractError
from ntuple2048.game import cell_at, empty_count_kernel, set_cell, slide_kernel
from ntuple2048.ntuple.network import NTupleNetwork, value_kernel
from ntuple2048.schema import Board

_HASH_MUL = np.uint64(0x9E3779B97F4A7C15)
_DEPTH_MUL = np.uint64(0xC2B2AE3D27D4EB4F)
_HASH_SHIFT = np.uint64(29)

# stats slots
LOOKUPS = 0
HITS = 1
STORES = 2


@nb.njit(inline="always")
def tt_slot(b, depth, size):
    h = (b ^ (np.uint64(depth) * _DEPTH_MUL)) * _HASH_MUL
    return np.int64((h >> _HASH_SHIFT) & np.uint64(size - 1))


@nb.njit(cache=True, nogil=True)
def tt_lookup_kernel(keys, depths, values, cuts, stats, b, depth):
    """``(hit, value, cut)`` for ``(b, depth)``."""
    size = keys.shape[0]
    if size == 0:
        return False, 0.0, False
    stats[LOOKUPS] += 1
    slot = tt_slot(b, depth, size)
    if depths[slot] == depth and keys[slot] == b:
        stats[HITS] += 1
        return True, values[slot], cuts[slot] != 0
    return False, 0.0, False


@nb.njit(cache=True, nogil=True)
def tt_store_kernel(keys, depths, values, cuts, stats, b, depth, value, cut):
    size = keys.shape[0]
    if size == 0:
        return
    slot = tt_slot(b, depth, size)
    keys[slot] = b
    depths[slot] = depth
    values[slot] = value
    cuts[slot] = 1 if cut else 0
    stats[STORES] += 1


@nb.njit(cache=True, nogil=True)
def expectimax_kernel(w, layout, g, b, depth, keys, depths, values, cuts, stats, cut, debug):
    """
    ``cut[0]`` is raised when the subtree was truncated by the depth limit
    rather than solved to the end of the game.
    """
    if depth == 0:
        cut[0] = 1
        return value_kernel(w, layout, b, g)
    k = empty_count_kernel(b)
    if k == 0:
        cut[0] = 1
        return value_kernel(w, layout, b, g)

    hit, cached, cached_cut = tt_lookup_kernel(keys, depths, values, cuts, stats, b, depth)
    if hit:
        if cached_cut:
            cut[0] = 1
        return cached

    outer = cut[0]
    cut[0] = 0
    total = 0.0
    mass = 0.0
    for i in range(16):
        if cell_at(b, i) != 0:
            continue
        for e in range(1, 3):
            p = PROB_TWO if e == 1 else PROB_FOUR
            child = set_cell(b, i, e)
            best = 0.0
            found = False
            for d in range(4):
                after, r = slide_kernel(child, d)
                if after == child:
                    continue
                v = r + expectimax_kernel(
                    w, layout, g, after, depth - 1, keys, depths, values, cuts, stats, cut, debug
                )
                if not found or v > best:
                    best = v
                    found = True
            total += p * best
            mass += p / k
    if debug:
        assert abs(mass - 1.0) < 1e-9
    value = total / k
    sub_cut = cut[0] != 0
    tt_store_kernel(keys, depths, values, cuts, stats, b, depth, value, sub_cut)
    cut[0] = 1 if (outer != 0 or sub_cut) else 0
    return value


class TranspositionTable:
    """
    Direct-mapped cache from ``(afterstate, remaining depth)`` to the expected
    value, replace-on-collision. ``bits=0`` disables it.
    """

    def __init__(self, bits: int = 20):
        capacity = 0 if bits <= 0 else 1 << bits
        self.bits = bits
        self.keys = np.zeros(capacity, dtype=np.uint64)
        self.depths = np.full(capacity, -1, dtype=np.int64)
        self.values = np.zeros(capacity, dtype=np.float64)
        self.cuts = np.zeros(capacity, dtype=np.int8)
        self.stats = np.zeros(3, dtype=np.int64)

    @classmethod
    def disabled(cls) -> "TranspositionTable":
        return cls(0)

    @property
    def capacity(self) -> int:
        return self.keys.shape[0]

    @property
    def enabled(self) -> bool:
        return self.capacity > 0

    @property
    def lookups(self) -> int:
        return int(self.stats[LOOKUPS])

    @property
    def hits(self) -> int:
        return int(self.stats[HITS])

    @property
    def hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def __len__(self) -> int:
        return int(np.count_nonzero(self.depths >= 0))

    def clear(self) -> None:
        self.depths[:] = -1
        self.stats[:] = 0

    def get(self, board: Board, depth: int) -> float | None:
        hit, value, _ = tt_lookup_kernel(
            self.keys, self.depths, self.values, self.cuts, self.stats, board.word, depth
        )
        return float(value) if hit else None

    def put(self, board: Board, depth: int, value: float) -> None:
        tt_store_kernel(
            self.keys, self.depths, self.values, self.cuts, self.stats,
            board.word, depth, float(value), True,
        )

    @property
    def arrays(self) -> Tuple[np.ndarray, ...]:
        return self.keys, self.depths, self.values, self.cuts, self.stats


def expectimax_value(
    afterstate: Board,
    depth: int,
    network: NTupleNetwork,
    tt: TranspositionTable | None = None,
    debug: bool = False,
) -> float:
    if depth < 0:
        raise GameContractError(f"depth must be >= 0, got {depth}")
    tt = tt if tt is not None else TranspositionTable.disabled()
    cut = np.zeros(1, dtype=np.int64)
    return float(
        expectimax_kernel(
            network.weights,
            network.layout,
            network.stage_bits,
            afterstate.word,
            depth,
            *tt.arrays,
            cut,
            debug,
        )
    )


def chance_distribution(afterstate: Board) -> List[Tuple[float, Board]]:
    """Every spawn outcome of ``afterstate`` with its probability."""
    cells = afterstate.cells
    empties = [i for i, e in enumerate(cells) if e == 0]
    k = len(empties)
    out = []
    for i in empties:
        out.append((PROB_TWO / k, afterstate.with_cell(i, 1)))
        out.append((PROB_FOUR / k, afterstate.with_cell(i, 2)))
    return out
