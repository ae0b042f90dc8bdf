"""
The eight rotations/reflections of the 4x4 board as cell permutations.

``SYMMETRIES[k][cell]`` is the source cell read by view ``k`` at ``cell``:
``view_k(b)[cell] == b[SYMMETRIES[k][cell]]``. Views 0..3 are the rotations
of the board (identity first), views 4..7 the rotations of its mirror.
"""

from typing import List, Tuple

import numpy as np

from ntuple2048.constants import BOARD_CELLS, VIEWS
from ntuple2048.schema import Board

Permutation = Tuple[int, ...]


def _rotate(perm: Permutation) -> Permutation:
    # rotate clockwise: new[r][c] = old[3 - c][r]
    return tuple(perm[4 * (3 - (i % 4)) + i // 4] for i in range(BOARD_CELLS))


def _mirror(perm: Permutation) -> Permutation:
    return tuple(perm[4 * (i // 4) + 3 - (i % 4)] for i in range(BOARD_CELLS))


def _build() -> List[Permutation]:
    identity = tuple(range(BOARD_CELLS))
    views = []
    for start in (identity, _mirror(identity)):
        perm = start
        for _ in range(4):
            views.append(perm)
            perm = _rotate(perm)
    return views


SYMMETRIES: List[Permutation] = _build()
SYMMETRY_TABLE = np.array(SYMMETRIES, dtype=np.int64)

assert len(SYMMETRIES) == VIEWS


def inverse(k: int) -> int:
    """Index of the view that undoes view ``k``."""
    perm = SYMMETRIES[k]
    for j, other in enumerate(SYMMETRIES):
        if all(perm[other[i]] == i for i in range(BOARD_CELLS)):
            return j
    raise ValueError(f"view {k} has no inverse")


def apply_view(board: Board, k: int) -> Board:
    cells = board.cells
    return Board.from_cells([cells[src] for src in SYMMETRIES[k]])


def symmetric_views(board: Board) -> List[Board]:
    return [apply_view(board, k) for k in range(VIEWS)]


def map_cells(cells, k: int) -> Tuple[int, ...]:
    """Image of a set of cell indices under view ``k`` taken as a cell map."""
    perm = SYMMETRIES[k]
    return tuple(perm[c] for c in cells)
