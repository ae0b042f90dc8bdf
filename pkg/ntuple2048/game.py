"""
Exact 2048 mechanics on a packed 64-bit board.

Rows are moved through precomputed 65,536-entry tables (one per direction
along a row); vertical moves transpose the word, move rows and transpose
back. Every kernel here is a pure function of the board (and of the
explicit ``numpy.random.Generator`` for spawns), so any number of workers
can call them concurrently with their own generators.
"""

from typing import List, Set, Tuple

import numba as nb
import numpy as np

from ntuple2048.constants import MAX_EXPONENT, PROB_TWO, Move
from ntuple2048.error import GameContractError
from ntuple2048.schema import Board, MoveOutcome

UP = 0
RIGHT = 1
DOWN = 2
LEFT = 3

_MASK4 = np.uint64(0xF)
_MASK16 = np.uint64(0xFFFF)
_T1_KEEP = np.uint64(0xF0F00F0FF0F00F0F)
_T1_LEFT = np.uint64(0x0000F0F00000F0F0)
_T1_RIGHT = np.uint64(0x0F0F00000F0F0000)
_T2_KEEP = np.uint64(0xFF00FF0000FF00FF)
_T2_RIGHT = np.uint64(0x00FF00FF00000000)
_T2_LEFT = np.uint64(0x00000000FF00FF00)
_S12 = np.uint64(12)
_S24 = np.uint64(24)


def slide_row_toward_start(tiles: List[int]) -> Tuple[List[int], int]:
    """
    Slide one line of exponents toward index 0. Each tile merges at most once,
    the pair nearest the wall merges first, merged exponents saturate at 15.
    """
    out: List[int] = []
    reward = 0
    merged_last = False
    for e in tiles:
        if e == 0:
            continue
        if out and not merged_last and out[-1] == e:
            out[-1] = min(e + 1, MAX_EXPONENT)
            reward += 1 << (e + 1)
            merged_last = True
        else:
            out.append(e)
            merged_last = False
    return out + [0] * (len(tiles) - len(out)), reward


def _pack_row(tiles: List[int]) -> int:
    return tiles[0] | (tiles[1] << 4) | (tiles[2] << 8) | (tiles[3] << 12)


def _unpack_row(row: int) -> List[int]:
    return [(row >> (4 * i)) & 0xF for i in range(4)]


def _build_row_tables():
    row_left = np.empty(1 << 16, dtype=np.uint16)
    row_right = np.empty(1 << 16, dtype=np.uint16)
    reward_left = np.empty(1 << 16, dtype=np.int32)
    reward_right = np.empty(1 << 16, dtype=np.int32)
    for row in range(1 << 16):
        tiles = _unpack_row(row)
        moved, reward = slide_row_toward_start(tiles)
        row_left[row] = _pack_row(moved)
        reward_left[row] = reward
        moved, reward = slide_row_toward_start(tiles[::-1])
        row_right[row] = _pack_row(moved[::-1])
        reward_right[row] = reward
    return row_left, row_right, reward_left, reward_right


ROW_LEFT, ROW_RIGHT, REWARD_LEFT, REWARD_RIGHT = _build_row_tables()


@nb.njit(inline="always")
def cell_at(b, i):
    return np.int64((b >> np.uint64(4 * i)) & _MASK4)


@nb.njit(inline="always")
def set_cell(b, i, e):
    shift = np.uint64(4 * i)
    return (b & ~(_MASK4 << shift)) | (np.uint64(e) << shift)


@nb.njit(cache=True, nogil=True)
def transpose_kernel(b):
    a = (b & _T1_KEEP) | ((b & _T1_LEFT) << _S12) | ((b & _T1_RIGHT) >> _S12)
    return (a & _T2_KEEP) | ((a & _T2_RIGHT) >> _S24) | ((a & _T2_LEFT) << _S24)


@nb.njit(cache=True, nogil=True)
def slide_kernel(b, d):
    """Return ``(afterstate, reward)``; the move is legal iff afterstate != b."""
    vertical = d == UP or d == DOWN
    t = transpose_kernel(b) if vertical else b
    toward_start = d == UP or d == LEFT
    lut = ROW_LEFT if toward_start else ROW_RIGHT
    rew = REWARD_LEFT if toward_start else REWARD_RIGHT
    new = np.uint64(0)
    reward = 0
    for r in range(4):
        shift = np.uint64(16 * r)
        row = np.int64((t >> shift) & _MASK16)
        new |= np.uint64(lut[row]) << shift
        reward += np.int64(rew[row])
    if vertical:
        new = transpose_kernel(new)
    return new, reward


@nb.njit(cache=True, nogil=True)
def empty_count_kernel(b):
    k = 0
    for i in range(16):
        if cell_at(b, i) == 0:
            k += 1
    return k


@nb.njit(cache=True, nogil=True)
def max_exponent_kernel(b):
    m = 0
    for i in range(16):
        e = cell_at(b, i)
        if e > m:
            m = e
    return m


@nb.njit(cache=True, nogil=True)
def can_move_kernel(b):
    for i in range(16):
        if cell_at(b, i) == 0:
            return True
    for r in range(4):
        for c in range(3):
            if cell_at(b, 4 * r + c) == cell_at(b, 4 * r + c + 1):
                return True
    for r in range(3):
        for c in range(4):
            if cell_at(b, 4 * r + c) == cell_at(b, 4 * r + c + 4):
                return True
    return False


@nb.njit(cache=True, nogil=True)
def spawn_kernel(b, rng):
    """Place a 2 (p=0.9) or 4 (p=0.1) on a uniformly chosen empty cell; full boards pass through."""
    k = empty_count_kernel(b)
    if k == 0:
        return b
    pick = np.int64(rng.random() * k)
    if pick >= k:
        pick = k - 1
    e = 1 if rng.random() < PROB_TWO else 2
    seen = 0
    for i in range(16):
        if cell_at(b, i) == 0:
            if seen == pick:
                return set_cell(b, i, e)
            seen += 1
    return b


@nb.njit(cache=True, nogil=True)
def initial_state_kernel(rng):
    b = spawn_kernel(np.uint64(0), rng)
    return spawn_kernel(b, rng)


def slide(board: Board, move: Move) -> MoveOutcome:
    after, reward = slide_kernel(board.word, move.value)
    after = int(after)
    return MoveOutcome(afterstate=Board(after), reward=int(reward), legal=after != board.packed)


def spawn_random_tile(board: Board, rng: np.random.Generator) -> Board:
    if board.empty_count == 0:
        raise GameContractError("cannot spawn a tile on a full board")
    return Board(int(spawn_kernel(board.word, rng)))


def initial_state(rng: np.random.Generator) -> Board:
    return Board(int(initial_state_kernel(rng)))


def is_terminal(board: Board) -> bool:
    return not can_move_kernel(board.word)


def legal_moves(board: Board) -> Set[Move]:
    moves = set()
    for move in Move:
        after, _ = slide_kernel(board.word, move.value)
        if int(after) != board.packed:
            moves.add(move)
    return moves
