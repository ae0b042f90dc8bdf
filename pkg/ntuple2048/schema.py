from typing import Dict, List, Sequence, Tuple

import numpy as np
from msgspec import Struct, field

from ntuple2048.constants import BOARD_CELLS, MAX_EXPONENT
from ntuple2048.error import ConfigurationError


class Board(Struct, frozen=True, gc=False):
    """
    4x4 grid of tile exponents packed into one 64-bit word, 4 bits per cell,
    row-major: cell ``i`` (row ``i // 4``, column ``i % 4``) lives in bits ``4i..4i+3``.
    Exponent 0 is an empty square, exponent ``e >= 1`` is a tile of value ``2**e``.
    """

    packed: int = 0

    @classmethod
    def from_cells(cls, cells: Sequence[int]) -> "Board":
        if len(cells) != BOARD_CELLS:
            raise ConfigurationError(f"a board has {BOARD_CELLS} cells, got {len(cells)}")
        packed = 0
        for i, e in enumerate(cells):
            e = int(e)
            if not 0 <= e <= MAX_EXPONENT:
                raise ConfigurationError(f"cell {i} exponent {e} outside [0, {MAX_EXPONENT}]")
            packed |= e << (4 * i)
        return cls(packed)

    @classmethod
    def from_text(cls, text: str) -> "Board":
        """
        Parse 4 lines of 4 whitespace-separated tile values (0 for empty), e.g. ``0 2 0 0``.
        """
        values = text.split()
        if len(values) != BOARD_CELLS:
            raise ConfigurationError(f"expected {BOARD_CELLS} tile values, got {len(values)}")
        cells = []
        for v in values:
            v = int(v)
            if v == 0:
                cells.append(0)
                continue
            if v < 2 or v & (v - 1):
                raise ConfigurationError(f"tile value {v} is not a power of two >= 2")
            cells.append(v.bit_length() - 1)
        return cls.from_cells(cells)

    @property
    def cells(self) -> Tuple[int, ...]:
        return tuple((self.packed >> (4 * i)) & 0xF for i in range(BOARD_CELLS))

    @property
    def word(self) -> np.uint64:
        return np.uint64(self.packed)

    @property
    def empty_count(self) -> int:
        return sum(1 for e in self.cells if e == 0)

    @property
    def max_exponent(self) -> int:
        return max(self.cells)

    @property
    def max_tile(self) -> int:
        e = self.max_exponent
        return 0 if e == 0 else 1 << e

    def cell(self, row: int, col: int) -> int:
        return (self.packed >> (4 * (4 * row + col))) & 0xF

    def with_cell(self, index: int, exponent: int) -> "Board":
        cells = list(self.cells)
        cells[index] = exponent
        return Board.from_cells(cells)

    def to_text(self) -> str:
        cells = self.cells
        rows = []
        for r in range(4):
            rows.append(
                " ".join(str(0 if e == 0 else 1 << e) for e in cells[4 * r : 4 * r + 4])
            )
        return "\n".join(rows)

    def __str__(self) -> str:
        return self.to_text()


class MoveOutcome(Struct, frozen=True, gc=False):
    afterstate: Board
    reward: int
    legal: bool


class EpisodeStats(Struct, gc=False):
    score: int
    moves: int
    max_tile: int
    # (stage, packed afterstate) for every s'_t whose stage is one above stage(s'_{t-1})
    stage_starts: List[Tuple[int, int]] = field(default_factory=list)


class GameRecord(Struct, gc=False):
    seed: int
    score: int
    max_tile: int
    moves: int
    ms_per_move: float

    def to_csv_row(self) -> str:
        return f"{self.seed},{self.score},{self.max_tile},{self.moves},{self.ms_per_move:.6f}"


class EvalSummary(Struct, kw_only=True):
    limit: str
    games: int
    mean_score: float | None = None
    ci95: float | None = None
    pct_8192: float | None = None
    pct_16384: float | None = None
    pct_32768: float | None = None
    moves_per_s: float | None = None
    max_tile_histogram: Dict[int, int] = field(default_factory=dict)


class CheckpointRecord(Struct, kw_only=True):
    actions: int
    episodes: int
    score1: float
    ci1: float
    score3: float
    ci3: float
    max_tile_32768_pct: float
    max_tile_16384_pct: float
    wall_s: float
    max_tile_histogram: Dict[int, int] = field(default_factory=dict)

    def to_csv_row(self) -> str:
        return (
            f"{self.actions},{self.episodes},{self.score1:.2f},{self.ci1:.2f},"
            f"{self.score3:.2f},{self.ci3:.2f},{self.max_tile_32768_pct:.2f},"
            f"{self.max_tile_16384_pct:.2f},{self.wall_s:.1f}"
        )
