from enum import Enum
from typing import Dict, Literal

from dynaconf import Dynaconf


settings = Dynaconf(
    envvar_prefix="NTUPLE2048",
    settings_files=["settings.toml", ".secrets.toml"],
    load_dotenv=True,
)


def get_default_out_dir() -> str | None:
    """Output directory taken from ``NTUPLE2048_OUT_DIR`` (or settings.toml)."""
    return settings.get("OUT_DIR", None)


def get_log_dir() -> str:
    return settings.get("LOG_DIR", ".log")


# alphabet size: exponents 0..15 (empty, 2, 4, ..., 32768)
ALPHABET = 16
MAX_EXPONENT = 15
BOARD_CELLS = 16
MAX_STAGE_BITS = 4

PROB_TWO = 0.9
PROB_FOUR = 0.1

VIEWS = 8
WEIGHT_DTYPE = "float32"

HORIZON_CUTOFF = 0.1

CARD_INITSTATES = 1000

LevelType = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class Move(Enum):
    UP = 0
    RIGHT = 1
    DOWN = 2
    LEFT = 3

    @property
    def is_vertical(self) -> bool:
        return self in (Move.UP, Move.DOWN)

    @property
    def is_horizontal(self) -> bool:
        return self in (Move.LEFT, Move.RIGHT)


class UpdateRule(Enum):
    TD = "td"
    TC = "tc"
    AUTOSTEP = "autostep"

    @property
    def code(self) -> int:
        return RULE_CODES[self]

    @property
    def is_adaptive(self) -> bool:
        return self in (UpdateRule.TC, UpdateRule.AUTOSTEP)


RULE_CODES: Dict[UpdateRule, int] = {
    UpdateRule.TD: 0,
    UpdateRule.TC: 1,
    UpdateRule.AUTOSTEP: 2,
}


class SearchMode(Enum):
    DEPTH = "depth"
    TIME = "time"


class ExitCode(Enum):
    OK = 0
    USAGE = 2
    IO = 3
    FORMAT = 4


# tiles reported in evaluation summaries
REPORTED_TILES = (8192, 16384, 32768)

CURVE_HEADER = (
    "actions",
    "episodes",
    "score1",
    "ci1",
    "score3",
    "ci3",
    "max_tile_32768_pct",
    "max_tile_16384_pct",
    "wall_s",
)

GAME_RECORD_HEADER = ("seed", "score", "max_tile", "moves", "ms_per_move")
