import numpy as np
import pytest

from ntuple2048.config import LearningConfig, RunConfig, TrainBudget
from ntuple2048.constants import UpdateRule
from ntuple2048.game import initial_state, is_terminal, legal_moves, slide, spawn_random_tile
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.ntuple.shape import TupleShape
from ntuple2048.schema import Board


@pytest.fixture(scope="session")
def event_loop_policy():
    import asyncio

    return asyncio.DefaultEventLoopPolicy()


@pytest.fixture
def rng():
    return np.random.default_rng(2048)


def _row_tuple(row: int = 0) -> TupleShape:
    return TupleShape("4", tuple(4 * row + c for c in range(4)))


def _small_network(dtype: str = "float64", stage_bits: int = 0) -> NTupleNetwork:
    """Two straight 4-tuples: small enough to allocate in float64 for exact checks."""
    return NTupleNetwork([_row_tuple(0), _row_tuple(1)], stage_bits=stage_bits, dtype=dtype)


def _random_positions(rng: np.random.Generator, count: int, moves: int = 40) -> list[Board]:
    """Mid-game boards reached by random play; never terminal."""
    out = []
    while len(out) < count:
        board = initial_state(rng)
        for _ in range(int(rng.integers(0, moves))):
            options = sorted(legal_moves(board), key=lambda m: m.value)
            outcome = slide(board, options[int(rng.integers(len(options)))])
            nxt = spawn_random_tile(outcome.afterstate, rng)
            if is_terminal(nxt):
                break
            board = nxt
        out.append(board)
    return out


@pytest.fixture
def positions(rng):
    return _random_positions(rng, 50)


@pytest.fixture
def small_run(tmp_path):
    """A seconds-long training config on the small 4-22 architecture."""

    def make(total_actions=2_000, eval_every=1_000, rule=UpdateRule.TC, workers=1, seed=7, **learning):
        return RunConfig(
            arch="4-22",
            learning=LearningConfig(rule=rule, **learning),
            budget=TrainBudget(
                total_actions=total_actions,
                eval_every=eval_every,
                eval_games_1ply=4,
                eval_games_3ply=0,
                workers=workers,
            ),
            seed=seed,
            out_dir=str(tmp_path / "run"),
        )

    return make


@pytest.fixture
def row_tuple():
    return _row_tuple


@pytest.fixture
def small_network():
    return _small_network


@pytest.fixture
def random_positions():
    return _random_positions
