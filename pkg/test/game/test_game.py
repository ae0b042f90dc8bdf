import numpy as np
import pytest
from scipy import stats

from ntuple2048.constants import Move
from ntuple2048.error import ConfigurationError, GameContractError
from ntuple2048.game import (
    initial_state,
    is_terminal,
    legal_moves,
    slide,
    spawn_random_tile,
)
from ntuple2048.schema import Board


def brute_force_left(row):
    """Independent single-row simulator: compress, merge from the wall, compress."""
    tiles = [e for e in row if e]
    out, reward, i = [], 0, 0
    while i < len(tiles):
        if i + 1 < len(tiles) and tiles[i] == tiles[i + 1]:
            merged = min(tiles[i] + 1, 15)
            out.append(merged)
            reward += 2 ** (tiles[i] + 1)
            i += 2
        else:
            out.append(tiles[i])
            i += 1
    return out + [0] * (4 - len(out)), reward


def board_of_rows(*rows):
    return Board.from_cells([e for row in rows for e in row])


def test_row_oracle_all_rows():
    for packed in range(1 << 16):
        row = [(packed >> (4 * i)) & 0xF for i in range(4)]
        board = board_of_rows(row, [0] * 4, [0] * 4, [0] * 4)

        expected, reward = brute_force_left(row)
        outcome = slide(board, Move.LEFT)
        assert list(outcome.afterstate.cells[:4]) == expected
        assert outcome.reward == reward

        expected_r, reward_r = brute_force_left(row[::-1])
        outcome = slide(board, Move.RIGHT)
        assert list(outcome.afterstate.cells[:4]) == expected_r[::-1]
        assert outcome.reward == reward_r


@pytest.mark.parametrize(
    "row, expected, reward",
    [
        ([1, 1, 0, 0], [2, 0, 0, 0], 4),
        ([2, 2, 0, 0], [3, 0, 0, 0], 8),
        ([1, 1, 1, 1], [2, 2, 0, 0], 8),
        ([2, 1, 1, 0], [2, 2, 0, 0], 4),
        ([1, 1, 1, 0], [2, 1, 0, 0], 4),
        ([15, 15, 0, 0], [15, 0, 0, 0], 1 << 16),
    ],
)
def test_slide_left_examples(row, expected, reward):
    outcome = slide(board_of_rows(row, [0] * 4, [0] * 4, [0] * 4), Move.LEFT)
    assert list(outcome.afterstate.cells[:4]) == expected
    assert outcome.reward == reward
    assert outcome.legal


def test_vertical_moves_act_on_columns():
    board = board_of_rows([1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0], [2, 0, 0, 3])
    up = slide(board, Move.UP)
    assert up.afterstate == board_of_rows([2, 0, 0, 3], [2, 0, 0, 0], [0] * 4, [0] * 4)
    assert up.reward == 4
    down = slide(board, Move.DOWN)
    assert down.afterstate == board_of_rows([0] * 4, [0] * 4, [2, 0, 0, 0], [2, 0, 0, 3])
    assert down.reward == 4


def test_empty_board_moves_are_illegal():
    for move in Move:
        outcome = slide(Board(), move)
        assert not outcome.legal
        assert outcome.reward == 0
        assert outcome.afterstate == Board()


def test_slide_conserves_tile_mass(positions):
    for board in positions:
        for move in Move:
            outcome = slide(board, move)
            before = sum(1 << e for e in board.cells if e)
            after = sum(1 << e for e in outcome.afterstate.cells if e)
            assert before == after
            # every merge creates a tile worth its reward, so rewards never exceed the mass
            assert outcome.reward <= after


def test_spawn_forced_placement(rng):
    cells = [1] * 16
    cells[9] = 0
    board = Board.from_cells(cells)
    spawned = spawn_random_tile(board, rng)
    assert spawned.cells[9] in (1, 2)
    assert [c for i, c in enumerate(spawned.cells) if i != 9] == [1] * 15


def test_spawn_on_full_board_is_contract_error(rng):
    with pytest.raises(GameContractError):
        spawn_random_tile(Board.from_cells([1, 2] * 8), rng)


def assert_spawn_statistics(n):
    rng = np.random.default_rng(12345)
    cells = [3] * 16
    empties = [0, 5, 10, 15]
    for i in empties:
        cells[i] = 0
    board = Board.from_cells(cells)

    per_cell = np.zeros(len(empties), dtype=np.int64)
    fours = 0
    for _ in range(n):
        spawned = spawn_random_tile(board, rng).cells
        for j, i in enumerate(empties):
            if spawned[i]:
                per_cell[j] += 1
                fours += spawned[i] == 2

    sigma = np.sqrt(0.1 * 0.9 / n)
    assert abs(fours / n - 0.1) < 4 * sigma
    assert per_cell.sum() == n
    assert stats.chisquare(per_cell).pvalue > 0.01


def test_spawn_statistics():
    assert_spawn_statistics(200_000)


@pytest.mark.slow
def test_spawn_statistics_at_full_size():
    assert_spawn_statistics(1_000_000)


def test_initial_state(rng):
    for _ in range(200):
        board = initial_state(rng)
        tiles = [e for e in board.cells if e]
        assert len(tiles) == 2
        assert set(tiles) <= {1, 2}


def test_initial_state_is_reproducible():
    a = initial_state(np.random.default_rng(99))
    b = initial_state(np.random.default_rng(99))
    assert a == b


def test_is_terminal():
    assert not is_terminal(Board())
    checker = Board.from_cells([1, 2, 1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1])
    assert is_terminal(checker)
    assert legal_moves(checker) == set()
    open_cell = checker.with_cell(5, 0)
    assert not is_terminal(open_cell)


def test_legal_moves():
    center = Board().with_cell(5, 1)
    assert legal_moves(center) == set(Move)
    corner = Board().with_cell(0, 1)
    assert legal_moves(corner) == {Move.RIGHT, Move.DOWN}


def test_board_text_round_trip():
    text = "0 2 0 0\n4 0 0 8\n0 0 0 0\n0 0 0 32768"
    board = Board.from_text(text)
    assert board.cells[1] == 1
    assert board.cells[4] == 2
    assert board.max_tile == 32768
    assert board.empty_count == 12
    assert Board.from_text(board.to_text()) == board


def test_board_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        Board.from_text("3 0 0 0 " + "0 " * 12)
    with pytest.raises(ConfigurationError):
        Board.from_cells([16] + [0] * 15)
    with pytest.raises(ConfigurationError):
        Board.from_cells([0] * 15)
