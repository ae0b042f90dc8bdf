import itertools
import math

import numpy as np
import pytest

from ntuple2048.config import SearchLimit
from ntuple2048.constants import PROB_FOUR, PROB_TWO, Move
from ntuple2048.error import GameContractError
from ntuple2048.game import legal_moves, slide
from ntuple2048.learning.episode import best_move_kernel
from ntuple2048.ntuple import NTupleNetwork
from ntuple2048.schema import Board, GameRecord
from ntuple2048.search import SearchContext, choose_move, game_seeds, play_game, summarize
from ntuple2048.search.player import MAX_SEARCH_DEPTH

CHECKER = Board.from_cells([1, 2, 1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1])
# a full board a few plies from the end of the game
ENDGAME = Board.from_cells([1, 1, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 3, 4, 5, 6])


@pytest.fixture
def network(rng):
    return NTupleNetwork.from_architecture("4-22", dtype="float32").randomize(rng)


def test_one_ply_is_greedy(network, positions):
    for board in positions:
        d, _, _, _ = best_move_kernel(
            network.weights, network.layout, network.stage_bits, board.word, False
        )
        assert choose_move(board, network, SearchLimit.plies(1)) == Move(d)


@pytest.mark.parametrize("depth", [2, 3])
def test_deeper_search_returns_a_legal_move(network, random_positions, rng, depth):
    for board in random_positions(rng, 3, moves=300):
        assert choose_move(board, network, SearchLimit.plies(depth, tt_bits=16)) in legal_moves(board)


def test_terminal_board_raises(network):
    with pytest.raises(GameContractError):
        choose_move(CHECKER, network, SearchLimit.plies(2))
    with pytest.raises(GameContractError):
        choose_move(CHECKER, network, SearchLimit.millis(5))


def test_time_mode_returns_a_legal_move(network, positions):
    context = SearchContext(network, SearchLimit.millis(20, tt_bits=16))
    for board in positions[:5]:
        assert context.choose_move(board) in legal_moves(board)
        assert context.last_depth >= 1


def test_time_mode_stops_once_the_tree_is_solved(network):
    context = SearchContext(network, SearchLimit.millis(60_000, tt_bits=16))
    move = context.choose_move(ENDGAME)
    assert move in (Move.RIGHT, Move.LEFT)
    assert 1 <= context.last_depth < MAX_SEARCH_DEPTH


# Fourteen tiles of 16 and up, two free cells in the top-left corner and the
# two repeated values (15 and 14) placed far apart. Spawned tiles can grow to
# 8 at most, so every game from here ends within a handful of moves.
SPARSE_TEMPLATE = [0, 0, 4, 15, 14, 5, 6, 7, 8, 9, 10, 11, 15, 12, 13, 14]
MOVE_ORDER = sorted(Move, key=lambda m: m.value)


def exact_afterstate_value(after: Board, memo: dict) -> float:
    """Expected reward still to come from ``after`` with perfect play to the end of the game."""
    if after.word in memo:
        return memo[after.word]
    empties = [i for i, e in enumerate(after.cells) if e == 0]
    assert empties
    total = 0.0
    for i in empties:
        for e, p in ((1, PROB_TWO), (2, PROB_FOUR)):
            child = after.with_cell(i, e)
            best, found = 0.0, False
            for move in MOVE_ORDER:
                outcome = slide(child, move)
                if not outcome.legal:
                    continue
                v = outcome.reward + exact_afterstate_value(outcome.afterstate, memo)
                if not found or v > best:
                    best, found = v, True
            total += p * best
    memo[after.word] = total / len(empties)
    return memo[after.word]


def exact_best_move(state: Board) -> Move:
    memo = {}
    best_move, best = None, 0.0
    for move in MOVE_ORDER:
        outcome = slide(state, move)
        if not outcome.legal:
            continue
        v = outcome.reward + exact_afterstate_value(outcome.afterstate, memo)
        if best_move is None or v > best:
            best_move, best = move, v
    return best_move


def sparse_boards():
    boards = []
    for first, second in itertools.product(range(3), repeat=2):
        cells = list(SPARSE_TEMPLATE)
        cells[0], cells[1] = first, second
        board = Board.from_cells(cells)
        if legal_moves(board):
            boards.append(board)
    return boards


def test_time_mode_agrees_with_exhaustive_solver(network):
    boards = sparse_boards()
    assert len(boards) >= 5
    assert all(b.empty_count <= 4 for b in boards)
    for board in boards:
        context = SearchContext(network, SearchLimit.millis(60_000, tt_bits=16))
        assert context.choose_move(board) == exact_best_move(board)
        assert context.last_depth < MAX_SEARCH_DEPTH


def test_play_game_is_deterministic(network):
    a = play_game(network, SearchLimit.plies(1), np.random.default_rng(5))
    b = play_game(network, SearchLimit.plies(1), np.random.default_rng(5))
    assert (a.score, a.moves, a.max_tile) == (b.score, b.moves, b.max_tile)
    assert a.moves > 0


def test_greedy_kernel_matches_move_by_move_play(network):
    limit = SearchLimit.plies(1)
    fast = play_game(network, limit, np.random.default_rng(11))
    slow = play_game(network, limit, np.random.default_rng(11), context=SearchContext(network, limit))
    assert (fast.score, fast.moves, fast.max_tile) == (slow.score, slow.moves, slow.max_tile)


def test_two_ply_game_finishes(network):
    record = play_game(network, SearchLimit.plies(2, tt_bits=16), np.random.default_rng(3), seed=3)
    assert record.seed == 3
    assert record.moves > 0
    assert record.max_tile >= 4


def test_summarize():
    records = [
        GameRecord(seed=0, score=100, max_tile=8192, moves=10, ms_per_move=1.0),
        GameRecord(seed=1, score=200, max_tile=16384, moves=10, ms_per_move=1.0),
        GameRecord(seed=2, score=300, max_tile=32768, moves=20, ms_per_move=1.0),
    ]
    summary = summarize(records, SearchLimit.plies(3), wall_s=0.5)
    assert summary.limit == "3-ply"
    assert summary.games == 3
    assert summary.mean_score == 200.0
    assert summary.ci95 == pytest.approx(1.96 * 100.0 / math.sqrt(3))
    assert summary.pct_8192 == 100.0
    assert summary.pct_16384 == pytest.approx(200.0 / 3)
    assert summary.pct_32768 == pytest.approx(100.0 / 3)
    assert summary.moves_per_s == pytest.approx(80.0)
    assert summary.max_tile_histogram == {8192: 1, 16384: 1, 32768: 1}


def test_summarize_without_games():
    summary = summarize([], SearchLimit.millis(50))
    assert summary.games == 0
    assert summary.limit == "50ms"
    assert summary.mean_score is None


def test_game_seeds():
    seeds = [s for s, _ in game_seeds(1, 5)]
    assert len(set(seeds)) == 5
    assert seeds == [s for s, _ in game_seeds(1, 5)]
    assert seeds[3:] == [s for s, _ in game_seeds(1, 2, offset=3)]
    assert seeds != [s for s, _ in game_seeds(2, 5)]
