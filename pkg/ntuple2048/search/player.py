import math
import time
from typing import Dict, Iterable, List, Tuple

import numba as nb
import numpy as np

from ntuple2048.config import SearchLimit
from ntuple2048.constants import REPORTED_TILES, Move, SearchMode
from ntuple2048.core.log import SpdLog
from ntuple2048.error import GameContractError
from ntuple2048.game import initial_state_kernel, max_exponent_kernel, slide_kernel, spawn_kernel
from ntuple2048.learning.episode import best_move_kernel
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.schema import Board, EvalSummary, GameRecord
from ntuple2048.search.expectimax import TranspositionTable, expectimax_kernel

# iterative deepening never goes past this many plies
MAX_SEARCH_DEPTH = 32


@nb.njit(cache=True, nogil=True)
def root_kernel(w, layout, g, s, depth, keys, depths, values, cuts, stats, cut):
    """Best move at a fixed depth; ties go to the first move in UP, RIGHT, DOWN, LEFT order."""
    best_d = -1
    best = 0.0
    for d in range(4):
        after, r = slide_kernel(s, d)
        if after == s:
            continue
        v = r + expectimax_kernel(
            w, layout, g, after, depth - 1, keys, depths, values, cuts, stats, cut, False
        )
        if best_d < 0 or v > best:
            best_d = d
            best = v
    return best_d


@nb.njit(cache=True, nogil=True)
def greedy_game_kernel(w, layout, g, rng):
    """A whole 1-ply game from a fresh start: ``(score, moves, final board)``."""
    s = initial_state_kernel(rng)
    score = 0
    moves = 0
    while True:
        d, after, r, _ = best_move_kernel(w, layout, g, s, False)
        if d < 0:
            break
        score += r
        moves += 1
        s = spawn_kernel(after, rng)
    return score, moves, s


class SearchContext:
    """Single-worker search state: the network, a limit and a private transposition table."""

    def __init__(self, network: NTupleNetwork, limit: SearchLimit, tt: TranspositionTable | None = None):
        self._log = SpdLog.get_logger(type(self).__name__, level="INFO", flush=True)
        self.network = network
        self.limit = limit
        self.tt = tt if tt is not None else TranspositionTable(limit.tt_bits)
        self.last_depth = 0
        self._cut = np.zeros(1, dtype=np.int64)

    def _root(self, state: Board, depth: int) -> int:
        net = self.network
        return int(
            root_kernel(
                net.weights, net.layout, net.stage_bits, state.word, depth, *self.tt.arrays, self._cut
            )
        )

    def _move_value(self, after, reward: int, depth: int) -> float:
        net = self.network
        return reward + float(
            expectimax_kernel(
                net.weights, net.layout, net.stage_bits, after, depth - 1,
                *self.tt.arrays, self._cut, False,
            )
        )

    def _timed(self, state: Board) -> int:
        budget = self.limit.time_budget_ms / 1000.0
        start = time.perf_counter()
        children = []
        for d in range(4):
            after, r = slide_kernel(state.word, d)
            if after != state.word:
                children.append((d, np.uint64(after), int(r)))
        chosen = children[0][0]
        self.last_depth = 0
        for depth in range(1, MAX_SEARCH_DEPTH + 1):
            self._cut[0] = 0
            best_d, best, complete = -1, 0.0, True
            # one root move per batch; the clock is read between batches
            for d, after, r in children:
                if depth > 1 and time.perf_counter() - start >= budget:
                    complete = False
                    break
                v = self._move_value(after, r, depth)
                if best_d < 0 or v > best:
                    best_d, best = d, v
            if not complete:
                break
            chosen = best_d
            self.last_depth = depth
            if self._cut[0] == 0:
                # every line reached the end of the game
                break
            if time.perf_counter() - start >= budget:
                break
        self._log.debug(f"iterative deepening reached depth {self.last_depth}")
        return chosen

    def choose_move(self, state: Board) -> Move:
        if self.limit.mode == SearchMode.DEPTH:
            d = self._root(state, self.limit.depth)
            self.last_depth = self.limit.depth
        else:
            d = self._timed(state) if self._any_legal(state) else -1
        if d < 0:
            raise GameContractError(f"no legal move on a terminal board\n{state}")
        return Move(d)

    @staticmethod
    def _any_legal(state: Board) -> bool:
        return any(slide_kernel(state.word, d)[0] != state.word for d in range(4))


def choose_move(
    state: Board,
    network: NTupleNetwork,
    limit: SearchLimit,
    tt: TranspositionTable | None = None,
) -> Move:
    return SearchContext(network, limit, tt).choose_move(state)


def play_game(
    network: NTupleNetwork,
    limit: SearchLimit,
    rng: np.random.Generator,
    seed: int = -1,
    context: SearchContext | None = None,
) -> GameRecord:
    """
    Play one game from a fresh start. The 1-ply path runs entirely in one
    kernel and consumes ``rng`` exactly like the move-by-move path.
    """
    start = time.perf_counter()
    if limit.is_greedy and context is None:
        score, moves, final = greedy_game_kernel(
            network.weights, network.layout, network.stage_bits, rng
        )
        score, moves, final = int(score), int(moves), np.uint64(final)
    else:
        context = context or SearchContext(network, limit)
        s = np.uint64(initial_state_kernel(rng))
        score = moves = 0
        while True:
            if not SearchContext._any_legal(Board(int(s))):
                break
            move = context.choose_move(Board(int(s)))
            after, r = slide_kernel(s, move.value)
            score += int(r)
            moves += 1
            s = np.uint64(spawn_kernel(np.uint64(after), rng))
        final = s
    elapsed = time.perf_counter() - start
    e = int(max_exponent_kernel(final))
    return GameRecord(
        seed=seed,
        score=score,
        max_tile=0 if e == 0 else 1 << e,
        moves=moves,
        ms_per_move=1000.0 * elapsed / moves if moves else 0.0,
    )


def summarize(records: Iterable[GameRecord], limit: SearchLimit | str, wall_s: float | None = None) -> EvalSummary:
    records = list(records)
    label = str(limit)
    if not records:
        return EvalSummary(limit=label, games=0)
    scores = np.array([r.score for r in records], dtype=np.float64)
    n = len(records)
    ci = 1.96 * scores.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    histogram: Dict[int, int] = {}
    for r in records:
        histogram[r.max_tile] = histogram.get(r.max_tile, 0) + 1
    pct = {tile: 100.0 * sum(1 for r in records if r.max_tile >= tile) / n for tile in REPORTED_TILES}
    total_moves = sum(r.moves for r in records)
    if wall_s is None:
        wall_s = sum(r.ms_per_move * r.moves for r in records) / 1000.0
    return EvalSummary(
        limit=label,
        games=n,
        mean_score=float(scores.mean()),
        ci95=float(ci),
        pct_8192=pct[8192],
        pct_16384=pct[16384],
        pct_32768=pct[32768],
        moves_per_s=total_moves / wall_s if wall_s > 0 else 0.0,
        max_tile_histogram=dict(sorted(histogram.items())),
    )


def game_seeds(base_seed: int, games: int, offset: int = 0) -> List[Tuple[int, np.random.Generator]]:
    """Per-game seeds and generators derived from one base seed."""
    out = []
    for i in range(offset, offset + games):
        seed = int(np.random.SeedSequence([base_seed, i]).generate_state(1)[0])
        out.append((seed, np.random.default_rng(seed)))
    return out
