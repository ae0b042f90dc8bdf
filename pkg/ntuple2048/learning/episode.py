from typing import Tuple

import numba as nb
import numpy as np

from ntuple2048.config import LearningConfig
from ntuple2048.constants import Move
from ntuple2048.error import GameContractError
from ntuple2048.game import is_terminal, max_exponent_kernel, slide, slide_kernel, spawn_kernel
from ntuple2048.learning.carousel import CarouselState
from ntuple2048.learning.rules import LearningRule, finish_kernel, observe_kernel
from ntuple2048.ntuple.network import NTupleNetwork, promote_kernel, stage_kernel, value_kernel
from ntuple2048.schema import Board, EpisodeStats


@nb.njit(cache=True, nogil=True)
def best_move_kernel(w, layout, g, s, promote):
    """
    Greedy afterstate choice: ``(move, afterstate, reward, V(afterstate))``,
    move -1 when no move is legal. Ties go to the first move in UP, RIGHT,
    DOWN, LEFT order.
    """
    best_d = -1
    best_after = s
    best_r = 0
    best_value = 0.0
    best_total = 0.0
    for d in range(4):
        after, r = slide_kernel(s, d)
        if after == s:
            continue
        if promote:
            promote_kernel(w, layout, after, g)
        v = value_kernel(w, layout, after, g)
        total = r + v
        if best_d < 0 or total > best_total:
            best_d = d
            best_after = after
            best_r = r
            best_value = v
            best_total = total
    return best_d, best_after, best_r, best_value


@nb.njit(cache=True, nogil=True)
def record_stage_start(stage, prev_stage, after, seen, start_stages, start_boards, n):
    """
    Note ``after`` as the opening of ``stage`` when play just stepped up into
    it for the first time this episode; returns the updated ``(n, seen)``.
    A stage opens at most once, so ``n`` stays below the number of stages.
    """
    if stage != prev_stage + 1 or ((seen >> stage) & 1) != 0:
        return n, seen
    start_stages[n] = stage
    start_boards[n] = after
    return n + 1, seen | (1 << stage)


@nb.njit(cache=True, nogil=True)
def learn_episode_kernel(
    s0,
    rule,
    delayed,
    w,
    aux0,
    aux1,
    aux2,
    layout,
    g,
    params,
    promote,
    ring_b,
    ring_d,
    meta,
    rng,
    start_stages,
    start_boards,
):
    meta[0] = 0
    meta[1] = 0
    s = s0
    score = 0
    moves = 0
    n_starts = 0
    seen = 0
    prev = np.uint64(0)
    prev_stage = 0
    have_prev = False
    while True:
        d, after, r, v_after = best_move_kernel(w, layout, g, s, promote)
        if d < 0:
            break
        stage = stage_kernel(after, g)
        if have_prev:
            delta = r + v_after - value_kernel(w, layout, prev, g)
            observe_kernel(
                rule, delayed, w, aux0, aux1, aux2, layout, g, params, ring_b, ring_d, meta, prev, delta
            )
            n_starts, seen = record_stage_start(
                stage, prev_stage, after, seen, start_stages, start_boards, n_starts
            )
        prev = after
        prev_stage = stage
        have_prev = True
        score += r
        moves += 1
        s = spawn_kernel(after, rng)
    if have_prev:
        delta = -value_kernel(w, layout, prev, g)
        observe_kernel(
            rule, delayed, w, aux0, aux1, aux2, layout, g, params, ring_b, ring_d, meta, prev, delta
        )
    finish_kernel(rule, delayed, w, aux0, aux1, aux2, layout, g, params, ring_b, ring_d, meta)
    return score, moves, s, n_starts


def evaluate_action(
    board: Board, move: Move, network: NTupleNetwork, promote: bool = False
) -> Tuple[float, Board, int]:
    """``(reward + V(afterstate), afterstate, reward)`` of a legal move."""
    outcome = slide(board, move)
    if not outcome.legal:
        raise GameContractError(f"move {move.name} is illegal on\n{board}")
    if promote:
        network.promote(outcome.afterstate)
    return outcome.reward + network.evaluate(outcome.afterstate), outcome.afterstate, outcome.reward


class EpisodeLearner:
    """
    One worker's learning loop state: a LearningRule (own ring buffer, shared
    network and tables) and scratch space for stage transitions.
    """

    def __init__(
        self,
        network: NTupleNetwork,
        config: LearningConfig,
        tables=None,
        carousel: CarouselState | None = None,
    ):
        self.network = network
        self.config = config
        self.rule = LearningRule(network, config, tables)
        self.carousel = carousel
        self._start_stages = np.zeros(network.stages, dtype=np.int64)
        self._start_boards = np.zeros(network.stages, dtype=np.uint64)

    def run(self, s0: Board, rng: np.random.Generator) -> EpisodeStats:
        if is_terminal(s0):
            raise GameContractError(f"episode cannot start from a terminal board\n{s0}")
        rule = self.rule
        aux0, aux1, aux2 = rule.tables.arrays
        score, moves, final, n_starts = learn_episode_kernel(
            s0.word,
            rule.code,
            rule.delayed,
            self.network.weights,
            aux0,
            aux1,
            aux2,
            self.network.layout,
            self.network.stage_bits,
            rule.params,
            self.config.weight_promotion,
            rule.buffer.boards,
            rule.buffer.deltas,
            rule.buffer.meta,
            rng,
            self._start_stages,
            self._start_boards,
        )
        starts = [
            (int(self._start_stages[i]), int(self._start_boards[i])) for i in range(n_starts)
        ]
        if self.carousel is not None and self.config.carousel:
            for stage, packed in starts:
                self.carousel.record(stage, packed)
        e = int(max_exponent_kernel(np.uint64(final)))
        return EpisodeStats(
            score=int(score),
            moves=int(moves),
            max_tile=0 if e == 0 else 1 << e,
            stage_starts=starts,
        )


def learn_from_episode(
    s0: Board,
    network: NTupleNetwork,
    config: LearningConfig,
    rng: np.random.Generator,
    learner: EpisodeLearner | None = None,
) -> EpisodeStats:
    """
    Play one greedy episode from ``s0`` and learn from it. Without a
    ``learner`` fresh auxiliary tables are created for this episode only.
    """
    learner = learner or EpisodeLearner(network, config)
    return learner.run(s0, rng)
