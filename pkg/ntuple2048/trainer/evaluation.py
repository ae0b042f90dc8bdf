import time
from concurrent.futures import Executor, ThreadPoolExecutor
from typing import List

import numpy as np

from ntuple2048.config import SearchLimit
from ntuple2048.core.log import SpdLog
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.schema import CheckpointRecord, EvalSummary, GameRecord
from ntuple2048.search.player import game_seeds, play_game, summarize


def _log():
    return SpdLog.get_logger("Evaluation", level="INFO", flush=True)


def play_games(
    network: NTupleNetwork,
    limit: SearchLimit,
    games: int,
    base_seed: int,
    executor: Executor | None = None,
    offset: int = 0,
) -> List[GameRecord]:
    """
    Play ``games`` games with seeds derived from ``base_seed``. Records come
    back in seed order whatever the executor's scheduling.
    """
    seeds = game_seeds(base_seed, games, offset)

    def one(item):
        seed, rng = item
        return play_game(network, limit, rng, seed=seed)

    if executor is None:
        return [one(item) for item in seeds]
    return list(executor.map(one, seeds))


def evaluate_limit(
    network: NTupleNetwork,
    limit: SearchLimit,
    games: int,
    base_seed: int,
    workers: int = 1,
) -> tuple[EvalSummary, List[GameRecord]]:
    start = time.perf_counter()
    if workers > 1 and games > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="eval") as pool:
            records = play_games(network, limit, games, base_seed, pool)
    else:
        records = play_games(network, limit, games, base_seed)
    wall = time.perf_counter() - start
    summary = summarize(records, limit, wall_s=wall if records else None)
    return summary, records


def evaluate_checkpoint(
    network: NTupleNetwork,
    n1: int,
    n3: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> CheckpointRecord:
    """
    Pure inference: ``n1`` games at 1-ply and ``n3`` at 3-ply with fresh seeds
    drawn from ``rng``. Counters and wall time are left for the trainer to fill.
    """
    seed1, seed3 = (int(s) for s in rng.integers(0, 2**62, size=2))
    one_ply, _ = evaluate_limit(network, SearchLimit.plies(1), n1, seed1, workers)
    three_ply, _ = evaluate_limit(network, SearchLimit.plies(3), n3, seed3, workers)
    # the tile histogram follows the 3-ply games when there are any
    headline = three_ply if three_ply.games else one_ply
    _log().info(
        f"1-ply {one_ply.mean_score or 0.0:.0f} +- {one_ply.ci95 or 0.0:.0f} ({n1} games), "
        f"3-ply {three_ply.mean_score or 0.0:.0f} +- {three_ply.ci95 or 0.0:.0f} ({n3} games)"
    )
    return CheckpointRecord(
        actions=0,
        episodes=0,
        score1=one_ply.mean_score or 0.0,
        ci1=one_ply.ci95 or 0.0,
        score3=three_ply.mean_score or 0.0,
        ci3=three_ply.ci95 or 0.0,
        max_tile_32768_pct=headline.pct_32768 or 0.0,
        max_tile_16384_pct=headline.pct_16384 or 0.0,
        wall_s=0.0,
        max_tile_histogram=headline.max_tile_histogram,
    )
