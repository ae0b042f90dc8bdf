import time

import numpy as np

from ntuple2048.config import SearchLimit
from ntuple2048.ntuple import NTupleNetwork
from ntuple2048.search import play_game


def benchmark(func, rounds=3):
    elapsed, count = 0.0, 0
    for _ in range(rounds):
        start_time = time.perf_counter()
        count += func()
        elapsed += time.perf_counter() - start_time
    return count / elapsed


rng = np.random.default_rng(0)

for arch in ("4-22", "42-33", "42-33-5"):
    network = NTupleNetwork.from_architecture(arch).randomize(rng, scale=0.01)
    # compile before timing
    play_game(network, SearchLimit.plies(1), np.random.default_rng(0))

    def greedy_games(network=network):
        moves = 0
        for seed in range(10):
            moves += play_game(network, SearchLimit.plies(1), np.random.default_rng(seed)).moves
        return moves

    def two_ply_game(network=network):
        return play_game(network, SearchLimit.plies(2, tt_bits=18), np.random.default_rng(1)).moves

    print(f"{arch}: {benchmark(greedy_games):,.0f} greedy moves/s, {benchmark(two_ply_game, rounds=1):,.0f} 2-ply moves/s")
