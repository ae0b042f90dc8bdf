from ntuple2048.search.expectimax import (
    TranspositionTable,
    chance_distribution,
    expectimax_value,
)
from ntuple2048.search.player import (
    SearchContext,
    choose_move,
    game_seeds,
    play_game,
    summarize,
)

__all__ = [
    "TranspositionTable",
    "chance_distribution",
    "expectimax_value",
    "SearchContext",
    "choose_move",
    "game_seeds",
    "play_game",
    "summarize",
]
