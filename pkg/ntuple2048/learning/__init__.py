from ntuple2048.learning.rules import (
    AutostepState,
    EpisodeBuffer,
    LearningRule,
    TCState,
    autostep_update,
    create_tables,
    delayed_finish,
    delayed_update,
    horizon,
    tc_update,
    td_update,
)
from ntuple2048.learning.carousel import CarouselState, carousel_next_start
from ntuple2048.learning.episode import (
    EpisodeLearner,
    evaluate_action,
    learn_from_episode,
)

__all__ = [
    "AutostepState",
    "EpisodeBuffer",
    "LearningRule",
    "TCState",
    "autostep_update",
    "create_tables",
    "delayed_finish",
    "delayed_update",
    "horizon",
    "tc_update",
    "td_update",
    "CarouselState",
    "carousel_next_start",
    "EpisodeLearner",
    "evaluate_action",
    "learn_from_episode",
]
