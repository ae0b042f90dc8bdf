from ntuple2048.trainer.checkpoint import (
    TrainerState,
    load_checkpoint,
    read_checkpoint_state,
    save_checkpoint,
)
from ntuple2048.trainer.evaluation import evaluate_checkpoint, evaluate_limit, play_games
from ntuple2048.trainer.engine import Trainer, TrainResult, resume, train

__all__ = [
    "TrainerState",
    "load_checkpoint",
    "read_checkpoint_state",
    "save_checkpoint",
    "evaluate_checkpoint",
    "evaluate_limit",
    "play_games",
    "Trainer",
    "TrainResult",
    "resume",
    "train",
]
