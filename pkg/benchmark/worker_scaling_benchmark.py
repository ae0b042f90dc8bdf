import os
import tempfile
import time

from ntuple2048.config import LearningConfig, RunConfig, TrainBudget
from ntuple2048.trainer import train

ACTIONS = 200_000


def run(workers, out_dir):
    config = RunConfig(
        arch="42-33",
        learning=LearningConfig(),
        budget=TrainBudget(
            total_actions=ACTIONS,
            eval_every=ACTIONS,
            eval_games_1ply=0,
            eval_games_3ply=0,
            workers=workers,
        ),
        out_dir=out_dir,
    )
    start_time = time.perf_counter()
    result = train(config)
    return result.actions / (time.perf_counter() - start_time)


with tempfile.TemporaryDirectory() as tmp:
    # compile the kernels once
    run(1, os.path.join(tmp, "warmup"))
    base = None
    for workers in (1, 2, 4, 8):
        if workers > (os.cpu_count() or 1):
            break
        rate = run(workers, os.path.join(tmp, f"w{workers}"))
        base = base or rate
        print(f"{workers} workers: {rate:,.0f} actions/s ({rate / base:.2f}x)")
