import asyncio
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List

import msgspec
import numpy as np
from msgspec import Struct

from ntuple2048.config import RunConfig
from ntuple2048.constants import CURVE_HEADER
from ntuple2048.core.entity import TaskManager
from ntuple2048.core.log import SpdLog
from ntuple2048.error import CheckpointError, ConfigurationError
from ntuple2048.game import initial_state
from ntuple2048.learning.carousel import CarouselState
from ntuple2048.learning.episode import EpisodeLearner
from ntuple2048.learning.rules import create_tables
from ntuple2048.ntuple.io import save
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.ntuple.shape import get_architecture
from ntuple2048.schema import CheckpointRecord
from ntuple2048.trainer.checkpoint import (
    TrainerState,
    load_checkpoint,
    rng_from_state,
    rng_to_state,
    save_checkpoint,
)
from ntuple2048.trainer.evaluation import evaluate_checkpoint

CHECKPOINT_FILE = "checkpoint.ntck"
NETWORK_FILE = "network.ntnw"
CURVE_FILE = "curve.csv"
CURVE_JSONL_FILE = "curve.jsonl"
RUN_CONFIG_FILE = "run_config.toml"


class TrainResult(Struct):
    network: NTupleNetwork
    curve: List[CheckpointRecord]
    curve_path: Path
    checkpoint_path: Path
    actions: int
    episodes: int


class Trainer:
    """
    Runs ``workers`` learners against one shared network until the action
    budget is used. Workers are threads running the nogil episode kernel;
    at every evaluation tick they all stop at an episode boundary, the
    network is evaluated and a checkpoint is written, then they resume.
    """

    def __init__(
        self,
        config: RunConfig,
        network: NTupleNetwork | None = None,
        tables=None,
        state: TrainerState | None = None,
        enable_signal_handlers: bool = False,
    ):
        self._log = SpdLog.get_logger(type(self).__name__, level="INFO", flush=True)
        if config.out_dir is None:
            raise ConfigurationError("training needs an output directory")
        self._config = config
        self._out_dir = Path(config.out_dir)
        self._signals = enable_signal_handlers
        learning = config.learning
        budget = config.budget

        self.network = network if network is not None else NTupleNetwork.from_architecture(
            config.arch, stage_bits=learning.stage_bits
        )
        self.tables = tables if tables is not None else create_tables(self.network, learning)
        self.carousel = CarouselState(learning.stage_bits)

        workers = budget.workers
        self._rngs = [np.random.default_rng([config.seed, w]) for w in range(workers)]
        self._eval_rng = np.random.default_rng([config.seed, 1 << 20])
        self._worker_actions = [0] * workers
        self._worker_episodes = [0] * workers
        self._next_eval = budget.eval_every
        self._checkpoints = 0
        self._wall_s = 0.0
        self._target = 0
        self.curve: List[CheckpointRecord] = []
        if state is not None:
            self._restore(state)

        self._learners = [
            EpisodeLearner(self.network, learning, self.tables, self.carousel)
            for _ in range(workers)
        ]
        self._task_manager: TaskManager | None = None

    @classmethod
    def from_checkpoint(
        cls,
        path: str | Path,
        config: RunConfig | None = None,
        enable_signal_handlers: bool = False,
    ) -> "Trainer":
        """
        Continue a run. ``config`` may change the budget and output directory;
        the architecture and learning setup must match the checkpoint.
        """
        network, tables, state = load_checkpoint(path)
        stored = RunConfig.from_flat(state.config)
        if config is not None:
            if config.arch != stored.arch:
                raise CheckpointError(
                    f"checkpoint was trained with {stored.arch}, not {config.arch}"
                )
            if config.learning != stored.learning:
                raise CheckpointError("learning configuration differs from the checkpoint's")
            stored.budget = config.budget
            stored.out_dir = config.out_dir or stored.out_dir
        expected = get_architecture(stored.arch).shapes
        if [s.locations for s in expected] != [s.locations for s in network.shapes]:
            raise CheckpointError(f"network tuples do not match architecture {stored.arch}")
        if network.stage_bits != stored.learning.stage_bits:
            raise CheckpointError(
                f"network has {network.stages} stages, config asks for {1 << stored.learning.stage_bits}"
            )
        return cls(stored, network, tables, state, enable_signal_handlers)

    def _restore(self, state: TrainerState) -> None:
        workers = len(self._rngs)
        for w, rng_state in enumerate(state.rng_states[:workers]):
            self._rngs[w] = rng_from_state(rng_state)
        # workers new to this run get streams keyed by the resume point, never [seed, w]
        for w in range(len(state.rng_states), workers):
            self._rngs[w] = np.random.default_rng(
                np.random.SeedSequence([self._config.seed, w], spawn_key=(state.actions,))
            )
        if state.eval_rng:
            self._eval_rng = rng_from_state(state.eval_rng)
        if len(state.worker_actions) == workers:
            self._worker_actions = list(state.worker_actions)
        else:
            # worker count changed: keep the total exact on worker 0
            self._worker_actions = [0] * workers
            self._worker_actions[0] = state.actions
        self._worker_episodes = [0] * workers
        self._worker_episodes[0] = state.episodes
        self._next_eval = state.next_eval or self._config.budget.eval_every
        self._checkpoints = state.checkpoints
        self._wall_s = state.wall_s
        if state.carousel:
            self.carousel.load_state(state.carousel)

    @property
    def actions(self) -> int:
        return sum(self._worker_actions)

    @property
    def episodes(self) -> int:
        return sum(self._worker_episodes)

    @property
    def curve_path(self) -> Path:
        return self._out_dir / CURVE_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self._out_dir / CHECKPOINT_FILE

    def _state(self) -> TrainerState:
        return TrainerState(
            arch=self._config.arch,
            config=self._config.to_flat(),
            actions=self.actions,
            episodes=self.episodes,
            worker_actions=list(self._worker_actions),
            next_eval=self._next_eval,
            checkpoints=self._checkpoints,
            wall_s=self._wall_s,
            rng_states=[rng_to_state(rng) for rng in self._rngs],
            eval_rng=rng_to_state(self._eval_rng),
            carousel=self.carousel.to_state(),
        )

    def _prepare_out_dir(self) -> None:
        self._out_dir.mkdir(parents=True, exist_ok=True)
        self._config.to_file(self._out_dir / RUN_CONFIG_FILE)
        if not self.curve_path.exists() or self.curve_path.stat().st_size == 0:
            self.curve_path.write_text(",".join(CURVE_HEADER) + "\n")

    def _work(self, w: int) -> None:
        learner = self._learners[w]
        rng = self._rngs[w]
        use_carousel = self._config.learning.carousel
        while self.actions < self._target and not self._task_manager.is_shutting_down:
            if use_carousel:
                start = self.carousel.next_start(rng)
            else:
                start = initial_state(rng)
            stats = learner.run(start, rng)
            self._worker_actions[w] += stats.moves
            self._worker_episodes[w] += 1
            if use_carousel:
                self.carousel.advance()

    async def _segment(self, executor: ThreadPoolExecutor, target: int) -> None:
        loop = asyncio.get_running_loop()
        self._target = target
        actions, episodes = self.actions, self.episodes
        start = time.perf_counter()

        async def worker(w: int):
            await loop.run_in_executor(executor, self._work, w)

        tasks = [
            self._task_manager.create_task(worker(w), name=f"worker-{w}")
            for w in range(len(self._learners))
        ]
        await asyncio.gather(*tasks)
        elapsed = time.perf_counter() - start
        done = self.actions - actions
        self._log.info(
            f"{self.actions} actions, {self.episodes} episodes "
            f"({done / elapsed if elapsed > 0 else 0.0:.0f} actions/s, "
            f"{(self.episodes - episodes) / elapsed if elapsed > 0 else 0.0:.1f} episodes/s)"
        )

    def _checkpoint_tick(self) -> CheckpointRecord:
        budget = self._config.budget
        record = evaluate_checkpoint(
            self.network,
            budget.eval_games_1ply,
            budget.eval_games_3ply,
            self._eval_rng,
            workers=budget.workers,
        )
        record = msgspec.structs.replace(
            record, actions=self.actions, episodes=self.episodes, wall_s=self._wall_s
        )
        self.curve.append(record)
        with open(self.curve_path, "a") as f:
            f.write(record.to_csv_row() + "\n")
        with open(self._out_dir / CURVE_JSONL_FILE, "ab") as f:
            f.write(msgspec.json.encode(record) + b"\n")
        self._checkpoints += 1
        return record

    def _advance_next_eval(self) -> None:
        every = self._config.budget.eval_every
        while self._next_eval <= self.actions:
            self._next_eval += every

    async def run(self) -> TrainResult:
        self._task_manager = TaskManager(
            asyncio.get_running_loop(), enable_signal_handlers=self._signals
        )
        self._prepare_out_dir()
        budget = self._config.budget
        self._log.info(
            f"training {self._config.arch} with {self._config.learning.describe()}, "
            f"{budget.workers} workers, {self.actions}/{budget.total_actions} actions done"
        )
        executor = ThreadPoolExecutor(max_workers=budget.workers, thread_name_prefix="learner")
        try:
            while self.actions < budget.total_actions and not self._task_manager.is_shutting_down:
                start = time.perf_counter()
                await self._segment(executor, min(self._next_eval, budget.total_actions))
                self._wall_s += time.perf_counter() - start
                if self.actions >= self._next_eval:
                    start = time.perf_counter()
                    self._checkpoint_tick()
                    self._wall_s += time.perf_counter() - start
                    self._advance_next_eval()
                    save_checkpoint(self.checkpoint_path, self.network, self.tables, self._state())
        finally:
            executor.shutdown(wait=True)
            await self._task_manager.cancel()
            self._task_manager.remove_signal_handlers()

        if self._task_manager.is_shutting_down:
            self._log.warning(f"training interrupted at {self.actions} actions")
        save_checkpoint(self.checkpoint_path, self.network, self.tables, self._state())
        save(self.network, self._out_dir / NETWORK_FILE)
        return TrainResult(
            network=self.network,
            curve=list(self.curve),
            curve_path=self.curve_path,
            checkpoint_path=self.checkpoint_path,
            actions=self.actions,
            episodes=self.episodes,
        )

    def start(self) -> TrainResult:
        loop = asyncio.new_event_loop()
        try:
            return loop.run_until_complete(self.run())
        finally:
            loop.close()


def train(config: RunConfig, enable_signal_handlers: bool = False) -> TrainResult:
    return Trainer(config, enable_signal_handlers=enable_signal_handlers).start()


def resume(
    checkpoint_path: str | Path,
    config: RunConfig | None = None,
    enable_signal_handlers: bool = False,
) -> TrainResult:
    return Trainer.from_checkpoint(checkpoint_path, config, enable_signal_handlers).start()
