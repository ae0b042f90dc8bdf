import threading
from collections import deque
from typing import Deque, Dict, List

import numpy as np

from ntuple2048.constants import CARD_INITSTATES
from ntuple2048.error import ConfigurationError
from ntuple2048.game import initial_state
from ntuple2048.schema import Board


class CarouselState:
    """
    Stage pointer (1-based, 1 means a fresh game) and, for stages ``2..2**g``,
    the last ``capacity`` afterstates that opened that stage.
    """

    def __init__(self, stage_bits: int, capacity: int = CARD_INITSTATES):
        self.stage_bits = stage_bits
        self.capacity = capacity
        self.pointer = 1
        self._initstates: Dict[int, Deque[int]] = {
            p: deque(maxlen=capacity) for p in range(2, (1 << stage_bits) + 1)
        }
        self._lock = threading.Lock()

    @property
    def stages(self) -> int:
        return 1 << self.stage_bits

    def record(self, stage: int, packed: int) -> None:
        """Remember the afterstate that entered 0-based ``stage``."""
        pointer = stage + 1
        if pointer not in self._initstates:
            return
        with self._lock:
            self._initstates[pointer].append(int(packed))

    def size(self, pointer: int) -> int:
        states = self._initstates.get(pointer)
        return len(states) if states is not None else 0

    def next_start(self, rng: np.random.Generator) -> Board:
        with self._lock:
            pointer = self.pointer
            states = self._initstates.get(pointer)
            if pointer == 1 or not states:
                return initial_state(rng)
            return Board(states[int(rng.integers(len(states)))])

    def advance(self) -> int:
        with self._lock:
            nxt = self.pointer + 1
            if nxt > self.stages or not self._initstates.get(nxt):
                nxt = 1
            self.pointer = nxt
            return nxt

    def to_state(self) -> Dict[str, object]:
        with self._lock:
            return {
                "pointer": self.pointer,
                "initstates": {
                    str(p): [str(b) for b in states]
                    for p, states in self._initstates.items()
                },
            }

    def load_state(self, state: Dict[str, object]) -> None:
        with self._lock:
            self.pointer = int(state.get("pointer", 1))
            for p, boards in dict(state.get("initstates", {})).items():
                p = int(p)
                if p in self._initstates:
                    self._initstates[p].clear()
                    self._initstates[p].extend(int(b) for b in boards)

    def snapshot(self, pointer: int) -> List[Board]:
        with self._lock:
            return [Board(b) for b in self._initstates.get(pointer, ())]


def carousel_next_start(
    carousel: CarouselState, stage_bits: int, rng: np.random.Generator
) -> Board:
    """Start of the next episode; the caller advances the pointer once it ends."""
    if stage_bits != carousel.stage_bits:
        raise ConfigurationError(
            f"carousel tracks {carousel.stages} stages, asked for {1 << stage_bits}"
        )
    return carousel.next_start(rng)
