"""
TD, TC and Autostep weight updates, in standard and delayed form.

Every rule is reduced to one primitive, "apply signal ``x`` to the active
weights of afterstate ``s``"; the standard form calls it ``h + 1`` times per
step with decayed copies of ``delta``, the delayed form once per afterstate
with the decayed sum of the ``h + 1`` errors that follow it. The kernels take
the auxiliary tables as three arrays whatever the rule (unused ones are
empty) so the episode kernel compiles once per dtype.
"""

from math import exp
from typing import Callable, List, Tuple

import numba as nb
import numpy as np

from ntuple2048.config import LearningConfig, horizon
from ntuple2048.constants import UpdateRule
from ntuple2048.error import ConfigurationError
from ntuple2048.ntuple.network import NTupleNetwork, slot_of, stage_kernel
from ntuple2048.schema import Board

TD = 0
TC = 1
AUTOSTEP = 2

# indices into the float64 parameter vector handed to the kernels
P_RATE = 0
P_LAMBDA = 1
P_MU = 2
P_TAU = 3


@nb.njit(cache=True, nogil=True)
def td_apply_kernel(w, layout, b, g, step):
    vtup = layout[2]
    stage = stage_kernel(b, g)
    for j in range(vtup.shape[0]):
        w[slot_of(layout, b, j, stage)] += step


@nb.njit(cache=True, nogil=True)
def active_slots_kernel(layout, b, g):
    """Distinct active slots of ``b`` with the number of views reading each."""
    vtup = layout[2]
    nv = vtup.shape[0]
    stage = stage_kernel(b, g)
    slots = np.empty(nv, np.int64)
    counts = np.empty(nv, np.float64)
    n = 0
    for j in range(nv):
        slot = slot_of(layout, b, j, stage)
        found = False
        for q in range(n):
            if slots[q] == slot:
                counts[q] += 1.0
                found = True
                break
        if not found:
            slots[n] = slot
            counts[n] = 1.0
            n += 1
    return slots, counts, n


@nb.njit(cache=True, nogil=True)
def tc_apply_kernel(w, e_tab, a_tab, layout, b, g, rate, signal):
    """
    Coherence of each slot is read once from the accumulators as they stood
    before this signal; a slot hit by ``c`` views takes ``c`` increments.
    """
    slots, counts, n = active_slots_kernel(layout, b, g)
    for q in range(n):
        s = slots[q]
        c = counts[q]
        acc = a_tab[s]
        coherence = abs(e_tab[s]) / acc if acc != 0.0 else 1.0
        w[s] += c * rate * coherence * signal
        e_tab[s] += c * signal
        a_tab[s] += c * abs(signal)


@nb.njit(cache=True, nogil=True)
def autostep_apply_kernel(w, alpha, trace, norm, layout, b, g, delta, mu, tau):
    """
    One Autostep step over binary features; a slot hit by ``c`` views is a
    single feature of value ``c``. With ``mu == 0`` the step sizes stay fixed
    and the effective-step bound is not applied.
    """
    slots, counts, n = active_slots_kernel(layout, b, g)

    if mu != 0.0:
        for q in range(n):
            s = slots[q]
            x = counts[q]
            dxh = delta * x * trace[s]
            adxh = abs(dxh)
            v = norm[s] + tau * alpha[s] * x * x * (adxh - norm[s])
            norm[s] = adxh if adxh > v else v
            if norm[s] != 0.0:
                alpha[s] = alpha[s] * exp(mu * dxh / norm[s])

        effective = 0.0
        for q in range(n):
            effective += alpha[slots[q]] * counts[q] * counts[q]
        if effective > 1.0:
            for q in range(n):
                alpha[slots[q]] = alpha[slots[q]] / effective

    for q in range(n):
        s = slots[q]
        x = counts[q]
        w[s] += alpha[s] * delta * x
        trace[s] = trace[s] * (1.0 - alpha[s] * x * x) + alpha[s] * delta * x


@nb.njit(cache=True, nogil=True)
def apply_signal_kernel(rule, w, aux0, aux1, aux2, layout, b, g, signal, params):
    if rule == TD:
        td_apply_kernel(w, layout, b, g, params[P_RATE] * signal)
    elif rule == TC:
        tc_apply_kernel(w, aux0, aux1, layout, b, g, params[P_RATE], signal)
    else:
        autostep_apply_kernel(
            w, aux0, aux1, aux2, layout, b, g, signal, params[P_MU], params[P_TAU]
        )


@nb.njit(cache=True, nogil=True)
def push_kernel(ring_b, ring_d, meta, b, delta):
    """Store ``(s'_t, delta_t)``; ``meta`` is ``[steps seen, next slot]``."""
    cap = ring_b.shape[0]
    pos = meta[1]
    ring_b[pos] = b
    ring_d[pos] = delta
    meta[0] += 1
    meta[1] = (pos + 1) % cap
    return pos


@nb.njit(cache=True, nogil=True)
def delayed_push_kernel(ring_b, ring_d, meta, lam, b, delta):
    """
    Store the step and, once ``h + 1`` steps are buffered, return the oldest
    afterstate with its decayed error sum.
    """
    cap = ring_b.shape[0]
    push_kernel(ring_b, ring_d, meta, b, delta)
    if meta[0] < cap:
        return False, np.uint64(0), 0.0
    oldest = meta[1]
    total = 0.0
    f = 1.0
    for k in range(cap):
        total += ring_d[(oldest + k) % cap] * f
        f *= lam
    return True, ring_b[oldest], total


@nb.njit(cache=True, nogil=True)
def delayed_drain_kernel(ring_b, ring_d, meta, lam):
    """Truncated sums for the trailing afterstates, oldest first; resets the ring."""
    cap = ring_b.shape[0]
    pending = min(meta[0], cap - 1)
    last = (meta[1] - 1) % cap
    boards = np.empty(pending, np.uint64)
    sums = np.empty(pending, np.float64)
    for n in range(pending):
        back = pending - 1 - n
        idx = (last - back) % cap
        total = 0.0
        f = 1.0
        for k in range(back + 1):
            total += ring_d[(idx + k) % cap] * f
            f *= lam
        boards[n] = ring_b[idx]
        sums[n] = total
    meta[0] = 0
    meta[1] = 0
    return boards, sums


@nb.njit(cache=True, nogil=True)
def observe_kernel(
    rule, delayed, w, aux0, aux1, aux2, layout, g, params, ring_b, ring_d, meta, b, delta
):
    if delayed:
        ready, target, total = delayed_push_kernel(
            ring_b, ring_d, meta, params[P_LAMBDA], b, delta
        )
        if ready:
            apply_signal_kernel(rule, w, aux0, aux1, aux2, layout, target, g, total, params)
        return
    cap = ring_b.shape[0]
    pos = push_kernel(ring_b, ring_d, meta, b, delta)
    reach = min(meta[0], cap)
    f = 1.0
    for k in range(reach):
        idx = (pos - k) % cap
        apply_signal_kernel(
            rule, w, aux0, aux1, aux2, layout, ring_b[idx], g, delta * f, params
        )
        f *= params[P_LAMBDA]


@nb.njit(cache=True, nogil=True)
def finish_kernel(rule, delayed, w, aux0, aux1, aux2, layout, g, params, ring_b, ring_d, meta):
    if delayed:
        boards, sums = delayed_drain_kernel(ring_b, ring_d, meta, params[P_LAMBDA])
        for n in range(boards.shape[0]):
            apply_signal_kernel(rule, w, aux0, aux1, aux2, layout, boards[n], g, sums[n], params)
        return
    meta[0] = 0
    meta[1] = 0


class EpisodeBuffer:
    """Ring of the last ``h + 1`` afterstates and their errors; one per worker."""

    def __init__(self, h: int):
        self.h = h
        self.boards = np.zeros(h + 1, dtype=np.uint64)
        self.deltas = np.zeros(h + 1, dtype=np.float64)
        self.meta = np.zeros(2, dtype=np.int64)

    @property
    def capacity(self) -> int:
        return self.h + 1

    @property
    def steps(self) -> int:
        return int(self.meta[0])

    def clear(self) -> None:
        self.meta[:] = 0


class TCState:
    """Accumulated error ``E`` and accumulated absolute error ``A``, congruent to V."""

    def __init__(self, network: NTupleNetwork):
        self.E = network.zeros_like()
        self.A = network.zeros_like()

    @property
    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.E, self.A, self.E[:0]

    def coherence(self, slot: int) -> float:
        acc = float(self.A[slot])
        return abs(float(self.E[slot])) / acc if acc != 0.0 else 1.0


class AutostepState:
    """Per-weight step sizes ``alpha``, traces ``h`` and normalizers ``v``."""

    def __init__(self, network: NTupleNetwork, alpha_init: float):
        self.alpha = network.zeros_like(alpha_init)
        self.h = network.zeros_like()
        self.v = network.zeros_like()

    @property
    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.alpha, self.h, self.v


class _NoTables:
    def __init__(self, network: NTupleNetwork):
        self._empty = network.weights[:0]

    @property
    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._empty, self._empty, self._empty


def create_tables(network: NTupleNetwork, config: LearningConfig):
    if config.rule == UpdateRule.TC:
        return TCState(network)
    if config.rule == UpdateRule.AUTOSTEP:
        return AutostepState(network, config.alpha_init)
    return _NoTables(network)


def kernel_params(network: NTupleNetwork, config: LearningConfig) -> np.ndarray:
    params = np.zeros(4, dtype=np.float64)
    params[P_RATE] = config.step_size / network.view_count
    params[P_LAMBDA] = config.lam
    params[P_MU] = config.mu
    params[P_TAU] = config.tau
    return params


class LearningRule:
    """
    A configured update rule bound to a network, its auxiliary tables and a
    private EpisodeBuffer. Workers share ``network`` and ``tables`` and each
    hold their own LearningRule.
    """

    def __init__(self, network: NTupleNetwork, config: LearningConfig, tables=None):
        self.network = network
        self.config = config
        self.tables = tables if tables is not None else create_tables(network, config)
        self.code = config.rule.code
        # autostep keeps its own traces, the ring is only one step deep
        self.delayed = config.delayed and config.rule != UpdateRule.AUTOSTEP
        self.buffer = EpisodeBuffer(config.horizon)
        self.params = kernel_params(network, config)

    def observe(self, afterstate: Board, delta: float) -> None:
        aux0, aux1, aux2 = self.tables.arrays
        observe_kernel(
            self.code,
            self.delayed,
            self.network.weights,
            aux0,
            aux1,
            aux2,
            self.network.layout,
            self.network.stage_bits,
            self.params,
            self.buffer.boards,
            self.buffer.deltas,
            self.buffer.meta,
            afterstate.word,
            float(delta),
        )

    def finish(self) -> None:
        aux0, aux1, aux2 = self.tables.arrays
        finish_kernel(
            self.code,
            self.delayed,
            self.network.weights,
            aux0,
            aux1,
            aux2,
            self.network.layout,
            self.network.stage_bits,
            self.params,
            self.buffer.boards,
            self.buffer.deltas,
            self.buffer.meta,
        )

    def apply(self, afterstate: Board, signal: float) -> None:
        aux0, aux1, aux2 = self.tables.arrays
        apply_signal_kernel(
            self.code,
            self.network.weights,
            aux0,
            aux1,
            aux2,
            self.network.layout,
            afterstate.word,
            self.network.stage_bits,
            float(signal),
            self.params,
        )


def _single_step(
    buffer: EpisodeBuffer,
    network: NTupleNetwork,
    tables,
    config: LearningConfig,
    rule: UpdateRule,
    afterstate: Board,
    delta: float,
) -> None:
    if buffer.capacity != config.horizon + 1:
        raise ConfigurationError(
            f"buffer holds {buffer.capacity} steps, lambda={config.lam} needs {config.horizon + 1}"
        )
    aux0, aux1, aux2 = tables.arrays
    params = kernel_params(network, config)
    observe_kernel(
        rule.code,
        False,
        network.weights,
        aux0,
        aux1,
        aux2,
        network.layout,
        network.stage_bits,
        params,
        buffer.boards,
        buffer.deltas,
        buffer.meta,
        afterstate.word,
        float(delta),
    )


def td_update(
    buffer: EpisodeBuffer,
    network: NTupleNetwork,
    afterstate: Board,
    delta: float,
    config: LearningConfig,
) -> None:
    """Record ``s'_t`` and push ``alpha/view_count * delta * lam**(t-k)`` into the last ``h + 1`` afterstates."""
    _single_step(buffer, network, _NoTables(network), config, UpdateRule.TD, afterstate, delta)


def tc_update(
    buffer: EpisodeBuffer,
    tcstate: TCState,
    network: NTupleNetwork,
    afterstate: Board,
    delta: float,
    config: LearningConfig,
) -> None:
    _single_step(buffer, network, tcstate, config, UpdateRule.TC, afterstate, delta)


def autostep_update(
    stepstate: AutostepState,
    network: NTupleNetwork,
    afterstate: Board,
    delta: float,
    config: LearningConfig,
) -> None:
    aux0, aux1, aux2 = stepstate.arrays
    autostep_apply_kernel(
        network.weights,
        aux0,
        aux1,
        aux2,
        network.layout,
        afterstate.word,
        network.stage_bits,
        float(delta),
        config.mu,
        config.tau,
    )


FlushFn = Callable[[Board, float], None]


def delayed_update(
    buffer: EpisodeBuffer, afterstate: Board, delta: float, lam: float, flushfn: FlushFn
) -> None:
    """Store ``(s'_t, delta_t)`` and hand ``(s'_{t-h}, Delta_{t-h})`` to ``flushfn`` once available."""
    ready, target, total = delayed_push_kernel(
        buffer.boards, buffer.deltas, buffer.meta, lam, afterstate.word, float(delta)
    )
    if ready:
        flushfn(Board(int(target)), float(total))


def delayed_finish(buffer: EpisodeBuffer, lam: float, flushfn: FlushFn) -> List[Tuple[Board, float]]:
    boards, sums = delayed_drain_kernel(buffer.boards, buffer.deltas, buffer.meta, lam)
    flushed = [(Board(int(b)), float(s)) for b, s in zip(boards, sums)]
    for board, total in flushed:
        flushfn(board, total)
    return flushed


__all__ = [
    "horizon",
    "EpisodeBuffer",
    "TCState",
    "AutostepState",
    "LearningRule",
    "create_tables",
    "td_update",
    "tc_update",
    "autostep_update",
    "delayed_update",
    "delayed_finish",
]
