import signal
import asyncio
from typing import Coroutine, Dict

from ntuple2048.core.log import SpdLog


class TaskManager:
    """
    Owns the asyncio tasks of a training run and the shutdown event that
    SIGINT/SIGTERM set so that workers stop at the next episode boundary.
    """

    def __init__(
        self, loop: asyncio.AbstractEventLoop, enable_signal_handlers: bool = True
    ):
        self._log = SpdLog.get_logger(type(self).__name__, level="DEBUG", flush=True)
        self._tasks: Dict[str, asyncio.Task] = {}
        self._shutdown_event = asyncio.Event()
        self._loop = loop
        self._signal_handlers = False
        if enable_signal_handlers:
            self._setup_signal_handlers()

    def _setup_signal_handlers(self):
        try:
            for sig in (signal.SIGINT, signal.SIGTERM):
                self._loop.add_signal_handler(sig, self.shutdown)
            self._signal_handlers = True
        except (NotImplementedError, RuntimeError):
            self._log.warning("Signal handlers not supported on this platform")

    def remove_signal_handlers(self):
        if not self._signal_handlers:
            return
        for sig in (signal.SIGINT, signal.SIGTERM):
            self._loop.remove_signal_handler(sig)
        self._signal_handlers = False

    def shutdown(self):
        if not self._shutdown_event.is_set():
            self._log.info("Shutdown signal received, stopping workers at episode boundary...")
        self._shutdown_event.set()

    @property
    def is_shutting_down(self) -> bool:
        return self._shutdown_event.is_set()

    def create_task(self, coro: Coroutine, name: str = None) -> asyncio.Task:
        task = self._loop.create_task(coro, name=name)
        self._tasks[task.get_name()] = task
        task.add_done_callback(self._handle_task_done)
        return task

    def cancel_task(self, name: str) -> bool:
        if name in self._tasks:
            self._tasks[name].cancel()
            return True
        return False

    def _handle_task_done(self, task: asyncio.Task):
        name = task.get_name()
        self._tasks.pop(name, None)
        if task.cancelled():
            return
        exc = task.exception()
        if exc is not None:
            self._log.error(f"Task {name} failed: {exc!r}")
            self.shutdown()

    async def cancel(self):
        """Cancel every live task and wait for them; failures other than cancellation are logged."""
        pending = list(self._tasks.items())
        self._tasks.clear()
        for _, task in pending:
            if not task.done():
                task.cancel()
        if not pending:
            return
        results = await asyncio.gather(*(t for _, t in pending), return_exceptions=True)
        for (name, _), result in zip(pending, results):
            if isinstance(result, Exception) and not isinstance(result, asyncio.CancelledError):
                self._log.error(f"Task {name} failed during cancellation: {result!r}")
