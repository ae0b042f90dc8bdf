import asyncio

import pytest

from ntuple2048.core.entity import TaskManager


@pytest.fixture
async def task_manager():
    return TaskManager(asyncio.get_running_loop(), enable_signal_handlers=False)
