from ntuple2048.core.log import SpdLog
from ntuple2048.core.entity import TaskManager

__all__ = [
    "SpdLog",
    "TaskManager",
]
