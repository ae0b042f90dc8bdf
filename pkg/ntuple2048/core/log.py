import sys
import traceback
from pathlib import Path
from typing import Dict, List

import spdlog as spd

from ntuple2048.constants import LevelType

_LEVELS: Dict[str, spd.LogLevel] = {
    "DEBUG": spd.LogLevel.DEBUG,
    "INFO": spd.LogLevel.INFO,
    "WARNING": spd.LogLevel.WARN,
    "ERROR": spd.LogLevel.ERR,
    "CRITICAL": spd.LogLevel.CRITICAL,
}


class SpdLog:
    """
    Process-wide registry of named spdlog loggers.

    Training runs, evaluations and the command line all log through here.
    In shared mode every component writes to one rotated ``<file_name>.log``
    and to stderr; stdout stays reserved for the CSV/JSON results of
    ``ntuple2048 eval``. In split mode each component gets its own file under
    the log directory, which is handy when tracing a single trainer worker.
    """

    log_dir: Path = Path(".log")
    shared: bool = True
    async_mode: bool = True
    sinks: List | None = None
    loggers: Dict[str, spd.Logger] = {}
    error_logger: spd.Logger | None = None

    @classmethod
    def parse_level(cls, level: LevelType) -> spd.LogLevel:
        return _LEVELS[level]

    @classmethod
    def initialize(
        cls,
        level: LevelType = "INFO",
        std_level: LevelType = "INFO",
        file_name: str = "ntuple2048",
        file_dir: str = ".log",
        async_mode: bool = True,
        production_mode: bool = True,
    ):
        """
        Point the registry at a log directory.

        Loggers created by an earlier call are dropped, so a second
        ``initialize`` (one per ``main`` invocation) really switches sinks.

        :param level: level of the file sink
        :param std_level: level of the stderr sink
        :param file_name: base name of the shared log file
        :param file_dir: directory for log files, created if missing
        :param async_mode: async loggers in split mode
        :param production_mode: shared file plus stderr when True, one file per logger otherwise
        """
        cls.close_all_loggers()
        cls.log_dir = Path(file_dir)
        cls.log_dir.mkdir(parents=True, exist_ok=True)
        cls.shared = production_mode
        cls.async_mode = async_mode
        cls.sinks = None
        if not cls.shared:
            return

        file_sink = spd.daily_file_sink_mt(
            filename=str(cls.log_dir / f"{file_name}.log"),
            rotation_hour=0,
            rotation_minute=0,
        )
        file_sink.set_level(cls.parse_level(level))
        console = spd.stderr_color_sink_mt()
        console.set_level(cls.parse_level(std_level))
        cls.sinks = [file_sink, console]

    @classmethod
    def get_logger(
        cls, name: str, level: LevelType = "INFO", flush: bool = False
    ) -> spd.Logger:
        """Named logger, created on first use against the current sinks."""
        logger = cls.loggers.get(name)
        if logger is not None:
            return logger

        if cls.shared and cls.sinks is not None:
            logger = spd.SinkLogger(name=name, sinks=cls.sinks)
        else:
            cls.log_dir.mkdir(parents=True, exist_ok=True)
            logger = spd.DailyLogger(
                name=name,
                filename=str(cls.log_dir / f"{name}.log"),
                hour=0,
                minute=0,
                async_mode=cls.async_mode,
            )
        logger.set_level(cls.parse_level(level))
        if flush:
            logger.flush_on(cls.parse_level(level))
        cls.loggers[name] = logger
        return logger

    @classmethod
    def setup_error_handling(cls):
        """Route uncaught exceptions to the ``Error`` logger; Ctrl-C keeps the default hook."""
        cls.error_logger = cls.get_logger("Error", level="ERROR", flush=True)

        def excepthook(exc_type, exc_value, exc_traceback):
            if issubclass(exc_type, KeyboardInterrupt):
                sys.__excepthook__(exc_type, exc_value, exc_traceback)
                return
            cls.error_logger.error(
                "".join(traceback.format_exception(exc_type, exc_value, exc_traceback))
            )

        sys.excepthook = excepthook

    @classmethod
    def close_all_loggers(cls):
        for logger in cls.loggers.values():
            logger.flush()
            spd.drop(logger.name())
        cls.loggers = {}
        cls.error_logger = None
