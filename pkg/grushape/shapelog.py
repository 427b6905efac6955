"""Logging helpers on top of Python's logging package.

Adds TRACE level and run context (command, config hash) to every record.
"""

import logging
from logging import LoggerAdapter
from typing import Any, Optional

__all__ = ['getLogger', 'set_run_info', 'TRACE']

# add TRACE level
TRACE = 5
logging.TRACE = TRACE   # type: ignore
logging.addLevelName(TRACE, 'TRACE')

# extra info to be added to each log record
_log_extra = {
    'job_name': 'grushape',
    'command': '-',
    'config_hash': '-',
}


def set_run_info(job_name: str, command: str, config_hash: str = '-') -> None:
    """Set info about current run."""
    _log_extra['job_name'] = job_name
    _log_extra['command'] = command
    # short form is enough to tell runs apart in logs
    _log_extra['config_hash'] = config_hash[:12]


# Make extra fields available to all log records
_old_factory = logging.getLogRecordFactory()


def _new_factory(*args: Any, **kwargs: Any) -> logging.LogRecord:
    record = _old_factory(*args, **kwargs)
    record.__dict__.update(_log_extra)
    return record


logging.setLogRecordFactory(_new_factory)


class ShapeLogger(LoggerAdapter):
    """Adds API to existing Logger.
    """
    def trace(self, msg: str, *args: Any, **kwargs: Any) -> None:
        """Log message with severity TRACE."""
        self.log(TRACE, msg, *args, **kwargs)


def getLogger(name: Optional[str] = None, **kwargs_extra: Any) -> ShapeLogger:
    """Get logger with extra functionality.

    name - name for logging.getLogger()
    kwargs_extra - extra fields to add to log record
    """
    log = logging.getLogger(name)
    return ShapeLogger(log, kwargs_extra)
