
import logging

import pytest

import grushape
from grushape import shapelog


def test_trace_setup() -> None:
    assert shapelog.TRACE < logging.DEBUG
    assert shapelog.TRACE == logging.TRACE    # type: ignore
    assert logging.getLevelName(shapelog.TRACE) == "TRACE"


def test_shapelog() -> None:
    log = grushape.getLogger("test.shapelog")
    log.trace("tracemsg")

    assert not log.isEnabledFor(logging.TRACE)  # type: ignore


def test_run_info(caplog: pytest.LogCaptureFixture) -> None:
    shapelog.set_run_info('job', 'solve', 'a' * 64)
    log = grushape.getLogger("test.shapelog")
    with caplog.at_level(logging.INFO):
        log.info("hello")
    rec = caplog.records[-1]
    assert rec.command == 'solve'          # type: ignore
    assert rec.config_hash == 'a' * 12     # type: ignore
    assert rec.job_name == 'job'           # type: ignore
    shapelog.set_run_info('grushape', '-')
