from __future__ import annotations

import functools
from pathlib import Path

import pytest

from svrsim.engines import run_engine
from svrsim.netmodel import bundled_path, load_feeder
from svrsim.scenarios import load_scenario

CORPUS = Path(__file__).parent / "corpus"


@functools.lru_cache(maxsize=None)
def feeder(name: str):
    path = CORPUS / name if (CORPUS / name).is_file() else bundled_path(name)
    return load_feeder(path)


@functools.lru_cache(maxsize=None)
def scenario(feeder_name: str, scn: str, **overrides):
    return load_scenario(bundled_path(scn)).for_feeder(feeder(feeder_name), **overrides)


@functools.lru_cache(maxsize=None)
def cached_run(feeder_name: str, scn: str, engine: str):
    return run_engine(engine, feeder(feeder_name), scenario(feeder_name, scn))


FOUR = ("4bus.fdr", "ramp25.scn")
UK = ("ukgds95.fdr", "ramp20.scn")


@pytest.fixture(scope="session")
def run4():
    return lambda engine: cached_run(*FOUR, engine)


@pytest.fixture(scope="session")
def run95():
    return lambda engine: cached_run(*UK, engine)


# one line per acceptance criterion at the end of the session
_acceptance: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.module.__name__.endswith("test_acceptance"):
        detail = dict(item.user_properties).get("detail", "")
        _acceptance.append((item.name, rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome, detail in _acceptance:
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{tag}  {name}  {detail}")
