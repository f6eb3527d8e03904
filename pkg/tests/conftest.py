import functools

import pytest
from hypothesis import settings

from fhnspiral import experiments as ex

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def preset_report(name: str):
    """Full-size preset run, shared by every test in the session."""
    return ex.run_preset(name)


@pytest.fixture(scope="session")
def torus():
    """Single plane wave on the 200 x 400 torus at t = 0."""
    return ex.single_wave_state(ex.PRESETS["fig1"])


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Remember a criterion outcome; later calls for the same criterion AND together."""
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        ok, detail = prev[0] and ok, f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
