import shutil
from collections import OrderedDict

import pytest
from hypothesis import settings

from scisumm.cli import main

settings.register_profile("default", deadline=None)
settings.load_profile("default")

CRITERIA = OrderedDict()


def record(criterion: str, passed: bool, detail: str = "") -> None:
    CRITERIA[criterion] = (passed, detail)


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """Two identical pipeline runs on the bundled toy corpus."""
    outs = []
    for k in range(2):
        out = tmp_path_factory.mktemp(f"toy{k}")
        shutil.rmtree(out)
        code = main(["pipeline", "--corpus", "toy", "--out", str(out), "--seed", "7", "--max-epochs", "5"])
        assert code == 0
        outs.append(out)
    return outs


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    name = marker.args[0]
    if call.excinfo is None:
        CRITERIA.setdefault(name, (True, ""))
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        CRITERIA[name] = (None, str(call.excinfo.value))
    else:
        CRITERIA[name] = (False, call.excinfo.exconly().splitlines()[0][:160])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in CRITERIA.items():
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{status} {name}" + (f": {detail}" if detail else ""))
