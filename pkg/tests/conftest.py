import numpy as np
import pytest

from rieszmorf.synth import MotionDatasetConfig, make_motion_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A 3-class, 3-subject, 2-rep motion dataset (18 sequences)."""
    out = tmp_path_factory.mktemp("small")
    cfg = MotionDatasetConfig(subjects=3, reps=2, n_frames=8, seed=7)
    manifest, path = make_motion_dataset(str(out), cfg)
    return manifest, path


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
