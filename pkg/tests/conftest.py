import time

import pytest

from uavspeed.harness import ExperimentSpec, run_charging_sweep, run_convergence

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def _report(number, name, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def convergence_run(tmp_path_factory):
    """Full-size learning curves for both learners on seeds 0..4, with D3QL checkpoints."""
    ckpt = tmp_path_factory.mktemp("convergence")
    spec = ExperimentSpec(kind="convergence", seeds=(0, 1, 2, 3, 4), checkpoint_dir=str(ckpt))
    t0 = time.perf_counter()
    curves = run_convergence(spec)
    return curves, ckpt, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sweep_rows():
    spec = ExperimentSpec(kind="charging-sweep", seeds=(0, 1, 2, 3, 4))
    return run_charging_sweep(spec)
