import numpy as np
import pytest

from reldec import BeableObservable, Ket, Projector, SubsystemLayout

S2 = 1 / np.sqrt(2)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.array([S2, S2])


@pytest.fixture
def qubits():
    return SubsystemLayout([2, 2], ["1", "2"])


@pytest.fixture
def bell(qubits):
    return Ket([S2, 0, 0, S2], qubits)


@pytest.fixture
def pointer(qubits):
    """Dichotomic beable {|0><0|, |1><1|} on subsystem 2."""
    return BeableObservable.computational("2", 2, name="pointer")


@pytest.fixture
def plus_pair():
    return Projector.onto([PLUS], "1"), Projector.onto([PLUS], "2")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
