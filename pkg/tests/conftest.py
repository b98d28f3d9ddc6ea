import numpy as np
import pytest

from packsel.catalog import CostMatrices, PackageCatalog, ProductRecord

# filled by test_acceptance: criterion number -> (title, passed, detail)
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")


@pytest.fixture
def two_by_two_records():
    """Two products, two types, hand-computable costs."""
    a = ProductRecord(
        product_id="A", features=np.zeros(1), current_type=0, sales_velocity=2.0,
        damage_cost=10.0, material=np.array([1.0, 2.0]), transport=np.array([0.5, 1.0]),
    )
    b = ProductRecord(
        product_id="B", features=np.zeros(1), current_type=1, sales_velocity=0.5,
        damage_cost=4.0, material=np.array([2.0, 4.0]), transport=np.array([1.0, 1.0]),
    )
    probs = np.array([[0.3, 0.1], [0.5, 0.25]])
    return [a, b], PackageCatalog(("X1", "X2")), probs


@pytest.fixture
def ivanov_example():
    return CostMatrices.from_arrays([[1.0, 4.0], [2.0, 3.0]], [[6.0, 1.0], [5.0, 1.0]])


@pytest.fixture
def single_crossing():
    return CostMatrices.from_arrays([[1.0, 2.0]], [[10.0, 2.0]])
