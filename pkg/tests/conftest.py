import numpy as np
import pytest

from fairdream.dataset import CategorySet, ColumnSpec, DataTable, GroupPartition, load_reference


def make_partition(assignment, labels=None, feature="g"):
    assignment = np.asarray(assignment)
    k = int(assignment.max()) + 1
    labels = labels or [f"g{i}" for i in range(k)]
    return GroupPartition(feature, tuple(CategorySet((lab,)) for lab in labels), assignment)


def synthetic_table(n=500, seed=0, with_category=True):
    """Small mixed-type table with a learnable target."""
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=n)
    x2 = rng.uniform(0, 10, size=n).round(1)
    cat = rng.choice(np.array(["a", "b", "c"], dtype=object), size=n)
    logit = 1.5 * x1 - 0.3 * x2 + 1.0 + np.where(cat == "a", 1.0, 0.0)
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logit))).astype(np.int8)
    cols = [ColumnSpec("x1", "numeric"), ColumnSpec("x2", "numeric")]
    values = {"x1": x1, "x2": x2}
    if with_category:
        cols.append(ColumnSpec("cat", "categorical"))
        values["cat"] = cat
    return DataTable(tuple(cols), values, y)


@pytest.fixture(scope="session")
def census():
    return load_reference()


def pytest_terminal_summary(terminalreporter):
    """One verdict line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call":
                continue
            for key, value in getattr(rep, "user_properties", ()):
                if key == "criterion":
                    number, ok, detail = value
                    lines.append((number, f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
