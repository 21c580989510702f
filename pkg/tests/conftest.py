import numpy as np

from cauchydos.ensemble import SymmetricOperator

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance pass/fail lines after the run, outside capture."""
    if ACCEPTANCE_LINES:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria", sep="-")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_sparse_symmetric(n, seed, density=0.05):
    """Random sparse symmetric test matrix in canonical triple form."""
    rng = np.random.default_rng(seed)
    m = max(1, int(density * n * n / 2))
    rows = rng.integers(0, n, size=m)
    cols = rng.integers(0, n, size=m)
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    vals = rng.standard_normal(m)
    key = lo * n + hi
    _, idx = np.unique(key, return_index=True)
    return SymmetricOperator(n, lo[idx], hi[idx], vals[idx])
