import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def permutation_matrix(widths, perm):
    """Dense matrix moving register ``k`` to slot ``perm[k]``, built index by index."""
    dims = [2**w for w in widths]
    total = int(np.prod(dims))
    out = np.zeros((total, total))
    for idx in itertools.product(*[range(d) for d in dims]):
        new = [0] * len(idx)
        for k, v in enumerate(idx):
            new[perm[k]] = v
        out[np.ravel_multi_index(new, dims), np.ravel_multi_index(idx, dims)] = 1
    return out


def symmetrizer(width, s):
    mats = [permutation_matrix([width] * s, p) for p in itertools.permutations(range(s))]
    return sum(mats) / len(mats)


ACCEPTANCE_LINES = []


def acceptance(number, ok, detail):
    """Record a criterion outcome; the lines are printed in the terminal summary."""
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
