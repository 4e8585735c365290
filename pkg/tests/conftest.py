import numpy as np
import pytest

EXAMPLE_A = np.array([
    [1, 3, 5, 7, 9, 1],
    [2, 4, 6, 8, 3, 7],
    [7, 3, 8, 6, 4, 2],
    [1, 9, 7, 5, 3, 1],
], dtype=float)
EXAMPLE_P = np.array([5, 6, 8, 7], dtype=float)


def mirror_complete(top):
    """Centrosymmetric matrix whose upper half is ``top``; the lower half is its 180-degree rotation."""
    top = np.asarray(top, dtype=float)
    return np.vstack([top, top[::-1, ::-1]])


def random_centro(rng, M, N, rank=None):
    """Random (M, N) centrosymmetric matrix, optionally of reduced rank.

    Reduced rank is obtained by building A = U diag(L1, L2) V^T-style:
    both quarter blocks get the requested rank, and the orthogonal
    even/odd change of basis maps them back to a full matrix.
    """
    if rank is None:
        return mirror_complete(rng.standard_normal((M // 2, N)))
    Mh, Nh = M // 2, N // 2
    r = min(rank, Mh, Nh)
    B1 = rng.standard_normal((Mh, r)) @ rng.standard_normal((r, Nh))
    B2 = rng.standard_normal((Mh, r)) @ rng.standard_normal((r, Nh))
    # w[i,j] = (B2 + B1)/2, w[M-i+1,j] = (B2 - B1)/2 on the left half
    left = np.vstack([(B2 + B1) / 2, ((B2 - B1) / 2)[::-1]])
    return np.hstack([left, left[::-1, ::-1]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def example():
    return EXAMPLE_A.copy(), EXAMPLE_P.copy()


# one line per acceptance criterion, shown even when output is captured
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
