import numpy as np
import pytest

from jumpfem.mesh import build_mesh, rectangle_mesh, refine


@pytest.fixture
def square2():
    """Unit square split along (0,0)-(1,1)."""
    return build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]], [0, 0])


@pytest.fixture
def ref_triangle():
    return build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [0])


def random_mesh(rng, n_max=200):
    """Conforming mesh of at most ``n_max`` elements with perturbed vertices
    and a few rounds of random local refinement."""
    nx, ny = rng.integers(1, 5, size=2)
    m = rectangle_mesh(0.0, 1.0, 0.0, 1.0, int(nx), int(ny))
    p = m.vertices.copy()
    inner = (p[:, 0] > 0) & (p[:, 0] < 1) & (p[:, 1] > 0) & (p[:, 1] < 1)
    p[inner] += rng.uniform(-0.15, 0.15, size=(inner.sum(), 2)) / max(nx, ny)
    m = build_mesh(p, m.elements, m.subdomain)
    for _ in range(rng.integers(0, 4)):
        marked = rng.random(m.n_elements) < 0.3
        nxt = refine(m, marked)
        if nxt.n_elements > n_max:
            break
        m = nxt
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_acceptance(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
    ACCEPTANCE_LINES[(number, title)] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
