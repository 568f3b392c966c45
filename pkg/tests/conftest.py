from fractions import Fraction

from hypothesis import settings, strategies as st

from flatscale.exactnum import PMatrix
from flatscale.lattice import canonicalize

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

primes = st.sampled_from([2, 3, 5])


@st.composite
def pscalars(draw, p, spread=2, nonzero=False):
    c = draw(st.integers(-9, 9).filter(lambda c: c != 0) if nonzero else st.integers(-9, 9))
    return c * Fraction(p) ** draw(st.integers(-spread, spread))


@st.composite
def invertibles(draw, n, p, spread=2):
    rows = draw(st.lists(st.lists(pscalars(p, spread), min_size=n, max_size=n), min_size=n, max_size=n))
    M = PMatrix(rows, p)
    if M.det() == 0:
        # fall back to a nearby invertible: add a scaled identity
        M = PMatrix([[x + (p ** 3 if i == j else 0) for j, x in enumerate(r)] for i, r in enumerate(rows)], p)
    if M.det() == 0:
        M = PMatrix.identity(n, p)
    return M


@st.composite
def lattices(draw, n, p, spread=2):
    return canonicalize(draw(invertibles(n, p, spread)))


@st.composite
def unimodular(draw, n, p):
    """Product of integer elementary matrices and unit diagonals: an element of GL_n(Z_(p))."""
    M = PMatrix.identity(n, p)
    for _ in range(draw(st.integers(1, 6))):
        i, j = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        rows = [[int(a == b) for b in range(n)] for a in range(n)]
        if i == j:
            unit = draw(st.sampled_from([u for u in (-1, 1, 2, 3, 4, 5, 7) if u % p]))
            rows[i][i] = unit
        else:
            rows[i][j] = draw(st.integers(-4, 4))
        M = M @ PMatrix(rows, p)
    return M


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
