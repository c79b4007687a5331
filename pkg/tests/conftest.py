from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from tensorbounds.tensor import Tensor3

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def small_tensors(draw, max_dim=3, height=3, dims=None):
    if dims is None:
        dims = tuple(draw(st.integers(1, max_dim)) for _ in range(3))
    n = dims[0] * dims[1] * dims[2]
    entries = draw(st.lists(st.integers(-height, height), min_size=n, max_size=n))
    return Tensor3(dims, [Fraction(x) for x in entries])


@st.composite
def invertible_matrices(draw, n, height=2):
    # unit lower times unit upper triangular, always invertible
    from tensorbounds.linalg import RationalMatrix

    L = [[1 if i == j else (draw(st.integers(-height, height)) if j < i else 0) for j in range(n)] for i in range(n)]
    U = [[1 if i == j else (draw(st.integers(-height, height)) if j > i else 0) for j in range(n)] for i in range(n)]
    return RationalMatrix(L) @ RationalMatrix(U)


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
