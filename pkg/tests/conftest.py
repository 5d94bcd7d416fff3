import pytest

from adinvar.program import load_corpus, parse_program

IDENTITY = "inputs x1\noutputs y1\ny1 = id x1\n"
SQUARE = "inputs x1\noutputs y1\ny1 = mul x1 x1\n"
CUBE = "inputs x1\noutputs y1\nv1 = mul x1 x1\ny1 = mul v1 x1\n"
PRODUCT = "inputs x1 x2\noutputs y1\nv1 = mul x1 x2\ny1 = id v1\n"
SQRT = "inputs x1\noutputs y1\ny1 = sqrt x1\n"
PIPELINE = "inputs x1\noutputs y1\nv1 = sqrt x1\nv2 = sin v1\ny1 = mul v2 v1\n"
TWO_OUTPUT = "inputs x1 x2\noutputs y1 y2\ny1 = id x1\ny2 = mul x1 x2\n"


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def corpus_by_name(corpus):
    return {e.name: e for e in corpus}


@pytest.fixture
def identity():
    return parse_program(IDENTITY, "identity")


@pytest.fixture
def square():
    return parse_program(SQUARE, "square")


@pytest.fixture
def cube():
    return parse_program(CUBE, "cube")


@pytest.fixture
def product():
    return parse_program(PRODUCT, "product")


@pytest.fixture
def sqrt_prog():
    return parse_program(SQRT, "sqrt")


@pytest.fixture
def pipeline():
    return parse_program(PIPELINE, "pipeline")


@pytest.fixture
def two_output():
    return parse_program(TWO_OUTPUT, "two_output")


# one summary line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
