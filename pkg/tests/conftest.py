import pytest

from chorcc import corpus


@pytest.fixture(scope="session")
def entries():
    return corpus.entries()


@pytest.fixture(scope="session")
def programs(entries):
    return {e.name: e.program for e in entries}


MINI = """
class Cell {
    int x;
    int y;

    Cell(int v) {
        this.x = v;
    }

    requires Perm(this.y, 1);
    ensures Perm(this.y, 1);
    void bump() {
        this.y = this.y + 1;
    }
}

choreography Mini(int n) {
    endpoint a = Cell(1);
    endpoint b = Cell(2);
    endpoint c = Cell(3);
    endpoint F[i := 0 .. n] = Cell(i);
    endpoint G[i := 0 .. n] = Cell(0);

    run {
        BODY
    }
}
"""


def mini(body: str) -> str:
    """A small choreography with endpoints a, b, c and families F, G of size n."""
    return MINI.replace("BODY", body)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
