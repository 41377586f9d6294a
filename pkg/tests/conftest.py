import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from pfsa_rnn import pfsa as P  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
FIGURES = ("fig2a-top", "fig2a-bottom", "fig2b")
RANDOM_SEEDS = range(20)


def load_fixture(name):
    return P.load(FIXTURES / f"{name}.json")


@pytest.fixture
def fig2b():
    return load_fixture("fig2b")


@pytest.fixture
def fig2a_top():
    return load_fixture("fig2a-top")


@pytest.fixture
def fig2a_bottom():
    return load_fixture("fig2a-bottom")


def automaton_set():
    """The three example fixtures plus 20 seeded random trim automata."""
    out = [(name, load_fixture(name)) for name in FIGURES]
    out += [(f"random-{s}", P.random_trim_pfsa(s)) for s in RANDOM_SEEDS]
    return out


def mutate_weight(params, amount=None):
    """Change one transition weight of compiled parameters: the first positive
    entry of U (or entry (0, 0) when U is all zero), rewritten in every column
    block of its source state."""
    from fractions import Fraction

    amount = Fraction(1, 7) if amount is None else amount
    U = [list(r) for r in params.U]
    positive = ((r, c) for r in range(params.dim) for c in range(params.dim) if U[r][c] > 0)
    row, col = next(positive, (0, 0))
    q, _ = params.coordinate(col)
    for y in params.alphabet:
        U[row][params.index_of(q, y)] += amount
    return type(params)(params.alphabet, params.states, tuple(map(tuple, U)), params.V, params.b, params.eta)
