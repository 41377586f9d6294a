import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import FIXTURES, load_fixture
from pfsa_rnn import pfsa as P


def test_figures_validate():
    for name in ("fig2a-top", "fig2a-bottom", "fig2b", "non-tight"):
        assert P.validate(load_fixture(name)) == []


def test_validate_names_state_and_sum():
    problems = P.validate(load_fixture("unnormalized"))
    assert problems == ["state q0: outgoing weights plus final weight sum to 1/2"]


def test_validate_reports_negative_weights_and_initial_sum():
    a = P.Pfsa(("a",), ("q",), {("q", "a", "q"): F(3, 2)}, (F(1, 2),), (F(-1, 2),))
    problems = P.validate(a)
    assert "negative final weight -1/2 on q" in problems
    assert "initial weights sum to 1/2" in problems
    assert len(problems) == 2


def test_parse_errors():
    with pytest.raises(P.PfsaFormatError, match="line 5, column 19"):
        P.load(FIXTURES / "bad-weight.json")
    with pytest.raises(P.PfsaFormatError, match="line 1"):
        P.loads("{not json")
    doc = json.loads((FIXTURES / "fig2b.json").read_text())
    doc["transitions"].append(dict(doc["transitions"][0]))
    with pytest.raises(P.PfsaFormatError, match="duplicate"):
        P.from_dict(doc)
    doc = json.loads((FIXTURES / "fig2b.json").read_text())
    doc["transitions"][0]["symbol"] = "z"
    with pytest.raises(P.PfsaFormatError, match="unknown symbol"):
        P.from_dict(doc)
    doc = json.loads((FIXTURES / "fig2b.json").read_text())
    doc["final"]["nowhere"] = "1"
    with pytest.raises(P.PfsaFormatError, match="unknown state"):
        P.from_dict(doc)


def test_round_trip(fig2b):
    assert P.loads(P.dumps(fig2b)) == fig2b


def test_eos_is_reserved():
    with pytest.raises(ValueError):
        P.Pfsa((P.EOS,), ("q",), {}, (F(1),), (F(1),))


def test_is_deterministic(fig2a_top, fig2a_bottom, fig2b):
    assert P.is_deterministic(fig2a_bottom)
    assert not P.is_deterministic(fig2a_top)
    assert not P.is_deterministic(fig2b)
    two_starts = P.Pfsa(("a",), ("p", "q"), {}, (F(1, 2), F(1, 2)), (F(1), F(1)))
    assert not P.is_deterministic(two_starts)


def test_trim_keeps_trim_automata(fig2b):
    t, warnings = P.trim(fig2b)
    assert t == fig2b and warnings == []


def test_trim_removes_dead_end_and_warns_on_source():
    # q0 -a/1/2-> q1 (final), q0 -a/1/2-> dead (no way out, loops forever)
    a = P.Pfsa(
        ("a",),
        ("q0", "q1", "dead"),
        {("q0", "a", "q1"): F(1, 2), ("q0", "a", "dead"): F(1, 2), ("dead", "a", "dead"): F(1)},
        (F(1), F(0), F(0)),
        (F(0), F(1), F(0)),
    )
    t, warnings = P.trim(a)
    assert t.states == ("q0", "q1")
    assert ("q0", "a", "dead") not in t.transitions
    assert warnings == ["state q0: outgoing weights plus final weight sum to 1/2 after trimming"]


def test_trim_removes_unreachable_state(fig2b):
    a = P.Pfsa(
        fig2b.alphabet,
        fig2b.states + ("island",),
        {**fig2b.transitions, ("island", "a", "q1"): F(1)},
        fig2b.initial + (F(0),),
        fig2b.final + (F(0),),
    )
    t, warnings = P.trim(a)
    assert t == fig2b and warnings == []


def test_forward_fig2b(fig2b):
    assert P.forward(fig2b, "a").entries == (0, F(2, 5), F(3, 5))
    assert P.forward(fig2b, "ab").entries == (0, F(9, 25), F(3, 50))
    assert P.forward(fig2b, "").entries == (1, 0, 0)
    with pytest.raises(P.UnknownSymbolError, match="'c'"):
        P.forward(fig2b, "ac")


def test_stringsum_fig2b(fig2b):
    assert P.stringsum(fig2b, "a") == F(29, 50)
    assert P.stringsum(fig2b, "ab") == F(9, 100)
    assert P.stringsum(fig2b, "ba") == 0
    assert P.stringsum(fig2b, "") == 0


def test_conditional_fig2b(fig2b):
    assert P.conditional(fig2b, "a").to_dict() == {"a": 0, "b": F(21, 50), P.EOS: F(29, 50)}
    assert P.conditional(fig2b, "").to_dict() == {"a": 1, "b": 0, P.EOS: 0}
    with pytest.raises(P.ZeroMassError, match="prefix has probability zero"):
        P.conditional(fig2b, "b")


def test_perturb_fig2b(fig2b):
    d = P.perturb(fig2b, F(1, 100))
    assert d.weight("q0", "a", "q1") == F(41, 107)
    assert d.weight("q0", "b", "q0") == F(1, 107)
    assert d.initial == fig2b.initial
    assert P.validate(d) == []
    assert all(w > 0 for w in d.final)
    assert len(d.transitions) == 2 * 3 * 3
    assert P.perturb(fig2b, 0) == fig2b
    with pytest.raises(ValueError):
        P.perturb(fig2b, F(-1, 10))


def test_length_mass_and_tail(fig2b):
    # length t >= 1 strings are a b^(t-1)
    for t in range(1, 8):
        assert P.length_mass(fig2b, t) == F(2, 5) * F(9, 10) ** (t - 1) * F(1, 10) + F(3, 5) * F(1, 10) ** (t - 1) * F(9, 10)
    assert P.length_mass(fig2b, 0) == 0
    assert P.tail_mass(fig2b, 1) == F(21, 50)


def test_tail_cutoff(fig2b):
    assert P.tail_cutoff(fig2b, F(1, 2), 10) == 1
    assert P.tail_cutoff(fig2b, F(1), 10) == 1
    assert P.tail_cutoff(fig2b, F(1, 1000), 10) is None
    assert P.tail_cutoff(load_fixture("non-tight"), F(1, 2), 200) is None


def test_sample_is_reproducible_and_in_support(fig2b):
    draws = [P.sample(fig2b, s) for s in range(50)]
    assert draws == [P.sample(fig2b, s) for s in range(50)]
    for y in draws:
        assert P.stringsum(fig2b, y) > 0
    assert P.sample(load_fixture("non-tight"), 0, max_len=5) == ("a",) * 5


def test_as_symbols_multichar():
    assert P.as_symbols(("ab", "c"), "ab c ab") == ("ab", "c", "ab")
    assert P.as_symbols(("a", "b"), ["a", "b"]) == ("a", "b")


@pytest.mark.parametrize("name", ["fig2a-top", "fig2a-bottom", "fig2b"])
def test_stringsum_matches_path_oracle(name):
    a, A = load_fixture(name), oracles.raw(name)
    for y in oracles.all_strings(a.alphabet, 5):
        assert P.stringsum(a, y) == oracles.path_stringsum(A, y)
        assert list(P.forward(a, y).entries) == oracles.path_forward(A, y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.sampled_from("abc"), max_size=4))
def test_random_automata_match_path_oracle(seed, word):
    a = P.random_trim_pfsa(seed)
    y = tuple(s for s in word if s in a.alphabet)
    A = oracles.raw_from_pfsa(a)
    assert P.stringsum(a, y) == oracles.path_stringsum(A, y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 50))
def test_random_automata_are_trim_and_valid(seed, k):
    a = P.random_trim_pfsa(seed)
    assert P.validate(a) == []
    t, warnings = P.trim(a)
    assert t == a and warnings == []
    d = P.perturb(a, F(k, 1000))
    assert P.validate(d) == []
    if k:
        assert all(w > 0 for w in d.final)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.sampled_from("abc"), max_size=5))
def test_conditional_is_a_distribution_and_chains_to_stringsum(seed, word):
    a = P.random_trim_pfsa(seed)
    y = tuple(s for s in word if s in a.alphabet)
    if P.forward(a, y).mass == 0:
        return
    prob, prefix = F(1), ()
    for sym in y:
        prob *= P.conditional(a, prefix)[sym]
        prefix += (sym,)
    dist = P.conditional(a, y)
    assert sum(dist.probs) == 1 and min(dist.probs) >= 0
    assert prob * dist[P.EOS] == P.stringsum(a, y)


def test_length_mass_matches_enumeration(fig2b):
    A = oracles.raw("fig2b")
    for t in range(6):
        assert P.length_mass(fig2b, t) == sum(oracles.path_stringsum(A, y) for y in oracles.all_strings("ab", t) if len(y) == t)
