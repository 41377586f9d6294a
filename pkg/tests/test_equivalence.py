from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import FIGURES, load_fixture
from pfsa_rnn import pfsa as P
from pfsa_rnn.compiler import OutputMatrix, compile_pfsa, output_matrix
from pfsa_rnn.equivalence import (
    EnumerationTooLarge,
    direct_rtvd,
    enumerate_strings,
    lm_string_prob,
    lm_string_probs,
    pfsa_string_probs,
    restricted_tvd,
    tvd_upper_bound,
    verify_approx,
    verify_compiled,
    verify_exact,
)
from pfsa_rnn.heads import SoftmaxLogHead, SparsemaxHead


def test_enumerate_strings():
    assert enumerate_strings("ab", 0).strings == ((),)
    assert [("".join(y)) for y in enumerate_strings("ab", 2)] == ["", "a", "b", "aa", "ab", "ba", "bb"]
    assert len(enumerate_strings("a", 3)) == 4
    assert len(enumerate_strings("abc", 4)) == sum(3**t for t in range(5))
    with pytest.raises(EnumerationTooLarge, match="enumeration too large"):
        enumerate_strings("ab", 40)
    with pytest.raises(ValueError):
        enumerate_strings("ab", -1)


def test_lm_string_prob_fig2b(fig2b):
    params, E = compile_pfsa(fig2b), output_matrix(fig2b)
    for head in (SparsemaxHead(E), SoftmaxLogHead(E)):
        assert lm_string_prob(params, head, "a") == F(29, 50)
        assert lm_string_prob(params, head, "ab") == F(9, 100)
        assert lm_string_prob(params, head, "ba") == 0


def test_restricted_tvd_examples(fig2b):
    S = enumerate_strings("ab", 3)
    p = {y: F(1, len(S)) for y in S}
    assert restricted_tvd(p, p, S) == 0
    first, second = S.strings[0], S.strings[1]
    left = {y: F(int(y == first)) for y in S}
    right = {y: F(int(y == second)) for y in S}
    assert restricted_tvd(left, right, S) == 1


def test_restricted_tvd_against_perturbation_golden(fig2b):
    S = enumerate_strings("ab", 3)
    d = P.perturb(fig2b, F(1, 100))
    value = restricted_tvd(pfsa_string_probs(fig2b, S), pfsa_string_probs(d, S), S)
    # frozen from the path-enumeration oracle over the 15 strings
    assert value == F(75865862939, 1310796010000)
    assert value == oracles.brute_rtvd(oracles.raw("fig2b"), oracles.perturbed(oracles.raw("fig2b"), F(1, 100)), 3)


pairs = st.lists(st.tuples(st.fractions(0, 1), st.fractions(0, 1)), min_size=1, max_size=10)


@given(pairs)
def test_restricted_tvd_properties(values):
    S = enumerate_strings("a", len(values) - 1)
    p = {y: v for y, (v, _) in zip(S, values)}
    q = {y: v for y, (_, v) in zip(S, values)}
    assert restricted_tvd(p, q, S) == restricted_tvd(q, p, S) >= 0
    assert (restricted_tvd(p, q, S) == 0) == (p == q)


def test_tvd_upper_bound_examples():
    S = enumerate_strings("a", 1)
    p = {y: F(1, 2) for y in S}
    q = {y: F(1, 4) for y in S}
    assert tvd_upper_bound(p, q, S, 0, 0) == restricted_tvd(p, q, S) == F(1, 4)
    assert tvd_upper_bound(p, p, S, F(1, 10), F(2, 10)) == F(3, 20)
    with pytest.raises(ValueError):
        tvd_upper_bound(p, q, S, 2, 0)


def test_tvd_upper_bound_dominates_true_restricted_tvd(fig2b):
    d = P.perturb(fig2b, F(1, 10000))
    S8 = enumerate_strings("ab", 8)
    bound = tvd_upper_bound(
        pfsa_string_probs(fig2b, S8), pfsa_string_probs(d, S8), S8, P.tail_mass(fig2b, 8), P.tail_mass(d, 8)
    )
    S12 = enumerate_strings("ab", 12)
    assert bound >= restricted_tvd(pfsa_string_probs(fig2b, S12), pfsa_string_probs(d, S12), S12)


@pytest.mark.parametrize("name", FIGURES)
@pytest.mark.parametrize("head", ["sparsemax", "softmax"])
def test_verify_exact_figures(name, head):
    report = verify_exact(load_fixture(name), head, 8)
    assert report.verdict == "PASS" and report.rtvd == 0
    assert all(diff == 0 for *_, diff in report.rows)
    assert report.rtvd == sum(r[3] for r in report.rows) / 2
    assert report.tail_r == report.tail_a


def test_verify_exact_float(fig2b):
    report = verify_exact(fig2b, "softmax", 8, "float")
    assert report.verdict == "PASS"
    assert max(r[3] for r in report.rows) <= 1e-9


def test_corrupted_output_matrix_is_caught(fig2b):
    params, E = compile_pfsa(fig2b), output_matrix(fig2b)
    rows = [list(r) for r in E.E]
    d = params.index_of("q1", "b")
    rows[1][d], rows[2][d] = F(8, 10), F(2, 10)  # q1 in the b block: b 9/10 -> 8/10, EOS 1/10 -> 2/10
    bad = OutputMatrix(E.symbols, tuple(map(tuple, rows)))
    report = verify_compiled(fig2b, params, bad, "sparsemax", 3)
    assert report.verdict == "FAIL"
    assert report.counterexample == ("a", "b")


def test_verify_exact_preconditions():
    with pytest.raises(ValueError):
        verify_exact(load_fixture("unnormalized"), "sparsemax", 3)
    with pytest.raises(ValueError, match="not trim"):
        verify_exact(load_fixture("non-tight"), "sparsemax", 3)
    with pytest.raises(EnumerationTooLarge):
        verify_exact(load_fixture("fig2b"), "sparsemax", 40)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_conservation(seed):
    # mass on strings of length <= M plus mass of length-(M+1) prefixes is 1
    a = P.random_trim_pfsa(seed, max_symbols=2)
    M = 4
    params, E = compile_pfsa(a), output_matrix(a)
    head = SparsemaxHead(E)
    S = enumerate_strings(a.alphabet, M)
    total = sum(lm_string_probs(params, head, S).values())
    longer = enumerate_strings(a.alphabet, M + 1)
    prefix_mass = sum(P.forward(a, y).mass for y in longer if len(y) == M + 1)
    assert total + prefix_mass == 1


def test_perturbation_continuity(fig2b):
    reports = {d: verify_approx(fig2b, d, "softmax", max_len=8) for d in (F(1, 100), F(1, 10000))}
    assert reports[F(1, 10000)].rtvd < reports[F(1, 100)].rtvd
    for r in reports.values():
        assert r.rtvd_perturbed == 0


def test_zero_delta(fig2b):
    report = verify_approx(fig2b, 0, "softmax", max_len=6)
    assert report.rtvd == 0 and report.verdict == "PASS"
    with pytest.raises(ValueError, match="zero coordinate"):
        verify_approx(fig2b, 0, "mlp", max_len=6)


def test_bound_covers_longer_strings_for_exact_heads(fig2b):
    report = verify_approx(fig2b, F(1, 1000), "softmax", max_len=5)
    assert report.bound >= direct_rtvd(fig2b, report, 6)
