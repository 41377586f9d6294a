"""String enumeration, head-induced string probabilities, restricted TVD and
end-to-end equivalence reports."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .compiler import ElmanParams, OutputMatrix, compile_pfsa, output_matrix
from .heads import SoftmaxLogHead, SparsemaxHead
from .mlp import FitReport, MlpFitConfig, fit_mlp_log_head
from .numerics import Mode
from .pfsa import EOS, Pfsa, as_symbols, ZeroMassError, forward_step, perturb, tail_mass, trim, validate
from .runtime import init, step

MAX_ENUMERATION = 10**7
FLOAT_TOLERANCE = 1e-9

HEAD_KINDS = ("sparsemax", "softmax", "mlp")


class EnumerationTooLarge(ValueError):
    def __init__(self, size):
        super().__init__(f"enumeration too large: |alphabet|^M = {size} exceeds {MAX_ENUMERATION}")


@dataclass(frozen=True)
class StringSet:
    """All strings of length <= max_len, in length-lexicographic order."""

    alphabet: tuple
    max_len: int
    strings: tuple

    def __iter__(self):
        return iter(self.strings)

    def __len__(self):
        return len(self.strings)


def enumerate_strings(alphabet, max_len: int) -> StringSet:
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    alphabet = tuple(alphabet)
    if len(alphabet) ** max_len > MAX_ENUMERATION:
        raise EnumerationTooLarge(len(alphabet) ** max_len)
    strings = tuple(s for t in range(max_len + 1) for s in itertools.product(alphabet, repeat=t))
    return StringSet(alphabet, max_len, strings)


# -- probabilities ---------------------------------------------------------------


def lm_string_probs(params: ElmanParams, head, strings: StringSet) -> dict:
    """``p(EOS | y) * prod_t p(y_t | y_<t)`` for every string in the set.

    Each prefix is run and scored once. A prefix whose hidden state has zero
    mass under an exact head gives probability 0 to all of its extensions.
    """
    one = Fraction(1) if isinstance(params.b[0], Fraction) else 1.0
    cache = {(): (init(params), one)}
    out = {}
    for y in strings:
        h, prefix_p = _prefix(params, head, cache, y)
        out[y] = prefix_p * _cond(head, h, EOS) if prefix_p else 0 * one
    return out


def _cond(head, h, symbol):
    try:
        return head.conditional(h)[symbol]
    except ZeroMassError:
        return 0


def _prefix(params, head, cache, y):
    if y in cache:
        return cache[y]
    h0, p0 = _prefix(params, head, cache, y[:-1])
    h = step(params, h0, y[-1])
    p = p0 * _cond(head, h0, y[-1]) if p0 else p0
    cache[y] = (h, p)
    return cache[y]


def lm_string_prob(params: ElmanParams, head, y) -> Union[Fraction, float]:
    ys = as_symbols(params.alphabet, y)
    s = StringSet(params.alphabet, len(ys), (ys,))
    return lm_string_probs(params, head, s)[ys]


def pfsa_string_probs(a: Pfsa, strings: StringSet) -> dict:
    """Exact stringsums, sharing forward vectors between prefixes."""
    fw = {(): a.initial}
    out = {}
    for y in strings:
        for n in range(1, len(y) + 1):
            if y[:n] not in fw:
                fw[y[:n]] = forward_step(a, fw[y[: n - 1]], y[n - 1])
        out[y] = sum((v * r for v, r in zip(fw[y], a.final)), Fraction(0))
    return out


def restricted_tvd(p, q, strings: StringSet):
    """``1/2 * sum_{y in S} |p(y) - q(y)|``; ``p`` and ``q`` are mappings or callables."""
    pf = p.__getitem__ if isinstance(p, Mapping) else p
    qf = q.__getitem__ if isinstance(q, Mapping) else q
    diffs = [abs(pf(y) - qf(y)) for y in strings]
    if diffs and all(isinstance(d, Fraction) for d in diffs):
        return sum(diffs, Fraction(0)) / 2
    return math.fsum(float(d) for d in diffs) / 2


def tvd_upper_bound(p, q, strings: StringSet, p_tail, q_tail):
    """``rTVD_S(p, q) + p_tail / 2 + q_tail / 2``."""
    for t in (p_tail, q_tail):
        if not 0 <= t <= 1:
            raise ValueError("tail masses must lie in [0, 1]")
    r = restricted_tvd(p, q, strings)
    if isinstance(r, Fraction) and all(isinstance(t, (int, Fraction)) for t in (p_tail, q_tail)):
        return r + Fraction(p_tail) / 2 + Fraction(q_tail) / 2
    return float(r) + float(p_tail) / 2 + float(q_tail) / 2


# -- reports ---------------------------------------------------------------------


@dataclass
class EquivalenceReport:
    head: str
    mode: str
    max_len: int
    rows: list  # (string, p_A, p_R, |diff|)
    rtvd: object
    tail_a: object
    tail_r: object
    bound: object
    tolerance: object
    verdict: str
    counterexample: Optional[tuple] = None
    wall_clock: float = 0.0
    delta: Optional[Fraction] = None
    rtvd_perturbed: object = None  # rTVD(p_{A_delta}, p_R) on S
    fit: Optional[FitReport] = None
    # objects needed to extend the comparison beyond S; not serialized
    params: Optional[ElmanParams] = field(default=None, repr=False)
    lm_head: object = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def _require_trim(a: Pfsa) -> None:
    problems = validate(a)
    if problems:
        raise ValueError("automaton does not validate: " + "; ".join(problems))
    t, warnings = trim(a)
    if warnings or t.states != a.states:
        raise ValueError("automaton is not trim")


def build_head(kind: str, E: OutputMatrix, temperature=1):
    if kind == "sparsemax":
        return SparsemaxHead(E)
    if kind == "softmax":
        return SoftmaxLogHead(E, temperature)
    raise ValueError(f"unknown exact head {kind!r}")


def verify_exact(
    a: Pfsa, head: str = "sparsemax", max_len: int = 8, mode: Mode = Mode.EXACT, temperature=1
) -> EquivalenceReport:
    """Compare head-induced string probabilities with stringsums on all strings of length <= max_len."""
    start = time.perf_counter()
    enumerate_strings(a.alphabet, max_len)  # size guard before any work
    _require_trim(a)
    report = verify_compiled(a, compile_pfsa(a), output_matrix(a), head, max_len, mode, temperature)
    report.wall_clock = time.perf_counter() - start
    return report


def verify_compiled(
    a: Pfsa,
    params: ElmanParams,
    E: OutputMatrix,
    head: str = "sparsemax",
    max_len: int = 8,
    mode: Mode = Mode.EXACT,
    temperature=1,
) -> EquivalenceReport:
    """Like :func:`verify_exact` but with caller-supplied (possibly altered) parameters."""
    start = time.perf_counter()
    mode = Mode(mode)
    strings = enumerate_strings(a.alphabet, max_len)
    if mode is Mode.FLOAT:
        params, E = params.to_float(), E.to_float()
    lm = build_head(head, E, temperature)
    p_a = pfsa_string_probs(a, strings)
    p_r = lm_string_probs(params, lm, strings)
    rows, counterexample = [], None
    for y in strings:
        pa = p_a[y] if mode is Mode.EXACT else float(p_a[y])
        diff = abs(pa - p_r[y])
        rows.append((y, pa, p_r[y], diff))
        bad = diff != 0 if mode is Mode.EXACT else not diff <= FLOAT_TOLERANCE
        if bad and counterexample is None:
            counterexample = y
    rtvd = restricted_tvd(p_a, p_r, strings) if mode is Mode.EXACT else math.fsum(r[3] for r in rows) / 2
    tail_a = tail_mass(a, max_len)
    mass_r = sum(p_r.values(), Fraction(0)) if mode is Mode.EXACT else math.fsum(p_r.values())
    tail_r = 1 - mass_r
    if mode is Mode.FLOAT:
        tail_a = float(tail_a)
        tail_r = min(1.0, max(0.0, tail_r))
    bound = rtvd + tail_a / 2 + tail_r / 2
    return EquivalenceReport(
        head=head,
        mode=mode.value,
        max_len=max_len,
        rows=rows,
        rtvd=rtvd,
        tail_a=tail_a,
        tail_r=tail_r,
        bound=bound,
        tolerance=0 if mode is Mode.EXACT else FLOAT_TOLERANCE,
        verdict="PASS" if counterexample is None else "FAIL",
        counterexample=counterexample,
        wall_clock=time.perf_counter() - start,
        params=params,
        lm_head=lm,
    )


def verify_approx(
    a: Pfsa,
    delta,
    head: str = "mlp",
    config: MlpFitConfig = MlpFitConfig(),
    max_len: int = 6,
    epsilon: float = 0.01,
    temperature=1,
) -> EquivalenceReport:
    """Perturb ``a`` by ``delta``, build a head on the perturbed automaton and
    compare its LM with the original ``a`` on strings of length <= max_len.

    The tail of the head's LM is bounded by ``tail(p_{A_delta}) +
    2 rTVD_S(p_{A_delta}, p_R)`` rather than enumerated.
    """
    start = time.perf_counter()
    delta = Fraction(delta)
    strings = enumerate_strings(a.alphabet, max_len)
    _require_trim(a)
    a_delta = perturb(a, delta)
    params, E = compile_pfsa(a_delta), output_matrix(a_delta)
    fit = None
    if head == "mlp":
        samples = [_prefix_state(params, y) for y in strings]
        lm, fit = fit_mlp_log_head(E, samples, config, temperature)
        params = params.to_float()
    else:
        lm = build_head(head, E, temperature)
    p_a = pfsa_string_probs(a, strings)
    p_d = pfsa_string_probs(a_delta, strings)
    p_r = lm_string_probs(params, lm, strings)
    exact = all(isinstance(v, Fraction) for v in p_r.values())
    conv = (lambda v: v) if exact else float
    rows = [(y, conv(p_a[y]), p_r[y], abs(conv(p_a[y]) - p_r[y])) for y in strings]
    rtvd = restricted_tvd({y: conv(v) for y, v in p_a.items()}, p_r, strings)
    rtvd_d = restricted_tvd({y: conv(v) for y, v in p_d.items()}, p_r, strings)
    tail_a = conv(tail_mass(a, max_len))
    tail_r = min(conv(tail_mass(a_delta, max_len)) + 2 * rtvd_d, conv(Fraction(1)))
    bound = rtvd + tail_a / 2 + tail_r / 2
    counterexample = None
    if not rtvd < epsilon:
        counterexample = max(rows, key=lambda r: r[3])[0]
    return EquivalenceReport(
        head=head,
        mode="exact" if exact else "float",
        max_len=max_len,
        rows=rows,
        rtvd=rtvd,
        tail_a=tail_a,
        tail_r=tail_r,
        bound=bound,
        tolerance=epsilon,
        verdict="PASS" if rtvd < epsilon else "FAIL",
        counterexample=counterexample,
        wall_clock=time.perf_counter() - start,
        delta=delta,
        rtvd_perturbed=rtvd_d,
        fit=fit,
        params=params,
        lm_head=lm,
    )


def _prefix_state(params: ElmanParams, y):
    h = init(params)
    for sym in y:
        h = step(params, h, sym)
    return h


def direct_rtvd(a: Pfsa, report: EquivalenceReport, max_len: int):
    """rTVD between ``a`` and the report's head-induced LM over a different length bound."""
    strings = enumerate_strings(a.alphabet, max_len)
    p_r = lm_string_probs(report.params, report.lm_head, strings)
    p_a = pfsa_string_probs(a, strings)
    if not all(isinstance(v, Fraction) for v in p_r.values()):
        p_a = {y: float(v) for y, v in p_a.items()}
    return restricted_tvd(p_a, p_r, strings)
