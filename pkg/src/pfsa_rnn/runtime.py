"""The ReLU Elman recurrence ``h' = max(0, U h + V onehot(y) + b)``.

Arithmetic follows the parameters: exact :class:`~fractions.Fraction`
parameters give exact hidden states, ``params.to_float()`` gives float64
with the same control flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .compiler import ElmanParams
from .numerics import precision_of, vector_precision
from .pfsa import Pfsa, StringLike, as_symbols, forward


@dataclass(frozen=True)
class HiddenState:
    entries: tuple
    t: int
    consumed: tuple

    @property
    def l1(self):
        return sum(abs(v) for v in self.entries)


@dataclass(frozen=True)
class PrecisionTrace:
    bits: tuple
    bound_constant: int

    def bound(self, t: int) -> int:
        return self.bound_constant * (t + 1)

    @property
    def violations(self) -> list:
        return [t for t, bits in enumerate(self.bits) if bits > self.bound(t)]


def init(params: ElmanParams) -> HiddenState:
    return HiddenState(params.eta, 0, ())


def step(params: ElmanParams, h: HiddenState, y) -> HiddenState:
    j = params.alphabet.index(as_symbols(params.alphabet, (y,))[0])
    support = [(c, v) for c, v in enumerate(h.entries) if v]
    out = []
    for d, row in enumerate(params.U):
        s = params.V[d][j] + params.b[d]
        for c, v in support:
            s += row[c] * v
        out.append(s if s > 0 else 0 * s)
    return HiddenState(tuple(out), h.t + 1, h.consumed + (y,))


def run(params: ElmanParams, y: StringLike) -> HiddenState:
    h = init(params)
    for sym in as_symbols(params.alphabet, y):
        h = step(params, h, sym)
    return h


def run_prefixes(params: ElmanParams, y: StringLike) -> list:
    """Hidden states ``h_0 .. h_|y|``."""
    hs = [init(params)]
    for sym in as_symbols(params.alphabet, y):
        hs.append(step(params, hs[-1], sym))
    return hs


def check_invariance(a: Pfsa, params: ElmanParams, y: StringLike) -> bool:
    """True iff the hidden state after ``y`` is the forward vector of ``y`` placed in
    the block of its last symbol (the first symbol's block for the empty string),
    with zeros everywhere else."""
    ys = a.symbols(y)
    h = run(params, ys).entries
    fv = forward(a, ys).entries
    last = ys[-1] if ys else params.dummy_symbol
    expected = [0] * params.dim
    for q, v in zip(a.states, fv):
        expected[params.index_of(q, last)] = v
    return list(h) == expected


def first_invariance_failure(a: Pfsa, params: ElmanParams, strings: Iterable) -> tuple | None:
    for y in strings:
        if not check_invariance(a, params, y):
            return tuple(y)
    return None


def bound_constant(params: ElmanParams) -> int:
    """``psi(D) + max psi(U) + max psi(eta) + max psi(V onehot(y) + b)``."""
    c_prime = max(
        (precision_of(params.V[d][j] + params.b[d]) for d in range(params.dim) for j in range(len(params.alphabet))),
        default=0,
    )
    return (
        precision_of(params.dim)
        + max((precision_of(v) for row in params.U for v in row), default=0)
        + vector_precision(params.eta)
        + c_prime
    )


def precision_trace(params: ElmanParams, y: StringLike) -> PrecisionTrace:
    bits = tuple(vector_precision(h.entries) for h in run_prefixes(params, y))
    return PrecisionTrace(bits, bound_constant(params))
