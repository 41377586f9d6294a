"""Compile a PFSA into ReLU Elman RNN parameters and an output matrix.

Hidden coordinates are indexed by (state, symbol) pairs in symbol-major
order: ``(states[i], alphabet[j])`` lives at ``j * |Q| + i``. After reading
``y_1..y_t`` the block belonging to ``y_t`` holds the forward vector of the
prefix and every other block is zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

from .numerics import format_rational, parse_rational
from .pfsa import EOS, Pfsa, UnknownSymbolError, validate


@dataclass(frozen=True)
class ElmanParams:
    alphabet: tuple
    states: tuple
    U: tuple  # D x D
    V: tuple  # D x |alphabet|
    b: tuple  # D
    eta: tuple  # D

    @property
    def dim(self) -> int:
        return len(self.states) * len(self.alphabet)

    @property
    def dummy_symbol(self):
        return self.alphabet[0]

    def index_of(self, q, y) -> int:
        try:
            i = self.states.index(q)
        except ValueError:
            raise ValueError(f"unknown state {q!r}") from None
        try:
            j = self.alphabet.index(y)
        except ValueError:
            raise UnknownSymbolError(y) from None
        return j * len(self.states) + i

    def coordinate(self, d: int) -> tuple:
        """Inverse of :meth:`index_of`."""
        if not 0 <= d < self.dim:
            raise IndexError(d)
        j, i = divmod(d, len(self.states))
        return self.states[i], self.alphabet[j]

    def block(self, y) -> range:
        j = self.alphabet.index(y)
        n = len(self.states)
        return range(j * n, (j + 1) * n)

    def to_float(self) -> "ElmanParams":
        def f(m):
            return tuple(tuple(float(v) for v in row) for row in m)

        return ElmanParams(
            self.alphabet,
            self.states,
            f(self.U),
            f(self.V),
            tuple(float(v) for v in self.b),
            tuple(float(v) for v in self.eta),
        )


@dataclass(frozen=True)
class OutputMatrix:
    """Rows follow ``alphabet + (EOS,)``; columns follow the hidden coordinates."""

    symbols: tuple
    E: tuple

    def apply(self, h) -> list:
        """``E @ h``; the result type follows the operands (Fraction or float)."""
        out = []
        for row in self.E:
            acc = 0 * (row[0] * h[0])
            for e, v in zip(row, h):
                if v:
                    acc += e * v
            out.append(acc)
        return out

    def to_float(self) -> "OutputMatrix":
        return OutputMatrix(self.symbols, tuple(tuple(float(v) for v in row) for row in self.E))


def compile_pfsa(a: Pfsa) -> ElmanParams:
    problems = validate(a)
    if problems:
        raise ValueError("automaton does not validate: " + "; ".join(problems))
    nq, ns = len(a.states), len(a.alphabet)
    D = nq * ns
    zero, one = Fraction(0), Fraction(1)
    U = [[zero] * D for _ in range(D)]
    si = a.state_index
    for (q, y, r), w in a.transitions.items():
        row = a.symbol_index[y] * nq + si[r]
        # the row symbol labels the transition; every column block repeats it
        for j in range(ns):
            U[row][j * nq + si[q]] = w
    V = [[one if d // nq == j else zero for j in range(ns)] for d in range(D)]
    b = [-one] * D
    eta = [zero] * D
    for i, lam in enumerate(a.initial):
        eta[i] = lam  # block of the first symbol
    return ElmanParams(
        a.alphabet,
        a.states,
        tuple(map(tuple, U)),
        tuple(map(tuple, V)),
        tuple(b),
        tuple(eta),
    )


def output_matrix(a: Pfsa) -> OutputMatrix:
    problems = validate(a)
    if problems:
        raise ValueError("automaton does not validate: " + "; ".join(problems))
    nq, ns = len(a.states), len(a.alphabet)
    D = nq * ns
    E = [[Fraction(0)] * D for _ in range(ns + 1)]
    si = a.state_index
    for (q, y, _), w in a.transitions.items():
        for j in range(ns):
            E[a.symbol_index[y]][j * nq + si[q]] += w
    for i, f in enumerate(a.final):
        for j in range(ns):
            E[ns][j * nq + i] = f
    return OutputMatrix(a.alphabet + (EOS,), tuple(map(tuple, E)))


# -- serialization -------------------------------------------------------------


def _mat(m):
    return [[format_rational(v) for v in row] for row in m]


def params_to_dict(params: ElmanParams, E: OutputMatrix) -> dict:
    return {
        "dimension": params.dim,
        "alphabet": list(params.alphabet),
        "states": list(params.states),
        "ordering": [list(params.coordinate(d)) for d in range(params.dim)],
        "U": _mat(params.U),
        "V": _mat(params.V),
        "b": [format_rational(v) for v in params.b],
        "eta": [format_rational(v) for v in params.eta],
        "output_symbols": list(E.symbols),
        "E": _mat(E.E),
    }


def params_from_dict(doc: dict) -> tuple:
    def mat(m):
        return tuple(tuple(parse_rational(v) for v in row) for row in m)

    try:
        params = ElmanParams(
            tuple(doc["alphabet"]),
            tuple(doc["states"]),
            mat(doc["U"]),
            mat(doc["V"]),
            tuple(parse_rational(v) for v in doc["b"]),
            tuple(parse_rational(v) for v in doc["eta"]),
        )
        E = OutputMatrix(tuple(doc["output_symbols"]), mat(doc["E"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed params document: {exc}") from None
    D = params.dim
    if doc.get("dimension", D) != D or len(params.U) != D or any(len(r) != D for r in params.U):
        raise ValueError("params dimension mismatch")
    ordering = doc.get("ordering")
    if ordering is not None and [tuple(o) for o in ordering] != [params.coordinate(d) for d in range(D)]:
        raise ValueError("params ordering differs from the canonical symbol-major order")
    return params, E


def save_params(path: Union[str, Path], params: ElmanParams, E: OutputMatrix) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, E), indent=1) + "\n")


def load_params(path: Union[str, Path]) -> tuple:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return params_from_dict(doc)
