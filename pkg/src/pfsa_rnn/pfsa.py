"""Probabilistic finite-state automata over exact rationals."""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .numerics import format_rational, parse_rational

EOS = "<EOS>"

Symbols = tuple  # a string over the alphabet, as a tuple of symbols
StringLike = Union[str, Sequence[str]]


class PfsaFormatError(ValueError):
    """Raised for malformed automaton documents.

    ``token`` is the offending JSON value, when there is one, so callers
    holding the source text can point at it.
    """

    def __init__(self, msg: str, token=None):
        super().__init__(msg)
        self.token = token


class UnknownSymbolError(ValueError):
    def __init__(self, symbol):
        super().__init__(f"unknown symbol {symbol!r}")
        self.symbol = symbol


class ZeroMassError(ValueError):
    def __init__(self, msg: str = "prefix has probability zero"):
        super().__init__(msg)


@dataclass(frozen=True)
class Pfsa:
    """A PFSA ``(alphabet, states, transitions, initial, final)``.

    ``transitions`` maps ``(q, y, q')`` to a weight; absent triples weigh 0
    and zero weights are dropped on construction. ``initial`` and ``final``
    are aligned with ``states``. Symbol and state order is significant: it is
    the order used for every vector and matrix derived from the automaton.
    """

    alphabet: tuple
    states: tuple
    transitions: Mapping[tuple, Fraction] = field(hash=False)
    initial: tuple
    final: tuple

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        states = tuple(self.states)
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("duplicate symbol in alphabet")
        if len(set(states)) != len(states):
            raise ValueError("duplicate state")
        if EOS in alphabet:
            raise ValueError(f"{EOS} is reserved and cannot be an input symbol")
        if len(self.initial) != len(states) or len(self.final) != len(states):
            raise ValueError("initial/final vectors must have one entry per state")
        sset, aset = set(states), set(alphabet)
        trans = {}
        for (q, y, r), w in self.transitions.items():
            if q not in sset or r not in sset:
                raise ValueError(f"transition ({q}, {y}, {r}) mentions an unknown state")
            if y not in aset:
                raise UnknownSymbolError(y)
            w = Fraction(w)
            if w != 0:
                trans[(q, y, r)] = w
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "initial", tuple(Fraction(v) for v in self.initial))
        object.__setattr__(self, "final", tuple(Fraction(v) for v in self.final))

    @cached_property
    def state_index(self) -> dict:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def symbol_index(self) -> dict:
        return {y: j for j, y in enumerate(self.alphabet)}

    @cached_property
    def arcs(self) -> dict:
        """symbol -> list of (source index, target index, weight)."""
        out = {y: [] for y in self.alphabet}
        si = self.state_index
        for (q, y, r), w in self.transitions.items():
            out[y].append((si[q], si[r], w))
        return out

    def weight(self, q, y, r) -> Fraction:
        return self.transitions.get((q, y, r), Fraction(0))

    def transition_matrix(self, y) -> list:
        """Dense ``T[q][q']`` for symbol ``y``."""
        n = len(self.states)
        T = [[Fraction(0)] * n for _ in range(n)]
        for i, k, w in self.arcs[y]:
            T[i][k] = w
        return T

    def symbols(self, y: StringLike) -> tuple:
        return as_symbols(self.alphabet, y)


def as_symbols(alphabet: Sequence[str], y: StringLike) -> tuple:
    """Turn ``y`` into a tuple of symbols, checking each against ``alphabet``.

    A ``str`` is split on whitespace when it contains any, otherwise into
    characters.
    """
    if isinstance(y, str):
        seq = y.split() if any(c.isspace() for c in y) else list(y)
    else:
        seq = list(y)
    aset = set(alphabet)
    for s in seq:
        if s not in aset:
            raise UnknownSymbolError(s)
    return tuple(seq)


def show(y: Sequence[str]) -> str:
    """Render a symbol tuple; multi-character symbols are space separated."""
    if all(len(s) == 1 for s in y):
        return "".join(y)
    return " ".join(y)


# -- serialization -----------------------------------------------------------


def from_dict(doc: Mapping) -> Pfsa:
    try:
        alphabet = list(doc["alphabet"])
        states = list(doc["states"])
    except (KeyError, TypeError) as exc:
        raise PfsaFormatError(f"missing or malformed field: {exc}") from None
    sset = set(states)

    def weights(name):
        raw = doc.get(name, {})
        if not isinstance(raw, Mapping):
            raise PfsaFormatError(f"{name!r} must be an object mapping states to weights")
        vec = {q: Fraction(0) for q in states}
        for q, w in raw.items():
            if q not in sset:
                raise PfsaFormatError(f"{name} weight for unknown state {q!r}")
            vec[q] = _weight(w, f"{name}[{q}]")
        return tuple(vec[q] for q in states)

    initial = weights("initial")
    final = weights("final")
    trans = {}
    for n, t in enumerate(doc.get("transitions", [])):
        try:
            key = (t["from"], t["symbol"], t["to"])
            w = t["weight"]
        except (KeyError, TypeError):
            raise PfsaFormatError(f"transition #{n} needs from/symbol/to/weight") from None
        if key in trans:
            raise PfsaFormatError(f"duplicate transition {key}")
        trans[key] = _weight(w, f"transition #{n}")
    try:
        return Pfsa(alphabet, states, trans, initial, final)
    except ValueError as exc:
        raise PfsaFormatError(str(exc)) from None


def _weight(w, where: str) -> Fraction:
    if isinstance(w, bool) or not isinstance(w, (str, int)):
        raise PfsaFormatError(f"{where}: weight must be a rational string, got {w!r}", w)
    try:
        return parse_rational(str(w))
    except ValueError as exc:
        raise PfsaFormatError(f"{where}: {exc}", w) from None


def to_dict(a: Pfsa) -> dict:
    return {
        "alphabet": list(a.alphabet),
        "states": list(a.states),
        "initial": {q: format_rational(w) for q, w in zip(a.states, a.initial) if w != 0},
        "final": {q: format_rational(w) for q, w in zip(a.states, a.final) if w != 0},
        "transitions": [
            {"from": q, "symbol": y, "to": r, "weight": format_rational(a.transitions[(q, y, r)])}
            for q in a.states
            for y in a.alphabet
            for r in a.states
            if (q, y, r) in a.transitions
        ],
    }


def loads(text: str) -> Pfsa:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PfsaFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, Mapping):
        raise PfsaFormatError("top level must be a JSON object")
    try:
        return from_dict(doc)
    except PfsaFormatError as exc:
        pos = text.find(json.dumps(exc.token)) if exc.token is not None else -1
        if pos < 0:
            raise
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        raise PfsaFormatError(f"line {line}, column {col}: {exc}", exc.token) from None


def load(path: Union[str, Path]) -> Pfsa:
    return loads(Path(path).read_text())


def dumps(a: Pfsa) -> str:
    return json.dumps(to_dict(a), indent=2) + "\n"


# -- structure -----------------------------------------------------------------


def validate(a: Pfsa) -> list:
    """Return a list of human-readable violations; empty iff ``a`` is a PFSA."""
    problems = []
    for q, w in zip(a.states, a.initial):
        if w < 0:
            problems.append(f"negative initial weight {w} on {q}")
    for q, w in zip(a.states, a.final):
        if w < 0:
            problems.append(f"negative final weight {w} on {q}")
    for (q, y, r), w in a.transitions.items():
        if w < 0:
            problems.append(f"negative weight {w} on transition ({q}, {y}, {r})")
    total = sum(a.initial, Fraction(0))
    if total != 1:
        problems.append(f"initial weights sum to {total}")
    for q, s in zip(a.states, _outgoing_sums(a)):
        if s != 1:
            problems.append(f"state {q}: outgoing weights plus final weight sum to {s}")
    return problems


def _outgoing_sums(a: Pfsa) -> list:
    sums = list(a.final)
    si = a.state_index
    for (q, _, _), w in a.transitions.items():
        sums[si[q]] += w
    return sums


def is_deterministic(a: Pfsa) -> bool:
    if sum(1 for w in a.initial if w > 0) != 1:
        return False
    seen = set()
    for (q, y, _), w in a.transitions.items():
        if w > 0:
            if (q, y) in seen:
                return False
            seen.add((q, y))
    return True


def _reach(start: Iterable[int], edges: Mapping[int, list]) -> set:
    seen = set(start)
    todo = deque(seen)
    while todo:
        i = todo.popleft()
        for k in edges.get(i, ()):
            if k not in seen:
                seen.add(k)
                todo.append(k)
    return seen


def trim(a: Pfsa) -> tuple:
    """Keep only accessible and co-accessible states.

    Weights are never renormalized. A warning is produced for every
    surviving row that no longer sums to one, which means the input put
    mass on paths that never terminate.
    """
    fwd, bwd = {}, {}
    si = a.state_index
    for (q, _, r), w in a.transitions.items():
        if w > 0:
            fwd.setdefault(si[q], []).append(si[r])
            bwd.setdefault(si[r], []).append(si[q])
    acc = _reach((i for i, w in enumerate(a.initial) if w > 0), fwd)
    coacc = _reach((i for i, w in enumerate(a.final) if w > 0), bwd)
    keep = [i for i in range(len(a.states)) if i in acc and i in coacc]
    kept = {a.states[i] for i in keep}
    t = Pfsa(
        a.alphabet,
        tuple(a.states[i] for i in keep),
        {k: w for k, w in a.transitions.items() if k[0] in kept and k[2] in kept},
        tuple(a.initial[i] for i in keep),
        tuple(a.final[i] for i in keep),
    )
    warnings = []
    total = sum(t.initial, Fraction(0))
    if total != sum(a.initial, Fraction(0)):
        warnings.append(f"initial weights sum to {total} after trimming")
    for q, s in zip(t.states, _outgoing_sums(t)):
        if s != 1:
            warnings.append(f"state {q}: outgoing weights plus final weight sum to {s} after trimming")
    return t, warnings


# -- probabilities ---------------------------------------------------------------


@dataclass(frozen=True)
class ForwardVector:
    """``entries[q]`` is the joint probability of reading ``prefix`` and being in ``q``."""

    entries: tuple
    prefix: tuple

    @property
    def mass(self) -> Fraction:
        return sum(self.entries, Fraction(0))


@dataclass(frozen=True)
class NextSymbolDistribution:
    """Probabilities over the alphabet followed by EOS."""

    symbols: tuple
    probs: tuple

    def __getitem__(self, y):
        return self.probs[self.symbols.index(y)]

    def to_dict(self) -> dict:
        return dict(zip(self.symbols, self.probs))


def forward_step(a: Pfsa, vec: Sequence, y) -> tuple:
    out = [Fraction(0)] * len(a.states)
    for i, k, w in a.arcs[y]:
        if vec[i]:
            out[k] += vec[i] * w
    return tuple(out)


def forward(a: Pfsa, prefix: StringLike) -> ForwardVector:
    ys = a.symbols(prefix)
    vec = a.initial
    for y in ys:
        vec = forward_step(a, vec, y)
    return ForwardVector(vec, ys)


def stringsum(a: Pfsa, y: StringLike) -> Fraction:
    vec = forward(a, y).entries
    return sum((v * r for v, r in zip(vec, a.final)), Fraction(0))


def state_distribution(a: Pfsa, q) -> NextSymbolDistribution:
    """Per-state next-action distribution: outgoing mass per symbol, then the final weight."""
    i = a.state_index[q]
    probs = []
    for y in a.alphabet:
        probs.append(sum((w for s, _, w in a.arcs[y] if s == i), Fraction(0)))
    probs.append(a.final[i])
    return NextSymbolDistribution(a.alphabet + (EOS,), tuple(probs))


def conditional(a: Pfsa, prefix: StringLike) -> NextSymbolDistribution:
    fv = forward(a, prefix)
    mass = fv.mass
    if mass == 0:
        raise ZeroMassError()
    acc = [Fraction(0)] * (len(a.alphabet) + 1)
    for q, v in zip(a.states, fv.entries):
        if v:
            for n, p in enumerate(state_distribution(a, q).probs):
                acc[n] += p * v
    return NextSymbolDistribution(a.alphabet + (EOS,), tuple(x / mass for x in acc))


def perturb(a: Pfsa, delta) -> Pfsa:
    """Add ``delta`` to every transition (including absent ones) and final weight, then renormalize."""
    delta = Fraction(delta)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    z = 1 + (len(a.alphabet) * len(a.states) + 1) * delta
    trans = {
        (q, y, r): (a.weight(q, y, r) + delta) / z
        for q in a.states
        for y in a.alphabet
        for r in a.states
    }
    final = tuple((f + delta) / z for f in a.final)
    return Pfsa(a.alphabet, a.states, trans, a.initial, final)


def length_masses(a: Pfsa) -> Iterator[Fraction]:
    """Yield the probability mass of strings of length 0, 1, 2, ..."""
    vec = a.initial
    while True:
        yield sum((v * r for v, r in zip(vec, a.final)), Fraction(0))
        nxt = [Fraction(0)] * len(a.states)
        for y in a.alphabet:
            for i, k, w in a.arcs[y]:
                if vec[i]:
                    nxt[k] += vec[i] * w
        vec = tuple(nxt)


def length_mass(a: Pfsa, t: int) -> Fraction:
    if t < 0:
        raise ValueError("length must be nonnegative")
    for n, m in enumerate(length_masses(a)):
        if n == t:
            return m


def tail_mass(a: Pfsa, max_len: int) -> Fraction:
    """``1 - mass(strings of length <= max_len)``."""
    total = Fraction(0)
    for n, m in enumerate(length_masses(a)):
        total += m
        if n == max_len:
            return 1 - total


def tail_cutoff(a: Pfsa, eps, max_len: int) -> Optional[int]:
    """Smallest ``M <= max_len`` whose tail beyond length ``M`` is below ``eps``; None if none."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    total = Fraction(0)
    for n, m in enumerate(length_masses(a)):
        if n > max_len:
            return None
        total += m
        if 1 - total < eps:
            return n


def sample(a: Pfsa, seed: int, max_len: Optional[int] = None) -> tuple:
    """Ancestral sample; reproducible for a given seed."""
    rng = random.Random(seed)

    def draw(options):
        u = Fraction(rng.random())
        acc = Fraction(0)
        for item, w in options:
            acc += w
            if u < acc:
                return item
        return options[-1][0]

    q = draw([(i, w) for i, w in enumerate(a.initial) if w > 0])
    out = []
    while max_len is None or len(out) < max_len:
        options = [((None, None), a.final[q])] if a.final[q] > 0 else []
        for y in a.alphabet:
            options.extend(((y, k), w) for i, k, w in a.arcs[y] if i == q)
        y, k = draw(options)
        if y is None:
            break
        out.append(y)
        q = k
    return tuple(out)


# -- random automata -----------------------------------------------------------


def _partition(rng: random.Random, total: int, parts: int) -> list:
    cuts = sorted(rng.sample(range(1, total), parts - 1)) if parts > 1 else []
    bounds = [0] + cuts + [total]
    return [bounds[i + 1] - bounds[i] for i in range(parts)]


def random_trim_pfsa(
    seed: int, max_states: int = 4, max_symbols: int = 3, denominator: int = 10
) -> Pfsa:
    """A random trim PFSA whose weights are multiples of ``1/denominator``.

    Draws are rejected until the automaton is already trim, so every
    state row sums to one and the induced LM is tight.
    """
    rng = random.Random(seed)
    while True:
        nq = rng.randint(1, max_states)
        ns = rng.randint(1, max_symbols)
        states = tuple(f"q{i}" for i in range(nq))
        alphabet = tuple("abcdefgh"[:ns])
        init = [0] * nq
        for i, c in zip(rng.sample(range(nq), k := rng.randint(1, nq)), _partition(rng, denominator, k)):
            init[i] = c
        trans, final = {}, []
        slots = [(y, r) for y in alphabet for r in states] + [None]
        for q in states:
            k = rng.randint(1, min(4, len(slots)))
            chosen = rng.sample(slots, k)
            final_w = 0
            for slot, c in zip(chosen, _partition(rng, denominator, k)):
                if slot is None:
                    final_w = c
                else:
                    trans[(q, slot[0], slot[1])] = Fraction(c, denominator)
            final.append(Fraction(final_w, denominator))
        a = Pfsa(alphabet, states, trans, tuple(Fraction(c, denominator) for c in init), tuple(final))
        t, warnings = trim(a)
        if not warnings and t.states == a.states:
            return a
