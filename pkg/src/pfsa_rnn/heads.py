"""Simplex projections and the output heads that turn hidden states into
next-symbol distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .compiler import OutputMatrix
from .pfsa import NextSymbolDistribution, ZeroMassError


def sparsemax(x: Sequence) -> list:
    """Euclidean projection of ``x`` onto the probability simplex.

    Sort-and-threshold: with ``z`` sorted descending, the support size is the
    largest ``k`` such that ``1 + k z_k > z_1 + ... + z_k``. Exact for Fraction
    input.
    """
    if not x:
        raise ValueError("sparsemax of an empty vector")
    z = sorted(x, reverse=True)
    cum = 0 * z[0]
    k, cum_k = 0, None
    for n, v in enumerate(z, start=1):
        cum += v
        if 1 + n * v > cum:
            k, cum_k = n, cum
    tau = (cum_k - 1) / k
    return [v - tau if v > tau else 0 * v for v in x]


def softmax(x: Sequence[float], temperature: float = 1.0) -> list:
    """``exp(temperature * x) / sum(...)`` with ``exp(-inf) = 0``."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    finite = [v for v in x if v != -math.inf]
    if not finite:
        raise ValueError("empty support")
    m = max(finite)
    e = [math.exp(temperature * (v - m)) if v != -math.inf else 0.0 for v in x]
    s = math.fsum(e)
    return [v / s for v in e]


def extended_log(x: Sequence) -> list:
    out = []
    for v in x:
        if v < 0:
            raise ValueError(f"extended_log of negative value {v}")
        out.append(math.log(v) if v > 0 else -math.inf)
    return out


def _entries(h):
    return h.entries if hasattr(h, "entries") else tuple(h)


@dataclass(frozen=True)
class SparsemaxHead:
    E: OutputMatrix

    def conditional(self, h) -> NextSymbolDistribution:
        return sparsemax_head_conditional(self, h)


@dataclass(frozen=True)
class SoftmaxLogHead:
    E: OutputMatrix
    temperature: object = 1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def conditional(self, h) -> NextSymbolDistribution:
        return softmax_head_conditional(self, h)


def sparsemax_head_conditional(head: SparsemaxHead, h) -> NextSymbolDistribution:
    h = _entries(h)
    l1 = sum(abs(v) for v in h)
    if l1 == 0:
        raise ZeroMassError("zero-probability prefix")
    scores = head.E.apply([v / l1 for v in h])
    return NextSymbolDistribution(head.E.symbols, tuple(sparsemax(scores)))


def _is_integral(t) -> bool:
    return isinstance(t, int) or (isinstance(t, Fraction) and t.denominator == 1)


def softmax_head_conditional(head: SoftmaxLogHead, h) -> NextSymbolDistribution:
    """``softmax(temperature * log(E h))``.

    With exact input and an integral temperature this is evaluated in closed
    form as ``(E h)^t / sum((E h)^t)``, which is the same function.
    """
    h = _entries(h)
    if sum(abs(v) for v in h) == 0:
        raise ZeroMassError("zero-probability prefix")
    scores = head.E.apply(h)
    exact = all(isinstance(v, Fraction) for v in scores)
    if exact and _is_integral(head.temperature):
        t = int(head.temperature)
        powered = [v**t for v in scores]
        total = sum(powered, Fraction(0))
        if total == 0:
            raise ValueError("empty support")
        probs = tuple(v / total for v in powered)
    else:
        probs = tuple(softmax(extended_log([float(v) for v in scores]), float(head.temperature)))
    return NextSymbolDistribution(head.E.symbols, probs)


def lipschitz_constant(string_length: int, temperature: float, dim: int) -> float:
    """``(string_length + 1) * sqrt(dim) * temperature``; ``sqrt(dim)`` bounds the
    2-norm by the sup-norm."""
    if string_length < 0 or temperature <= 0 or dim <= 0:
        raise ValueError("lipschitz_constant needs nonnegative length and positive temperature/dim")
    return (string_length + 1) * math.sqrt(dim) * float(temperature)
