"""Single-hidden-layer ReLU heads fitted to ``h -> log(E h)``.

Each target coordinate ``log(e_r . h)`` is a concave function of the scalar
``z = e_r . h``. On a finite set of ``z`` values the best continuous
piecewise-linear fit with ``K`` pieces is found by a greedy Chebyshev
segmentation; the lower envelope of the segment lines keeps the same error
and costs one hidden unit per piece (one linear unit plus one unit per
kink). Units are allotted across outputs by bisecting on a shared error
level. The output layer is then re-solved as a minimax linear program over
all units jointly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .compiler import OutputMatrix
from .heads import lipschitz_constant, softmax
from .pfsa import NextSymbolDistribution


@dataclass(frozen=True)
class MlpFitConfig:
    hidden: int = 64
    train_size: int = 2000  # jittered points added to the samples for fitting
    val_size: int = 1000  # held-out jittered points added to the samples for validation
    jitter: float = 1e-3  # relative size of the per-coordinate perturbation
    max_iter: int = 60  # bisection steps when allotting units to outputs
    tau: float = 1e-3
    seed: int = 0
    clamp: bool = False

    def __post_init__(self):
        for name in ("hidden", "train_size", "val_size", "max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.jitter < 0 or self.tau <= 0:
            raise ValueError("jitter must be nonnegative and tau positive")


@dataclass(frozen=True)
class FitReport:
    tau_achieved: float
    tau_target: float
    converged: bool
    train_sup_error: float
    xi1: float  # smallest positive hidden coordinate among samples
    xi2: float  # smallest target logit among samples
    lipschitz: float
    units_per_output: tuple
    n_train: int
    n_val: int


@dataclass(frozen=True, eq=False)
class MlpHead:
    symbols: tuple
    W1: np.ndarray  # H x D
    b1: np.ndarray  # H
    W2: np.ndarray  # |symbols| x H
    b2: np.ndarray  # |symbols|
    xi1: float = 0.0
    clamp: bool = False
    temperature: float = 1.0
    tau_achieved: float = math.nan
    validation: Optional[np.ndarray] = None  # rows are hidden states
    config: Optional[MlpFitConfig] = None
    E: Optional[np.ndarray] = None  # fitting target only

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def logits(self, X) -> np.ndarray:
        """Forward pass on a batch (rows) or a single hidden state."""
        X = np.asarray(X, dtype=np.float64)
        if self.clamp:
            X = np.maximum(self.xi1, X)
        return np.maximum(0.0, X @ self.W1.T + self.b1) @ self.W2.T + self.b2

    def conditional(self, h) -> NextSymbolDistribution:
        return mlp_head_conditional(self, h)

    def validation_error(self) -> float:
        """Sup logit error on the stored validation set."""
        return _sup_error(self.logits(self.validation), _targets(self.E, self.validation))


def mlp_head_conditional(head: MlpHead, h) -> NextSymbolDistribution:
    x = [float(v) for v in (h.entries if hasattr(h, "entries") else h)]
    z = head.logits(np.array(x))
    return NextSymbolDistribution(head.symbols, tuple(softmax(z.tolist(), head.temperature)))


def _targets(E: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.log(X @ E.T)


def _sup_error(pred: np.ndarray, Y: np.ndarray) -> float:
    return float(np.max(np.abs(pred - Y)))


# -- data ----------------------------------------------------------------------


def _jittered(X: np.ndarray, n: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    # multiply active coordinates by exp(U(-scale, scale)); zeros stay zero so
    # points remain inside their symbol block
    base = X[rng.integers(len(X), size=n)]
    return base * np.exp(rng.uniform(-scale, scale, size=base.shape))


# -- one-dimensional minimax pieces ------------------------------------------------


def _chebyshev_line(z: np.ndarray, y: np.ndarray) -> tuple:
    """Best sup-norm line for concave samples: the chord lifted by half its largest gap."""
    if len(z) == 1 or z[-1] == z[0]:
        return 0.0, float(np.mean(y)), float((y.max() - y.min()) / 2)
    slope = (y[-1] - y[0]) / (z[-1] - z[0])
    gap = y - (y[0] + slope * (z - z[0]))
    half = float(gap.max() - gap.min()) / 2
    return float(slope), float(y[0] - slope * z[0] + gap.min() + half), half


def _segments(z: np.ndarray, y: np.ndarray, tau: float) -> list:
    """Greedy maximal segments (index ranges) whose Chebyshev line error is <= tau."""
    out, i, n = [], 0, len(z)
    while i < n:
        # error only grows with the segment, so gallop then bisect on its end
        lo, step = i + 1, 1
        while lo + step <= n and _chebyshev_line(z[i : lo + step], y[i : lo + step])[2] <= tau:
            lo += step
            step *= 2
        hi = min(n, lo + step)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _chebyshev_line(z[i:mid], y[i:mid])[2] <= tau:
                lo = mid
            else:
                hi = mid
        out.append((i, lo))
        i = lo
    return out


def _envelope(lines: list) -> tuple:
    """Breakpoints of ``min_k (a_k z + c_k)`` for lines ordered by decreasing slope.

    Returns ``(first_line, [(knot, slope_change), ...])``.
    """
    hull = []
    for a, c in lines:
        while hull:
            a0, c0 = hull[-1]
            if a0 == a:
                if c < c0:
                    hull.pop()
                    continue
                break
            if len(hull) >= 2:
                a1, c1 = hull[-2]
                # drop the middle line if it never attains the minimum
                if (c - c1) * (a1 - a0) <= (c0 - c1) * (a1 - a):
                    hull.pop()
                    continue
            break
        if not hull or hull[-1][0] != a:
            hull.append((a, c))
    kinks = []
    for (a0, c0), (a1, c1) in zip(hull, hull[1:]):
        kinks.append(((c1 - c0) / (a0 - a1), a1 - a0))
    return hull[0], kinks


def _units_for(z: np.ndarray, y: np.ndarray, tau: float) -> int:
    return len(_segments(z, y, tau))


def _allocate(curves: list, hidden: int, max_iter: int) -> float:
    """Smallest shared error level whose segment counts fit in ``hidden`` units."""
    def total(t):
        return sum(_units_for(z, y, t) for z, y in curves)

    hi = max(_chebyshev_line(z, y)[2] for z, y in curves) + 1e-12
    if total(hi) > hidden:
        return hi
    lo = 0.0
    if total(lo) <= hidden:
        return lo
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        if total(mid) <= hidden:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * hi:
            break
    return hi


# -- fitting -----------------------------------------------------------------------


def _construct(E: np.ndarray, X: np.ndarray, hidden: int, max_iter: int) -> tuple:
    Y = _targets(E, X)
    curves = []
    for r in range(E.shape[0]):
        z, idx = np.unique(X @ E[r], return_index=True)
        curves.append((z, Y[idx, r]))
    level = _allocate(curves, hidden, max_iter)
    rows, biases, out_w, units = [], [], [], []
    b2 = np.zeros(E.shape[0])
    for r, (z, y) in enumerate(curves):
        segs = _segments(z, y, level)
        if len(segs) > hidden - len(rows):
            units.append(0)
            continue
        lines = [_chebyshev_line(z[i:j], y[i:j])[:2] for i, j in segs]
        (slope, c0), kinks = _envelope(lines)
        b2[r] = c0
        start = len(rows)
        # relu(e_r . h) = z on the domain, so unit `start` carries the linear part
        rows.append(E[r])
        biases.append(0.0)
        for t, da in kinks:
            if t <= 0:
                # kink left of the domain z > 0: fold it into the linear part
                slope += da
                b2[r] -= da * t
                continue
            rows.append(E[r] / t)
            biases.append(-1.0)
            out_w.append((r, len(rows) - 1, da * t))
        out_w.append((r, start, slope))
        units.append(len(rows) - start)
    W1 = np.zeros((hidden, E.shape[1]))
    b1 = np.zeros(hidden)
    W2 = np.zeros((E.shape[0], hidden))
    if rows:
        W1[: len(rows)] = np.array(rows)
        b1[: len(rows)] = biases
    for r, k, w in out_w:
        W2[r, k] += w
    return W1, b1, W2, b2, tuple(units)


def _minimax_output_layer(A: np.ndarray, Y: np.ndarray, W2: np.ndarray, b2: np.ndarray) -> tuple:
    """Re-solve each output row as a Chebyshev regression on the fixed features ``A``."""
    from scipy.optimize import linprog

    n, H = A.shape
    used = np.flatnonzero(np.any(A != 0, axis=0))
    F = np.hstack([A[:, used], np.ones((n, 1))])
    scale = np.maximum(np.abs(F).max(axis=0), 1e-300)
    Fs = F / scale
    W2, b2 = W2.copy(), b2.copy()
    for r in range(Y.shape[1]):
        m = Fs.shape[1]
        # variables: coefficients (m), error bound t; minimize t
        cost = np.zeros(m + 1)
        cost[-1] = 1.0
        ones = np.ones((n, 1))
        A_ub = np.vstack([np.hstack([Fs, -ones]), np.hstack([-Fs, -ones])])
        b_ub = np.concatenate([Y[:, r], -Y[:, r]])
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * m + [(0, None)], method="highs")
        if res.status != 0:
            continue
        coef = res.x[:m] / scale
        old = np.max(np.abs(A @ W2[r] + b2[r] - Y[:, r]))
        new_w = np.zeros(H)
        new_w[used] = coef[:-1]
        new = np.max(np.abs(A @ new_w + coef[-1] - Y[:, r]))
        if new < old:
            W2[r], b2[r] = new_w, coef[-1]
    return W2, b2


def fit_mlp_log_head(
    E: OutputMatrix, samples: Sequence, config: MlpFitConfig = MlpFitConfig(), temperature: float = 1.0
) -> tuple:
    """Fit an MLP to ``h -> log(E h)`` over ``samples`` (hidden states).

    Raises ValueError if ``samples`` is empty or some sample has ``E h``
    with a zero coordinate. Failing to reach ``config.tau`` is reported in
    the returned :class:`FitReport`, not raised.
    """
    if not samples:
        raise ValueError("no samples to fit")
    for h in samples:
        entries = h.entries if hasattr(h, "entries") else tuple(h)
        if any(v <= 0 for v in E.apply(list(entries))):
            raise ValueError(f"sample {getattr(h, 'consumed', entries)!r} has E h with a zero coordinate")
    Ef = np.array([[float(v) for v in row] for row in E.E])
    X0 = np.array([[float(v) for v in (h.entries if hasattr(h, "entries") else h)] for h in samples])
    rng = np.random.default_rng(config.seed)
    train_rng, val_rng = rng.spawn(2)
    Xtr = np.vstack([X0, _jittered(X0, config.train_size, config.jitter, train_rng)])
    Xval = np.vstack([X0, _jittered(X0, config.val_size, config.jitter, val_rng)])
    Ytr = _targets(Ef, Xtr)

    W1, b1, W2, b2, units = _construct(Ef, Xtr, config.hidden, config.max_iter)
    A = np.maximum(0.0, Xtr @ W1.T + b1)
    W2, b2 = _minimax_output_layer(A, Ytr, W2, b2)

    positive = X0[X0 > 0]
    xi1 = float(positive.min()) if positive.size else 0.0
    head = MlpHead(
        symbols=E.symbols,
        W1=W1,
        b1=b1,
        W2=W2,
        b2=b2,
        xi1=xi1,
        clamp=config.clamp,
        temperature=float(temperature),
        tau_achieved=math.nan,
        validation=Xval,
        config=config,
        E=Ef,
    )
    tau = head.validation_error()
    object.__setattr__(head, "tau_achieved", tau)
    max_len = max((getattr(h, "t", 0) for h in samples), default=0)
    report = FitReport(
        tau_achieved=tau,
        tau_target=config.tau,
        converged=tau <= config.tau,
        train_sup_error=_sup_error(head.logits(Xtr), Ytr),
        xi1=xi1,
        xi2=float(_targets(Ef, X0).min()),
        lipschitz=lipschitz_constant(max_len, temperature, len(E.symbols)),
        units_per_output=units,
        n_train=len(Xtr),
        n_val=len(Xval),
    )
    return head, report


# -- serialization ------------------------------------------------------------------


def head_to_dict(head: MlpHead) -> dict:
    return {
        "symbols": list(head.symbols),
        "input_dim": int(head.W1.shape[1]),
        "hidden": head.hidden,
        "xi1": head.xi1,
        "clamp": head.clamp,
        "temperature": head.temperature,
        "tau_achieved": head.tau_achieved,
        "config": asdict(head.config) if head.config else None,
        "W1": head.W1.tolist(),
        "b1": head.b1.tolist(),
        "W2": head.W2.tolist(),
        "b2": head.b2.tolist(),
        "E": head.E.tolist() if head.E is not None else None,
        "validation": head.validation.tolist() if head.validation is not None else None,
    }


def head_from_dict(doc: dict) -> MlpHead:
    def arr(key):
        return None if doc.get(key) is None else np.array(doc[key], dtype=np.float64)

    return MlpHead(
        symbols=tuple(doc["symbols"]),
        W1=arr("W1"),
        b1=arr("b1"),
        W2=arr("W2"),
        b2=arr("b2"),
        xi1=float(doc["xi1"]),
        clamp=bool(doc["clamp"]),
        temperature=float(doc["temperature"]),
        tau_achieved=float(doc["tau_achieved"]),
        validation=arr("validation"),
        config=MlpFitConfig(**doc["config"]) if doc.get("config") else None,
        E=arr("E"),
    )


def save_head(path: Union[str, Path], head: MlpHead) -> None:
    # json writes floats with repr, which round-trips float64 exactly
    Path(path).write_text(json.dumps(head_to_dict(head)) + "\n")


def load_head(path: Union[str, Path]) -> MlpHead:
    return head_from_dict(json.loads(Path(path).read_text()))
