"""Command-line interface.

Exit codes: 0 success/PASS, 1 FAIL or validation violation, 2 usage,
parse or size-guard errors. Output never includes timings so identical
invocations print identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

from . import pfsa as P
from .compiler import compile_pfsa, load_params, output_matrix, params_to_dict
from .equivalence import (
    EnumerationTooLarge,
    build_head,
    lm_string_prob,
    verify_approx,
    verify_exact,
)
from .mlp import MlpFitConfig, fit_mlp_log_head, save_head
from .numerics import Mode, fmt_value, parse_rational
from .runtime import precision_trace, run_prefixes

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _show(y) -> str:
    return P.show(y) if y else "ε"


def _load_valid(path) -> P.Pfsa:
    a = P.load(path)
    problems = P.validate(a)
    if problems:
        for line in problems:
            print(f"invalid: {line}", file=sys.stderr)
        raise _Violation()
    return a


class _Violation(Exception):
    pass


# -- commands -------------------------------------------------------------------


def cmd_validate(args) -> int:
    a = P.load(args.path)
    problems = P.validate(a)
    for line in problems:
        print(line)
    if not problems:
        print("OK")
    return EXIT_FAIL if problems else EXIT_OK


def cmd_trim(args) -> int:
    t, warnings = P.trim(P.load(args.path))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(P.dumps(t), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    a = _load_valid(args.path)
    doc = params_to_dict(compile_pfsa(a), output_matrix(a))
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    params, _ = load_params(args.params)
    if args.mode == "float":
        params = params.to_float()
    ys = P.as_symbols(params.alphabet, args.string)
    states = run_prefixes(params, ys)
    lines = [
        f"string: {_show(ys)}",
        f"dimension: {params.dim}",
        "coordinates: " + " ".join(f"({q},{y})" for q, y in map(params.coordinate, range(params.dim))),
        "hidden: " + " ".join(fmt_value(v) for v in states[-1].entries),
    ]
    status = EXIT_OK
    if args.trace_precision:
        if args.mode == "float":
            raise UsageError("--trace-precision needs exact mode")
        trace = precision_trace(params, ys)
        lines.append(f"bound_constant: {trace.bound_constant}")
        lines.append("t\tbits\tbound\tstatus")
        for t, bits in enumerate(trace.bits):
            lines.append(f"{t}\t{bits}\t{trace.bound(t)}\t{'PASS' if bits <= trace.bound(t) else 'FAIL'}")
        status = EXIT_FAIL if trace.violations else EXIT_OK
    _emit("\n".join(lines) + "\n", args.out)
    return status


def _head_params(a: P.Pfsa, args):
    params, E = compile_pfsa(a), output_matrix(a)
    if args.mode == "float":
        params, E = params.to_float(), E.to_float()
    return params, build_head(args.head, E, args.temperature)


def cmd_prob(args) -> int:
    a = _load_valid(args.path)
    ys = a.symbols(args.string)
    params, head = _head_params(a, args)
    p_a = P.stringsum(a, ys)
    if args.mode == "float":
        p_a = float(p_a)
    p_r = lm_string_prob(params, head, ys)
    print(f"{fmt_value(p_a)}  {fmt_value(p_r)}  {fmt_value(abs(p_a - p_r))}")
    return EXIT_OK


def cmd_conditional(args) -> int:
    a = _load_valid(args.path)
    ys = a.symbols(args.string)
    try:
        if args.head == "pfsa":
            dist = P.conditional(a, ys)
            if args.mode == "float":
                dist = P.NextSymbolDistribution(dist.symbols, tuple(float(p) for p in dist.probs))
        else:
            params, head = _head_params(a, args)
            h = run_prefixes(params, ys)[-1]
            dist = head.conditional(h)
    except P.ZeroMassError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    for sym, p in zip(dist.symbols, dist.probs):
        print(f"{sym}\t{fmt_value(p)}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    if args.delta is None:
        raise UsageError("perturb needs --delta")
    a = _load_valid(args.path)
    _emit(P.dumps(P.perturb(a, args.delta)), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    a = _load_valid(args.path)
    lines = [_show(P.sample(a, args.seed + n, args.max_len)) for n in range(args.count)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_precision(args) -> int:
    a = _load_valid(args.path)
    trace = precision_trace(compile_pfsa(a), a.symbols(args.string))
    lines = [f"bound_constant: {trace.bound_constant}", "t\tbits\tbound\tstatus"]
    for t, bits in enumerate(trace.bits):
        lines.append(f"{t}\t{bits}\t{trace.bound(t)}\t{'PASS' if bits <= trace.bound(t) else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_FAIL if trace.violations else EXIT_OK


def _fit_config(args) -> MlpFitConfig:
    return MlpFitConfig(
        hidden=args.hidden,
        train_size=args.train_size,
        val_size=args.val_size,
        jitter=args.jitter,
        tau=args.tau,
        seed=args.seed,
        clamp=args.clamp,
    )


def _report_lines(fit) -> list:
    return [f"fit_{k}: {fmt_value(v) if isinstance(v, float) else v}" for k, v in asdict(fit).items()]


def cmd_fit_mlp(args) -> int:
    delta = args.delta if args.delta is not None else Fraction(1, 1000)
    if delta <= 0:
        raise UsageError("fit-mlp needs --delta > 0")
    a = _load_valid(args.path)
    from .equivalence import enumerate_strings
    from .runtime import run

    ad = P.perturb(a, delta)
    params, E = compile_pfsa(ad), output_matrix(ad)
    samples = [run(params, y) for y in enumerate_strings(a.alphabet, args.max_len)]
    head, fit = fit_mlp_log_head(E, samples, _fit_config(args), float(args.temperature))
    if args.out:
        save_head(args.out, head)
    print("\n".join(_report_lines(fit)))
    return EXIT_OK if fit.converged else EXIT_FAIL


def _report_doc(report) -> dict:
    doc = {
        "head": report.head,
        "mode": report.mode,
        "max_len": report.max_len,
        "strings": len(report.rows),
        "delta": None if report.delta is None else fmt_value(report.delta),
        "rtvd": fmt_value(report.rtvd),
        "rtvd_perturbed": None if report.rtvd_perturbed is None else fmt_value(report.rtvd_perturbed),
        "tail_a": fmt_value(report.tail_a),
        "tail_r": fmt_value(report.tail_r),
        "bound": fmt_value(report.bound),
        "tolerance": fmt_value(report.tolerance),
        "verdict": report.verdict,
        "counterexample": None if report.counterexample is None else _show(report.counterexample),
    }
    if report.fit is not None:
        doc["fit"] = {k: (fmt_value(v) if isinstance(v, float) else v) for k, v in asdict(report.fit).items()}
    return doc


def cmd_verify(args) -> int:
    a = _load_valid(args.path)
    max_len = args.max_len
    if args.head == "mlp" or args.delta is not None:
        delta = args.delta
        if delta is None or delta <= 0:
            raise UsageError("--head mlp needs --delta > 0")
        if args.mode == "float" and args.head != "mlp":
            raise UsageError("approximate verification with an exact head runs in exact mode")
        report = verify_approx(
            a, delta, args.head, _fit_config(args), max_len, args.epsilon, args.temperature
        )
    else:
        report = verify_exact(a, args.head, max_len, Mode(args.mode), args.temperature)
    doc = _report_doc(report)
    lines = []
    for k, v in doc.items():
        if isinstance(v, dict):
            lines.extend(f"{k}_{kk}: {vv}" for kk, vv in v.items())
        elif v is not None:
            lines.append(f"{k}: {v}")
    print("\n".join(lines))
    if args.out:
        doc["rows"] = [[_show(y), fmt_value(pa), fmt_value(pr), fmt_value(d)] for y, pa, pr, d in report.rows]
        Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    if args.table:
        rows = ["string\tp_A\tp_R\tdiff"]
        rows += [f"{_show(y)}\t{fmt_value(pa)}\t{fmt_value(pr)}\t{fmt_value(d)}" for y, pa, pr, d in report.rows]
        Path(args.table).write_text("\n".join(rows) + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfsa-rnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, head=None, length=None, string=False):
        p.add_argument("--mode", choices=[m.value for m in Mode], default="exact")
        p.add_argument("--temperature", type=_rational, default=Fraction(1))
        p.add_argument("--out", "-o")
        if head:
            p.add_argument("--head", choices=head[0], default=head[1])
        if length is not None:
            p.add_argument("--max-len", type=int, default=length)
        if string:
            p.add_argument("string", help="symbols; split on spaces if any, otherwise per character")

    p = sub.add_parser("validate", help="check the stochasticity constraints")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("trim", help="drop states off every initial-to-final path")
    p.add_argument("path")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("compile", help="write Elman parameters and the output matrix")
    p.add_argument("path")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="hidden state after a string")
    p.add_argument("--params", required=True)
    p.add_argument("--string", default="")
    p.add_argument("--trace-precision", action="store_true")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="exact")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("prob", help="stringsum, head probability and their difference")
    p.add_argument("path")
    common(p, head=(["sparsemax", "softmax"], "sparsemax"), string=True)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("conditional", help="next-symbol distribution after a prefix")
    p.add_argument("path")
    common(p, head=(["pfsa", "sparsemax", "softmax"], "pfsa"), string=True)
    p.set_defaults(func=cmd_conditional)

    p = sub.add_parser("perturb", help="add delta to every weight and renormalize")
    p.add_argument("path")
    p.add_argument("--delta", type=_rational)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("sample", help="draw strings")
    p.add_argument("path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--max-len", type=int)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("precision", help="hidden-state bits against the linear bound")
    p.add_argument("path")
    p.add_argument("string")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_precision)

    def fit_flags(p):
        p.add_argument("--delta", type=_rational)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--hidden", type=int, default=64)
        p.add_argument("--train-size", type=int, default=2000)
        p.add_argument("--val-size", type=int, default=1000)
        p.add_argument("--jitter", type=float, default=1e-3)
        p.add_argument("--tau", type=float, default=1e-3)
        p.add_argument("--clamp", action="store_true")

    p = sub.add_parser("fit-mlp", help="fit an MLP log head on a perturbed automaton")
    p.add_argument("path")
    common(p, length=6)
    fit_flags(p)
    p.set_defaults(func=cmd_fit_mlp)

    p = sub.add_parser("verify", help="compare the compiled LM against the automaton")
    p.add_argument("path")
    common(p, head=(["sparsemax", "softmax", "mlp"], "sparsemax"), length=8)
    fit_flags(p)
    p.add_argument("--epsilon", type=_rational, default=Fraction(1, 100))
    p.add_argument("--table", help="also write a tab-separated per-string table")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _Violation:
        return EXIT_FAIL
    except P.PfsaFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, EnumerationTooLarge, P.UnknownSymbolError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
