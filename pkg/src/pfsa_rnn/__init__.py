"""Compile probabilistic finite-state automata into ReLU Elman RNN language
models and check that the two define the same distribution over strings."""

from .numerics import Mode, format_rational, parse_rational, precision_of, vector_precision
from .pfsa import EOS, Pfsa, conditional, forward, is_deterministic, perturb, stringsum, trim, validate
from .compiler import ElmanParams, OutputMatrix, compile_pfsa, output_matrix
from .runtime import HiddenState, check_invariance, precision_trace, run, step
from .heads import SoftmaxLogHead, SparsemaxHead, sparsemax, softmax
from .equivalence import enumerate_strings, restricted_tvd, verify_approx, verify_exact

__version__ = "0.1.0"
