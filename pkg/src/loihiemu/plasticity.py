"""Synaptic traces and the learning-rule expression language.

Traces are integers in [0, 127] that decay multiplicatively with stochastic
rounding and jump by a fixed impulse when their side spikes. Learning rules
are sums of signed products over the spike indicators (x0, y0), the traces
(x1, x2, y1, y2, y3), the weight mantissa (w), the epoch gates (u0..u9) and
power-of-two constants, e.g.::

    2^-2*x1*y0 - 2^-2*x0*y1

Terms are separated by ``+`` / ``-``, factors by ``*``; constants must be
powers of two, written either as plain integers or as ``2^k`` with an
integer (possibly negative) exponent. Whitespace is insignificant. Only the
symbols above are accepted; the gate ``u_k`` evaluates to 1 on steps where
``t mod 2^k == 0`` (``u0`` is always 1), which is how rule terms are
scheduled on coarser-than-every-step epochs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .fixedpoint import RandomStream, stochastic_round_unit

__all__ = [
    "TRACE_MAX",
    "TRACE_NAMES",
    "VARIABLES",
    "LearningRule",
    "RuleError",
    "RuleSyntaxError",
    "RuleTerm",
    "TraceParams",
    "TraceState",
    "UnsupportedSymbolError",
    "decay_and_impulse",
    "eval_rule",
    "parse_rule",
]

TRACE_MAX = 127
TRACE_NAMES = ("x1", "x2", "y1", "y2", "y3")

VARIABLES = frozenset(
    ("x0", "y0", "x1", "x2", "y1", "y2", "y3", "w") + tuple(f"u{k}" for k in range(10))
)


@dataclass(frozen=True)
class TraceParams:
    """Impulse height and decay time constant of one trace variable."""

    impulse: int = 0
    tau: int = 1

    def __post_init__(self):
        if not 0 <= self.impulse <= TRACE_MAX:
            raise ValueError(f"trace impulse {self.impulse} outside [0, {TRACE_MAX}]")
        if self.tau < 1:
            raise ValueError(f"trace tau must be >= 1, got {self.tau}")

    @property
    def alpha(self) -> float:
        return 1.0 - 1.0 / self.tau


@dataclass
class TraceState:
    x1: int = 0
    x2: int = 0
    y1: int = 0
    y2: int = 0
    y3: int = 0


def decay_and_impulse(trace: int, params: TraceParams, spiked: bool, rng: RandomStream) -> int:
    """One trace step: stochastically rounded decay, then the spike impulse.

    The result saturates at 127 when the impulse would push it past the top
    of the range.
    """
    if not 0 <= trace <= TRACE_MAX:
        raise ValueError(f"trace value {trace} outside [0, {TRACE_MAX}]")
    value = stochastic_round_unit(trace * params.alpha, rng)
    if spiked:
        value = min(value + params.impulse, TRACE_MAX)
    return value


# ---------------------------------------------------------------------------
# Learning-rule expression language
# ---------------------------------------------------------------------------


class RuleError(ValueError):
    """Base class for learning-rule rejection errors."""


class RuleSyntaxError(RuleError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnsupportedSymbolError(RuleError):
    def __init__(self, symbol: str, position: int):
        super().__init__(f"unsupported symbol '{symbol}' (at position {position})")
        self.symbol = symbol
        self.position = position


@dataclass(frozen=True)
class RuleTerm:
    """One signed product: sign * 2**log2_scale * factor_1 * ... * factor_n."""

    sign: int
    log2_scale: int
    factors: tuple[str, ...]

    def to_text(self) -> str:
        parts = []
        if self.log2_scale != 0 or not self.factors:
            parts.append(f"2^{self.log2_scale}" if self.log2_scale != 0 else "1")
        parts.extend(self.factors)
        return "*".join(parts)


@dataclass(frozen=True)
class LearningRule:
    terms: tuple[RuleTerm, ...]

    def to_text(self) -> str:
        """Canonical text form; parsing it reproduces this rule exactly."""
        out = []
        for i, term in enumerate(self.terms):
            if i == 0:
                out.append("-" if term.sign < 0 else "")
            else:
                out.append(" - " if term.sign < 0 else " + ")
            out.append(term.to_text())
        return "".join(out)


_TOKEN_RE = re.compile(
    r"(?P<pow2>2\^[+-]?\d+)|(?P<int>\d+)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[+\-*])|(?P<bad>\S)"
)


def _tokenize(text: str):
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        kind = match.lastgroup
        if kind == "bad":
            raise RuleSyntaxError(f"unexpected character '{match.group()}'", match.start())
        tokens.append((kind, match.group(), match.start()))
    return tokens


def parse_rule(text: str) -> LearningRule:
    """Parse rule text into its normalized term list.

    Rejects anything outside the supported grammar: unknown symbols, missing
    operands, and constant factors that are not powers of two.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise RuleSyntaxError("empty rule", 0)

    terms = []
    pos = 0
    sign = 1
    # optional leading sign
    if tokens[pos][0] == "op" and tokens[pos][1] in "+-":
        sign = -1 if tokens[pos][1] == "-" else 1
        pos += 1

    while True:
        log2_scale = 0
        factors = []
        expect_factor = True
        while expect_factor:
            if pos >= len(tokens):
                raise RuleSyntaxError("expected a factor", len(text))
            kind, value, at = tokens[pos]
            if kind == "ident":
                if value not in VARIABLES:
                    raise UnsupportedSymbolError(value, at)
                factors.append(value)
            elif kind == "pow2":
                log2_scale += int(value[2:])
            elif kind == "int":
                literal = int(value)
                if literal <= 0 or literal & (literal - 1):
                    raise RuleSyntaxError(
                        f"constant factor {literal} is not a power of two", at
                    )
                log2_scale += literal.bit_length() - 1
            else:
                raise RuleSyntaxError(f"expected a factor, found '{value}'", at)
            pos += 1
            expect_factor = pos < len(tokens) and tokens[pos][0] == "op" and tokens[pos][1] == "*"
            if expect_factor:
                pos += 1

        terms.append(RuleTerm(sign=sign, log2_scale=log2_scale, factors=tuple(factors)))
        if pos >= len(tokens):
            break
        kind, value, at = tokens[pos]
        if kind != "op" or value not in "+-":
            raise RuleSyntaxError(f"expected '+' or '-', found '{value}'", at)
        sign = -1 if value == "-" else 1
        pos += 1

    return LearningRule(terms=tuple(terms))


def eval_rule(rule: LearningRule, env: Mapping[str, int]) -> float:
    """Evaluate a rule for one synapse at one timestep.

    ``env`` supplies the spike indicators ``x0``/``y0``, the five trace
    values, the weight mantissa ``w`` and the timestep ``t``; the epoch gates
    ``u0..u9`` are derived from ``t``. Products are exact in float64 (traces
    and mantissas are small integers, scales are powers of two).
    """
    t = env["t"]
    total = 0.0
    for term in rule.terms:
        value = float(term.sign) * 2.0**term.log2_scale
        for factor in term.factors:
            if factor[0] == "u":
                k = int(factor[1:])
                gate = 1 if k == 0 or t % (1 << k) == 0 else 0
                value *= gate
            else:
                value *= env[factor]
            if value == 0.0:
                break
        total += value
    return total
