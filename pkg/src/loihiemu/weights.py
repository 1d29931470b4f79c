"""Synaptic weight codec.

A synaptic weight is stored as a mantissa and a 4-bit exponent. The number
of weight bits (together with the sign mode) fixes the mantissa precision:
mantissas live on a grid of multiples of ``2**n_s``. Encoding a weight means
truncating the mantissa onto that grid (toward zero), scaling by
``2**(6 + exponent)``, clipping the scaled value to the 21-bit register
limit, and truncating the result toward zero to a multiple of ``2**6``.

Plastic weights additionally get their updates stochastically rounded onto
the mantissa grid, so that sub-precision weight changes are preserved in
expectation (see :func:`apply_weight_delta`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .fixedpoint import RandomStream, round_away_from_zero

__all__ = [
    "ACTUAL_WEIGHT_SHIFT",
    "EXPONENT_MAX",
    "EXPONENT_MIN",
    "SCALED_WEIGHT_LIMIT",
    "SignMode",
    "SynapticWeight",
    "WeightConfig",
    "apply_mantissa_delta",
    "apply_weight_delta",
    "encode_weight",
    "precision_exponent",
    "truncate_mantissa",
    "weight_table",
]

ACTUAL_WEIGHT_SHIFT = 6
EXPONENT_MIN, EXPONENT_MAX = -8, 7

# Scaled weights are clipped to 21 bits. The limit is kept 64-aligned so the
# final truncation cannot move a clipped value; with mantissa and exponent in
# range, only (mantissa=-256, exponent=7) ever reaches it.
SCALED_WEIGHT_LIMIT = (1 << 21) - (1 << ACTUAL_WEIGHT_SHIFT)


class SignMode(enum.Enum):
    """Sign convention of a synapse group.

    Excitatory and inhibitory groups keep all 8 mantissa bits for magnitude;
    mixed groups spend one bit on the sign, halving the precision.
    """

    EXCITATORY = "excitatory"
    INHIBITORY = "inhibitory"
    MIXED = "mixed"

    @property
    def sigma_mixed(self) -> int:
        return 1 if self is SignMode.MIXED else 0

    @property
    def mantissa_range(self) -> tuple[int, int]:
        if self is SignMode.EXCITATORY:
            return (0, 255)
        if self is SignMode.INHIBITORY:
            return (-255, 0)
        return (-256, 254)


def precision_exponent(n_wb: int, sign_mode: SignMode) -> int:
    """Mantissa precision exponent: grid spacing is ``2**n_s``."""
    if not 1 <= n_wb <= 8:
        raise ValueError(f"weight bits must be in [1, 8], got {n_wb}")
    return 8 - (n_wb - sign_mode.sigma_mixed)


def truncate_mantissa(mantissa: int, n_s: int) -> int:
    """Truncate a mantissa onto the precision grid, toward zero.

    An arithmetic right shift of a negative value would round toward -inf
    instead, so the magnitude is shifted and the sign reattached.
    """
    mag = (abs(mantissa) >> n_s) << n_s
    return -mag if mantissa < 0 else mag


@dataclass(frozen=True)
class WeightConfig:
    """Static weight parameters of a synapse group.

    ``n_s`` (precision exponent), ``precision`` (grid spacing) and
    ``mantissa_bounds`` (grid-aligned clip range for plastic updates) are
    derived once at construction; they sit on the hot path of every plastic
    weight update.
    """

    sign_mode: SignMode
    n_wb: int = 8
    exponent: int = 0
    n_s: int = field(init=False)
    precision: int = field(init=False)
    mantissa_bounds: tuple[int, int] = field(init=False)

    def __post_init__(self):
        if not EXPONENT_MIN <= self.exponent <= EXPONENT_MAX:
            raise ValueError(
                f"weight exponent must be in [{EXPONENT_MIN}, {EXPONENT_MAX}],"
                f" got {self.exponent}"
            )
        n_s = precision_exponent(self.n_wb, self.sign_mode)
        low, high = self.sign_mode.mantissa_range
        object.__setattr__(self, "n_s", n_s)
        object.__setattr__(self, "precision", 1 << n_s)
        object.__setattr__(
            self,
            "mantissa_bounds",
            (truncate_mantissa(low, n_s), truncate_mantissa(high, n_s)),
        )


def encode_weight(mantissa: int, exponent: int, config: WeightConfig) -> int:
    """Actual weight from a mantissa and exponent.

    Grid-truncate the mantissa toward zero, scale by ``2**(6 + exponent)``,
    clip to the 21-bit limit, and truncate toward zero to a multiple of 64.
    The result is always 64-aligned.
    """
    low, high = config.sign_mode.mantissa_range
    if not low <= mantissa <= high:
        raise ValueError(
            f"mantissa {mantissa} outside {config.sign_mode.value} range [{low}, {high}]"
        )
    if not EXPONENT_MIN <= exponent <= EXPONENT_MAX:
        raise ValueError(f"weight exponent {exponent} outside [{EXPONENT_MIN}, {EXPONENT_MAX}]")

    mag = (abs(mantissa) >> config.n_s) << config.n_s
    shift = ACTUAL_WEIGHT_SHIFT + exponent
    if shift >= 0:
        scaled = mag << shift
        if scaled > SCALED_WEIGHT_LIMIT:
            scaled = SCALED_WEIGHT_LIMIT
        actual = (scaled >> ACTUAL_WEIGHT_SHIFT) << ACTUAL_WEIGHT_SHIFT
    else:
        # Fractional scaling: truncating mag * 2**shift toward zero to a
        # multiple of 64 is a single magnitude shift. Never near the clip.
        actual = (mag >> (ACTUAL_WEIGHT_SHIFT - shift)) << ACTUAL_WEIGHT_SHIFT
    return -actual if mantissa < 0 else actual


def weight_table(sign_mode: SignMode, n_wb: int = 8):
    """All 4096 (mantissa, exponent, actual weight) rows for one config.

    The mantissa sweep covers 256 values per sign-mode convention:
    0..255 (excitatory), -255..0 (inhibitory), and the even values
    -256..254 (mixed); each is crossed with the 16 exponents.
    """
    if sign_mode is SignMode.EXCITATORY:
        sweep = range(0, 256)
    elif sign_mode is SignMode.INHIBITORY:
        sweep = range(-255, 1)
    else:
        sweep = range(-256, 255, 2)
    rows = []
    for mantissa in sweep:
        for exponent in range(EXPONENT_MIN, EXPONENT_MAX + 1):
            config = WeightConfig(sign_mode, n_wb, exponent)
            rows.append((mantissa, exponent, encode_weight(mantissa, exponent, config)))
    return rows


@dataclass(frozen=True)
class SynapticWeight:
    """One synapse's weight state.

    ``mantissa`` always sits on the precision grid; ``actual`` is the encoded
    weight that gets delivered to the target compartment.
    """

    mantissa: int
    config: WeightConfig
    plastic: bool = False
    actual: int = 0

    @classmethod
    def create(cls, mantissa: int, config: WeightConfig, plastic: bool = False) -> "SynapticWeight":
        low, high = config.sign_mode.mantissa_range
        if not low <= mantissa <= high:
            raise ValueError(
                f"mantissa {mantissa} outside {config.sign_mode.value} range [{low}, {high}]"
            )
        aligned = truncate_mantissa(mantissa, config.n_s)
        return cls(
            mantissa=aligned,
            config=config,
            plastic=plastic,
            actual=encode_weight(aligned, config.exponent, config),
        )


def apply_mantissa_delta(mantissa: int, dw: float, config: WeightConfig, rng: RandomStream) -> int:
    """Stochastically rounded mantissa update, clipped to the grid bounds.

    ``dw`` is first rounded away from zero to an integer; the integer part of
    ``dw / precision`` is applied exactly and the remainder steps the
    mantissa one further grid unit in dw's direction with probability
    ``remainder / precision``. The draw is only consumed when the remainder
    is nonzero.
    """
    precision = config.precision
    dw_rounded = round_away_from_zero(dw)
    sign = -1 if dw_rounded < 0 else 1
    quotient = sign * (abs(dw_rounded) // precision)
    remainder = abs(dw_rounded) % precision
    add = 0
    if remainder and rng.uniform() < remainder / precision:
        add = sign
    updated = mantissa + (quotient + add) * precision
    low, high = config.mantissa_bounds
    return min(max(updated, low), high)


def apply_weight_delta(weight: SynapticWeight, dw: float, rng: RandomStream) -> SynapticWeight:
    """Plastic weight update: stochastic mantissa rounding plus re-encoding."""
    if not weight.plastic:
        raise ValueError("apply_weight_delta called on a static weight")
    mantissa = apply_mantissa_delta(weight.mantissa, dw, weight.config, rng)
    if mantissa == weight.mantissa:
        return weight
    return replace(
        weight,
        mantissa=mantissa,
        actual=encode_weight(mantissa, weight.config.exponent, weight.config),
    )
