"""Integer-arithmetic primitives shared by all dynamics.

Everything the emulator computes is integer state evolved with two rounding
modes: *round away from zero* for neuron-state decay, and unbiased
*stochastic rounding* for plastic weights and synaptic traces. The random
draws behind stochastic rounding come from :class:`RandomStream`, a splitmix64
generator chosen for cross-platform determinism (the same seed yields the
same sequence on every machine, in pure Python, NumPy, and the compiled
kernel alike).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DECAY_MAX",
    "STATE_MAGNITUDE_LIMIT",
    "RandomStream",
    "StateOverflowError",
    "decay_step",
    "derive_seed",
    "round_away_from_zero",
    "stochastic_round",
    "stochastic_round_unit",
]

# Decay factors live in [0, 4096]; 4096 = 2^12 corresponds to a one-step
# time constant (full decay), 0 to no decay at all.
DECAY_SHIFT = 12
DECAY_MAX = 1 << DECAY_SHIFT

# State magnitudes (synaptic input, voltage) are capped well inside the
# signed-64-bit range so that every intermediate product and sum in the
# update pipeline fits in int64 in both the NumPy and the compiled backend.
# Exceeding the cap raises StateOverflowError instead of wrapping.
STATE_MAGNITUDE_LIMIT = 1 << 60


class StateOverflowError(OverflowError):
    """An integer state variable left the checked arithmetic range."""

    def __init__(self, message, *, unit=None, step=None):
        if unit is not None or step is not None:
            message = f"{message} (unit {unit}, step {step})"
        super().__init__(message)
        self.unit = unit
        self.step = step


def round_away_from_zero(x: float) -> int:
    """Round ``x`` to the integer of larger magnitude: sign(x) * ceil(|x|)."""
    if x == 0:
        return 0
    mag = math.ceil(abs(x))
    return mag if x > 0 else -mag


def _ceil_div(num: int, den: int) -> int:
    # num >= 0, den > 0
    return -((-num) // den)


def decay_step(state: int, delta: int) -> int:
    """One multiplicative decay step of an integer state variable.

    Returns ``state - rnd(state * delta / 4096)`` where ``rnd`` rounds away
    from zero. ``delta = 0`` is the identity, ``delta = 4096`` zeroes the
    state in one step. The magnitude never grows and the sign is preserved
    (or the result is 0).
    """
    if not 0 <= delta <= DECAY_MAX:
        raise ValueError(f"decay factor {delta} outside [0, {DECAY_MAX}]")
    if state >= 0:
        return state - _ceil_div(state * delta, DECAY_MAX)
    return state + _ceil_div(-state * delta, DECAY_MAX)


def stochastic_round(x: float, step: int, rng: "RandomStream") -> int:
    """Unbiased stochastic rounding of ``x`` onto the grid of multiples of ``step``.

    The magnitude |x| is rounded down to the nearest multiple of ``step``
    with probability ``(step - r) / step`` (where ``r`` is the distance to
    that grid point), otherwise up to the next multiple; the sign of ``x``
    is reattached. E[result] = x. The random draw is only consumed when the
    outcome is actually stochastic (``r != 0``).
    """
    if step <= 0 or step & (step - 1):
        raise ValueError(f"step must be a positive power of two, got {step}")
    mag = abs(x)
    lower = int(mag // step) * step
    r = mag - lower
    if r == 0:
        result = lower
    elif rng.uniform() < r / step:
        result = lower + step
    else:
        result = lower
    return -result if x < 0 else result


def stochastic_round_unit(x: float, rng: "RandomStream") -> int:
    """Stochastic rounding of a nonnegative value to the integer grid.

    floor(x) with probability 1 - (x - floor(x)), else floor(x) + 1.
    Used by the synaptic traces, which live on [0, 127] with precision 1.
    """
    if x < 0:
        raise ValueError(f"stochastic_round_unit requires x >= 0, got {x}")
    lower = int(x)
    frac = x - lower
    if frac == 0:
        return lower
    return lower + 1 if rng.uniform() < frac else lower


# ---------------------------------------------------------------------------
# Deterministic random stream (splitmix64)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# FNV-1a 64-bit, used to fold string tags into substream seeds.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# 53-bit mantissa scaling for uniform doubles in [0, 1).
_U01 = 2.0**-53


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _fnv1a(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(master: int, *keys: int | str) -> int:
    """Derive a substream seed from a master seed and a key path.

    Every stochastic entity in a simulation (a spike generator, a plastic
    synapse's weight rounding, one trace variable of one synapse, ...) owns
    its own stream, seeded as ``derive_seed(master, purpose_tag, ids...)``.
    String keys are hashed with FNV-1a; the whole path is folded through the
    splitmix64 finalizer, so distinct paths give independent streams.
    """
    h = _mix64(master & _MASK64)
    for key in keys:
        k = _fnv1a(key) if isinstance(key, str) else key & _MASK64
        h = _mix64(h ^ k)
    return h


class RandomStream:
    """splitmix64 stream of uniform doubles in [0, 1).

    Recurrence (all arithmetic mod 2^64)::

        state += 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        output = z ^ (z >> 31)

    ``uniform()`` maps the top 53 bits of the output to a double, so the
    float sequence is bit-identical wherever IEEE-754 doubles are.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _U01

    def spawn(self, *keys: int | str) -> "RandomStream":
        return RandomStream(derive_seed(self.state, *keys))


def advance_streams(states: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 step for an array of uint64 stream states.

    Mutates ``states`` in place and returns the corresponding uniform
    doubles in [0, 1). Element i follows exactly the same sequence as
    ``RandomStream`` seeded with the same value.
    """
    with np.errstate(over="ignore"):
        states += np.uint64(_GOLDEN)
        z = states.copy()
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)) * _U01
