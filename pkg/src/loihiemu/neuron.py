"""Single-compartment integer LIF state machine.

Per step: the synaptic input decays and accumulates the incoming weighted
spikes, then the voltage decays and integrates the input plus a constant
bias. A spike fires on strict threshold crossing (``v > v_th``), resets the
voltage to zero and arms the refractory counter; while refractory, the
voltage is clamped to zero (the counter is separate state, not the voltage
register) but the synaptic input keeps evolving.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fixedpoint import (
    DECAY_MAX,
    STATE_MAGNITUDE_LIMIT,
    StateOverflowError,
    decay_step,
)

__all__ = [
    "BIAS_LIMIT",
    "THRESHOLD_SHIFT",
    "V_MANTISSA_MAX",
    "CompartmentParams",
    "CompartmentState",
    "step_compartment",
]

THRESHOLD_SHIFT = 6
V_MANTISSA_MAX = 131071

# Bias magnitude is capped at half the state limit so the voltage update
# cannot overflow 64-bit intermediates in the vectorized backends.
BIAS_LIMIT = STATE_MAGNITUDE_LIMIT >> 1


@dataclass(frozen=True)
class CompartmentParams:
    """Static parameters of one compartment.

    ``delta_i`` / ``delta_v`` are decay factors in [0, 4096] (time constant
    tau = 4096 / delta). The spike threshold is ``v_mantissa * 2**6``.
    """

    delta_i: int
    delta_v: int
    v_mantissa: int
    bias: int = 0
    refractory: int = 0

    def __post_init__(self):
        if not 0 <= self.delta_i <= DECAY_MAX:
            raise ValueError(f"delta_i {self.delta_i} outside [0, {DECAY_MAX}]")
        if not 0 <= self.delta_v <= DECAY_MAX:
            raise ValueError(f"delta_v {self.delta_v} outside [0, {DECAY_MAX}]")
        if not 0 <= self.v_mantissa <= V_MANTISSA_MAX:
            raise ValueError(
                f"threshold mantissa {self.v_mantissa} outside [0, {V_MANTISSA_MAX}]"
            )
        if abs(self.bias) > BIAS_LIMIT:
            raise ValueError(f"bias magnitude exceeds {BIAS_LIMIT}")
        if self.refractory < 0:
            raise ValueError("refractory must be >= 0")

    @property
    def v_threshold(self) -> int:
        return self.v_mantissa << THRESHOLD_SHIFT


@dataclass(frozen=True)
class CompartmentState:
    I: int = 0
    v: int = 0
    refrac_left: int = 0


def step_compartment(
    state: CompartmentState,
    params: CompartmentParams,
    weighted_input: int,
) -> tuple[CompartmentState, bool]:
    """Advance one compartment by one timestep.

    ``weighted_input`` is the pre-summed weighted spike input arriving this
    step. Returns the new state and whether the unit spiked. Refractory
    periods take priority over integration: the voltage stays clamped at
    zero and no spike can occur, but the synaptic input still updates.
    """
    I = decay_step(state.I, params.delta_i) + weighted_input
    if abs(I) > STATE_MAGNITUDE_LIMIT:
        raise StateOverflowError(f"synaptic input reached {I}")

    if state.refrac_left > 0:
        return CompartmentState(I=I, v=0, refrac_left=state.refrac_left - 1), False

    v = decay_step(state.v, params.delta_v) + I + params.bias
    if abs(v) > STATE_MAGNITUDE_LIMIT:
        raise StateOverflowError(f"voltage reached {v}")

    if v > params.v_threshold:
        return CompartmentState(I=I, v=0, refrac_left=params.refractory), True
    return CompartmentState(I=I, v=v, refrac_left=0), False
