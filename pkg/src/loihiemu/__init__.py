"""Deterministic emulator of the Loihi chip's computational unit.

Integer LIF compartments (decay, integration, threshold, refractory clamp),
mantissa/exponent synaptic weights with bit-shift truncation, stochastically
rounded plasticity traces, a learning-rule expression language, and a
clock-driven network engine with seed-exact replay.
"""

from .fixedpoint import (
    RandomStream,
    StateOverflowError,
    decay_step,
    derive_seed,
    round_away_from_zero,
    stochastic_round,
    stochastic_round_unit,
)
from .neuron import CompartmentParams, CompartmentState, step_compartment
from .plasticity import (
    LearningRule,
    RuleError,
    TraceParams,
    TraceState,
    decay_and_impulse,
    eval_rule,
    parse_rule,
)
from .weights import (
    SignMode,
    SynapticWeight,
    WeightConfig,
    apply_weight_delta,
    encode_weight,
    precision_exponent,
    weight_table,
)

__version__ = "0.1.0"
