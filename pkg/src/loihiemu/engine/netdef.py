"""Network definitions: groups, generators, synapses, monitors.

A :class:`NetworkDef` is a plain, fully serializable description of a
network plus a master seed; building it twice always yields bit-identical
simulations. Validation collects *every* violation before reporting, so a
bad config can be fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..neuron import CompartmentParams
from ..plasticity import TRACE_NAMES, RuleError, TraceParams, parse_rule
from ..weights import EXPONENT_MAX, EXPONENT_MIN, SignMode

__all__ = [
    "Connection",
    "GeneratorGroupDef",
    "MonitorDef",
    "NetworkDef",
    "NetworkValidationError",
    "NeuronGroupDef",
    "SynapseGroupDef",
    "NEURON_VARIABLES",
    "GENERATOR_VARIABLES",
    "SYNAPSE_VARIABLES",
]

NEURON_VARIABLES = ("I", "v", "spikes")
GENERATOR_VARIABLES = ("spikes",)
SYNAPSE_VARIABLES = ("w", "J", "dw") + TRACE_NAMES


class NetworkValidationError(ValueError):
    """Raised by NetworkDef.validate(); carries the full list of violations."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid network definition:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class NeuronGroupDef:
    name: str
    size: int
    params: CompartmentParams


@dataclass(frozen=True)
class GeneratorGroupDef:
    """Spike source group: per-step Bernoulli units or an explicit schedule.

    Exactly one of ``rate`` (probability of a spike per unit per step) and
    ``spikes`` (a list of ``(step, unit)`` events) must be given.
    """

    name: str
    size: int
    rate: float | None = None
    spikes: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Connection:
    """One synapse: source unit, target unit, weight, extra delay steps."""

    src: int
    dst: int
    mantissa: int
    exponent: int = 0
    delay: int = 0


@dataclass(frozen=True)
class SynapseGroupDef:
    name: str
    source: str
    target: str
    sign_mode: SignMode
    connections: tuple[Connection, ...]
    n_wb: int = 8
    plastic: bool = False
    rule: str | None = None
    pre_traces: dict = field(default_factory=dict)
    post_traces: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MonitorDef:
    """Probe request: one variable of one group, optionally restricted to ids.

    Probe timing follows the update schedule: synaptic input and traces are
    sampled in the synapses phase, voltage, weights and spikes at the end of
    the step.
    """

    name: str
    group: str
    variable: str
    ids: tuple[int, ...] | None = None


@dataclass(frozen=True)
class NetworkDef:
    groups: tuple[NeuronGroupDef, ...] = ()
    generators: tuple[GeneratorGroupDef, ...] = ()
    synapses: tuple[SynapseGroupDef, ...] = ()
    monitors: tuple[MonitorDef, ...] = ()
    seed: int = 0

    def validate(self) -> None:
        errors = []
        names = {}
        for group in self.groups + self.generators + self.synapses:
            if group.name in names:
                errors.append(f"duplicate group name '{group.name}'")
            names[group.name] = group

        neuron_sizes = {}
        for group in self.groups:
            if group.size < 0:
                errors.append(f"neuron group '{group.name}': negative size")
            neuron_sizes[group.name] = group.size

        generator_sizes = {}
        for gen in self.generators:
            if gen.size < 0:
                errors.append(f"generator group '{gen.name}': negative size")
            generator_sizes[gen.name] = gen.size
            if gen.rate is None and not gen.spikes:
                errors.append(
                    f"generator group '{gen.name}': needs a rate or explicit spikes"
                )
            if gen.rate is not None:
                if gen.spikes:
                    errors.append(
                        f"generator group '{gen.name}': rate and explicit spikes are exclusive"
                    )
                if not 0.0 <= gen.rate <= 1.0:
                    errors.append(
                        f"generator group '{gen.name}': rate {gen.rate} outside [0, 1]"
                    )
            for step, unit in gen.spikes:
                if step < 0:
                    errors.append(f"generator group '{gen.name}': spike at negative step {step}")
                if not 0 <= unit < gen.size:
                    errors.append(
                        f"generator group '{gen.name}': spike unit {unit} out of range"
                    )

        for syn in self.synapses:
            self._validate_synapse_group(syn, neuron_sizes, generator_sizes, errors)

        valid_monitor_targets = self._monitor_variables(neuron_sizes, generator_sizes)
        for monitor in self.monitors:
            target = valid_monitor_targets.get(monitor.group)
            if target is None:
                errors.append(f"monitor '{monitor.name}': unknown group '{monitor.group}'")
                continue
            variables, size = target
            if monitor.variable not in variables:
                errors.append(
                    f"monitor '{monitor.name}': variable '{monitor.variable}' not available"
                    f" on '{monitor.group}' (choose from {', '.join(variables)})"
                )
            if monitor.ids is not None:
                for i in monitor.ids:
                    if not 0 <= i < size:
                        errors.append(f"monitor '{monitor.name}': id {i} out of range")

        if errors:
            raise NetworkValidationError(errors)

    def _validate_synapse_group(self, syn, neuron_sizes, generator_sizes, errors):
        src_size = neuron_sizes.get(syn.source, generator_sizes.get(syn.source))
        if src_size is None:
            errors.append(f"synapse group '{syn.name}': unknown source '{syn.source}'")
        dst_size = neuron_sizes.get(syn.target)
        if dst_size is None:
            errors.append(f"synapse group '{syn.name}': target '{syn.target}' is not a neuron group")

        if not 1 <= syn.n_wb <= 8:
            errors.append(f"synapse group '{syn.name}': weight bits {syn.n_wb} outside [1, 8]")

        low, high = syn.sign_mode.mantissa_range
        for k, conn in enumerate(syn.connections):
            where = f"synapse group '{syn.name}', connection {k}"
            if src_size is not None and not 0 <= conn.src < src_size:
                errors.append(f"{where}: source unit {conn.src} out of range")
            if dst_size is not None and not 0 <= conn.dst < dst_size:
                errors.append(f"{where}: target unit {conn.dst} out of range")
            if not low <= conn.mantissa <= high:
                errors.append(
                    f"{where}: mantissa {conn.mantissa} outside {syn.sign_mode.value}"
                    f" range [{low}, {high}]"
                )
            if not EXPONENT_MIN <= conn.exponent <= EXPONENT_MAX:
                errors.append(f"{where}: exponent {conn.exponent} out of range")
            if conn.delay < 0:
                errors.append(f"{where}: negative delay")

        if syn.plastic:
            if syn.rule is None:
                errors.append(f"synapse group '{syn.name}': plastic group needs a rule")
            else:
                try:
                    parse_rule(syn.rule)
                except RuleError as exc:
                    errors.append(f"synapse group '{syn.name}': bad rule: {exc}")
            for side, allowed in ((syn.pre_traces, ("x1", "x2")), (syn.post_traces, ("y1", "y2", "y3"))):
                for trace_name, params in side.items():
                    if trace_name not in allowed:
                        errors.append(
                            f"synapse group '{syn.name}': unknown trace '{trace_name}'"
                            f" (choose from {', '.join(allowed)})"
                        )
                    elif not isinstance(params, TraceParams):
                        errors.append(
                            f"synapse group '{syn.name}': trace '{trace_name}' needs TraceParams"
                        )
        elif syn.rule is not None:
            errors.append(f"synapse group '{syn.name}': rule given but group is not plastic")

    def _monitor_variables(self, neuron_sizes, generator_sizes):
        targets = {}
        for group in self.groups:
            targets[group.name] = (NEURON_VARIABLES, group.size)
        for gen in self.generators:
            targets[gen.name] = (GENERATOR_VARIABLES, gen.size)
        for syn in self.synapses:
            variables = SYNAPSE_VARIABLES if syn.plastic else ("w", "J")
            targets[syn.name] = (variables, len(syn.connections))
        return targets
