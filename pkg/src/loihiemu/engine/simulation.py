"""Clock-driven network simulator.

Each timestep runs a fixed sequence of phases:

    start -> synapses -> groups -> thresholds -> resets -> end

Generators fire in *start*; weighted spike deliveries, trace decay and
plastic weight updates happen in *synapses*; the integer compartment updates
in *groups*; spike detection in *thresholds*; voltage reset and refractory
arming in *resets*. Probes follow the schedule: synaptic input and traces
are sampled in the synapses phase, voltage, weights and spikes at end.

The timing contract this schedule implies: a generator spike at step t
reaches its targets' weighted input at step t, a neuron spike detected at
step t reaches targets at step t + 1 + delay, and the plasticity spike
indicators x0/y0 see spikes with the same latency as current injection.

Everything is integer state driven by named substreams of the master seed,
so equal (definition, seed) pairs produce byte-identical monitor output.
"""

from __future__ import annotations

import numpy as np

from ..fixedpoint import (
    STATE_MAGNITUDE_LIMIT,
    RandomStream,
    StateOverflowError,
    advance_streams,
    derive_seed,
)
from ..plasticity import TraceParams, decay_and_impulse, eval_rule, parse_rule
from ..weights import WeightConfig, apply_mantissa_delta, encode_weight, truncate_mantissa
from .backends import resolve_backend
from .netdef import NetworkDef

__all__ = ["Simulation", "bernoulli_generator", "build"]

_DECAY_SHIFT = 12
_DECAY_MASK = (1 << _DECAY_SHIFT) - 1

# Fused-path chunking: steps per kernel call and spike-buffer capacity.
_CHUNK_STEPS = 8192
_SPIKE_BUFFER = 1 << 16


def bernoulli_generator(rate: float, rng: RandomStream):
    """Yield one independent Bernoulli(rate) spike decision per step."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate {rate} outside [0, 1]")
    while True:
        yield rng.uniform() < rate


def _decay_array(x: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Vectorized decay step, exact for |x| <= 2**60 in int64."""
    mag = np.abs(x)
    dec = (mag >> _DECAY_SHIFT) * delta + (((mag & _DECAY_MASK) * delta + _DECAY_MASK) >> _DECAY_SHIFT)
    return x - np.sign(x) * dec


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


class SpikeMonitorResult:
    """Recorded (step, id) spike events of one group, in firing order."""

    kind = "spikes"
    columns = ("step", "id")

    def __init__(self, name, group, offset, size, ids):
        self.name = name
        self.group = group
        self._offset = offset
        self._mask = np.zeros(size, dtype=bool)
        if ids is None:
            self._mask[:] = True
        else:
            self._mask[list(ids)] = True
        self._chunks = []

    def _record(self, steps, flat_ids):
        local = flat_ids - self._offset
        sel = (local >= 0) & (local < self._mask.size)
        local = local[sel]
        steps = steps[sel]
        sel = self._mask[local]
        if np.any(sel):
            self._chunks.append(np.column_stack((steps[sel], local[sel])))

    def events(self) -> np.ndarray:
        if not self._chunks:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(self._chunks)

    def rows(self):
        for step, unit in self.events():
            yield (int(step), int(unit))


class StateMonitorResult:
    """Per-step series of one integer variable for a fixed id set."""

    kind = "state"
    columns = ("step", "id", "value")

    def __init__(self, name, group, variable, local_ids):
        self.name = name
        self.group = group
        self.variable = variable
        self.ids = np.asarray(local_ids, dtype=np.int64)
        self._chunks = []

    def _record(self, step, values):
        self._chunks.append(
            (np.array([step], dtype=np.int64), np.asarray(values).reshape(1, -1))
        )

    def _record_block(self, steps, values):
        self._chunks.append((np.asarray(steps, dtype=np.int64), values))

    def series(self):
        """(steps, values) arrays; values has one column per monitored id."""
        if not self._chunks:
            return np.empty(0, dtype=np.int64), np.empty((0, self.ids.size), dtype=np.int64)
        steps = np.concatenate([chunk[0] for chunk in self._chunks])
        values = np.concatenate([chunk[1] for chunk in self._chunks])
        return steps, values

    def rows(self):
        steps, values = self.series()
        for t, row in zip(steps, values):
            for unit, value in zip(self.ids, row):
                yield (int(t), int(unit), int(value))


class DeltaMonitorResult:
    """Nonzero learning-rule outputs (step, synapse id, dw) of one group."""

    kind = "dw"
    columns = ("step", "id", "value")

    def __init__(self, name, group, local_ids):
        self.name = name
        self.group = group
        self._ids = set(int(i) for i in local_ids)
        self._events = []

    def _record(self, step, synapse, dw):
        if synapse in self._ids:
            self._events.append((step, synapse, dw))

    def rows(self):
        return iter(self._events)


# ---------------------------------------------------------------------------
# Runtime synapse groups
# ---------------------------------------------------------------------------


class _SynapseRuntime:
    """Shared runtime arrays of one synapse group (static or plastic)."""

    def __init__(self, syn, src_offset, src_is_gen, dst_offset):
        n = len(syn.connections)
        self.name = syn.name
        self.plastic = syn.plastic
        self.config = WeightConfig(syn.sign_mode, syn.n_wb, 0)
        self.src = np.fromiter((c.src for c in syn.connections), np.int64, n) + src_offset
        self.dst = np.fromiter((c.dst for c in syn.connections), np.int64, n) + dst_offset
        self.exponent = np.fromiter((c.exponent for c in syn.connections), np.int64, n)
        self.delay = np.fromiter((c.delay for c in syn.connections), np.int64, n)
        self.src_is_gen = src_is_gen
        # Intrinsic latency: neuron spikes reach the synapse one step after
        # detection, generator spikes the same step.
        self.arrival_offset = self.delay + (0 if src_is_gen else 1)
        self.mantissa = np.fromiter(
            (truncate_mantissa(c.mantissa, self.config.n_s) for c in syn.connections),
            np.int64,
            n,
        )
        self.actual = np.fromiter(
            (
                encode_weight(int(m), int(e), self.config)
                for m, e in zip(self.mantissa, self.exponent)
            ),
            np.int64,
            n,
        )


class _PlasticRuntime(_SynapseRuntime):
    """Plastic synapse group: traces, rule, and per-synapse rng substreams."""

    def __init__(self, syn, src_offset, src_is_gen, dst_offset, seed, group_index):
        super().__init__(syn, src_offset, src_is_gen, dst_offset)
        n = self.src.size
        self.rule = parse_rule(syn.rule)
        inert = TraceParams()
        self.trace_params = {
            "x1": syn.pre_traces.get("x1", inert),
            "x2": syn.pre_traces.get("x2", inert),
            "y1": syn.post_traces.get("y1", inert),
            "y2": syn.post_traces.get("y2", inert),
            "y3": syn.post_traces.get("y3", inert),
        }
        self.traces = {name: np.zeros(n, dtype=np.int64) for name in self.trace_params}
        self.weight_rngs = [
            RandomStream(derive_seed(seed, "plastic-weight", group_index, k)) for k in range(n)
        ]
        self.trace_rngs = {
            name: [
                RandomStream(derive_seed(seed, "plastic-trace", group_index, k, name))
                for k in range(n)
            ]
            for name in self.trace_params
        }
        self.dw_monitors = []

        self._by_src = {}
        for k, flat in enumerate(self.src):
            self._by_src.setdefault(int(flat), []).append(k)
        self._ring_len = int(self.arrival_offset.max()) + 1 if n else 1
        self._pending = [[] for _ in range(self._ring_len)]
        self._cursor = 0

    def enqueue(self, flat_source_ids):
        for flat in flat_source_ids:
            for k in self._by_src.get(int(flat), ()):
                slot = (self._cursor + int(self.arrival_offset[k])) % self._ring_len
                self._pending[slot].append(k)

    def end_step(self):
        # cursor moves in the end phase so that reset-phase enqueues (which
        # carry the one-step intrinsic latency in arrival_offset) land right
        self._cursor = (self._cursor + 1) % self._ring_len

    def step(self, t, winput, prev_spiked):
        """Synapses-phase work: deliveries, traces, rule, weight update."""
        arrivals = self._pending[self._cursor]
        self._pending[self._cursor] = []

        x0 = np.zeros(self.src.size, dtype=bool)
        if arrivals:
            x0[arrivals] = True
            np.add.at(winput, self.dst[arrivals], self.actual[arrivals])
        y0 = prev_spiked[self.dst] if self.src.size else np.zeros(0, dtype=bool)

        for k in range(self.src.size):
            for name in ("x1", "x2"):
                self.traces[name][k] = decay_and_impulse(
                    int(self.traces[name][k]), self.trace_params[name], bool(x0[k]),
                    self.trace_rngs[name][k],
                )
            for name in ("y1", "y2", "y3"):
                self.traces[name][k] = decay_and_impulse(
                    int(self.traces[name][k]), self.trace_params[name], bool(y0[k]),
                    self.trace_rngs[name][k],
                )
            env = {
                "x0": int(x0[k]),
                "y0": int(y0[k]),
                "x1": int(self.traces["x1"][k]),
                "x2": int(self.traces["x2"][k]),
                "y1": int(self.traces["y1"][k]),
                "y2": int(self.traces["y2"][k]),
                "y3": int(self.traces["y3"][k]),
                "w": int(self.mantissa[k]),
                "t": t,
            }
            dw = eval_rule(self.rule, env)
            if dw != 0.0:
                for monitor in self.dw_monitors:
                    monitor._record(t, k, dw)
                updated = apply_mantissa_delta(
                    int(self.mantissa[k]), dw, self.config, self.weight_rngs[k]
                )
                if updated != self.mantissa[k]:
                    self.mantissa[k] = updated
                    self.actual[k] = encode_weight(updated, int(self.exponent[k]), self.config)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


class Simulation:
    """Compiled network plus mutable state; advance with :meth:`run`."""

    def __init__(self, definition: NetworkDef):
        definition.validate()
        self.definition = definition
        self.seed = definition.seed

        # --- flatten neuron groups
        self.unit_offsets = {}
        offset = 0
        for group in definition.groups:
            self.unit_offsets[group.name] = offset
            offset += group.size
        self.n_units = offset

        def per_unit(attr):
            values = np.empty(self.n_units, dtype=np.int64)
            for group in definition.groups:
                off = self.unit_offsets[group.name]
                values[off : off + group.size] = attr(group.params)
            return values

        self.delta_i = per_unit(lambda p: p.delta_i)
        self.delta_v = per_unit(lambda p: p.delta_v)
        self.v_threshold = per_unit(lambda p: p.v_threshold)
        self.bias = per_unit(lambda p: p.bias)
        self.refractory = per_unit(lambda p: p.refractory)

        # --- flatten generator groups
        self.gen_offsets = {}
        offset = 0
        for gen in definition.generators:
            self.gen_offsets[gen.name] = offset
            offset += gen.size
        self.n_gens = offset

        self.rates = np.full(self.n_gens, -1.0, dtype=np.float64)
        events = set()
        for gen in definition.generators:
            off = self.gen_offsets[gen.name]
            if gen.rate is not None:
                self.rates[off : off + gen.size] = gen.rate
            for step, unit in gen.spikes:
                events.add((step, off + unit))
        ordered = sorted(events)
        self.event_steps = np.fromiter((e[0] for e in ordered), np.int64, len(ordered))
        self.event_gens = np.fromiter((e[1] for e in ordered), np.int64, len(ordered))
        self.event_cursor = 0
        self.gen_states = np.fromiter(
            (derive_seed(self.seed, "gen", g) for g in range(self.n_gens)),
            np.uint64,
            self.n_gens,
        )

        # --- synapse groups
        self.synapse_runtimes = {}
        self.plastic_groups = []
        static = []
        for index, syn in enumerate(definition.synapses):
            src_is_gen = syn.source in self.gen_offsets
            src_offset = self.gen_offsets[syn.source] if src_is_gen else self.unit_offsets[syn.source]
            dst_offset = self.unit_offsets[syn.target]
            if syn.plastic:
                runtime = _PlasticRuntime(syn, src_offset, src_is_gen, dst_offset, self.seed, index)
                self.plastic_groups.append(runtime)
            else:
                runtime = _SynapseRuntime(syn, src_offset, src_is_gen, dst_offset)
                static.append(runtime)
            self.synapse_runtimes[syn.name] = runtime

        self._build_static_csr(static)

        # --- delivery ring
        max_offset = 0
        if self.ns_off.size:
            max_offset = max(max_offset, int(self.ns_off.max()))
        if self.gs_off.size:
            max_offset = max(max_offset, int(self.gs_off.max()))
        self.ring_len = max_offset + 1
        self.ring = np.zeros((self.ring_len, self.n_units), dtype=np.int64)
        self.cursor = 0

        # --- state
        self.I = np.zeros(self.n_units, dtype=np.int64)
        self.v = np.zeros(self.n_units, dtype=np.int64)
        self.refrac = np.zeros(self.n_units, dtype=np.int64)
        self.prev_spiked = np.zeros(self.n_units, dtype=bool)
        self.t = 0

        self._build_monitors()

    def _build_static_csr(self, runtimes):
        def csr(n_sources, runtimes, offset_fn):
            src, tgt, wt, off = [], [], [], []
            for runtime in runtimes:
                src.append(runtime.src)
                tgt.append(runtime.dst)
                wt.append(runtime.actual)
                off.append(offset_fn(runtime))
            if src:
                src = np.concatenate(src)
                order = np.argsort(src, kind="stable")
                src = src[order]
                tgt = np.concatenate(tgt)[order]
                wt = np.concatenate(wt)[order]
                off = np.concatenate(off)[order]
            else:
                src = tgt = wt = off = np.empty(0, dtype=np.int64)
            indptr = np.zeros(n_sources + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            np.cumsum(indptr, out=indptr)
            return indptr, tgt, wt, off

        neuron_sourced = [r for r in runtimes if not r.src_is_gen]
        gen_sourced = [r for r in runtimes if r.src_is_gen]
        self.ns_indptr, self.ns_tgt, self.ns_wt, self.ns_off = csr(
            self.n_units, neuron_sourced, lambda r: r.arrival_offset
        )
        self.gs_indptr, self.gs_tgt, self.gs_wt, self.gs_off = csr(
            self.n_gens, gen_sourced, lambda r: r.arrival_offset
        )

    def _build_monitors(self):
        self.monitors = []
        self._gen_spike_monitors = []
        self._neuron_spike_monitors = []
        self._i_monitors = []
        self._v_monitors = []
        self._synapse_monitors = []
        for mon in self.definition.monitors:
            if mon.group in self.unit_offsets:
                offset = self.unit_offsets[mon.group]
                size = next(g.size for g in self.definition.groups if g.name == mon.group)
                if mon.variable == "spikes":
                    result = SpikeMonitorResult(mon.name, mon.group, offset, size, mon.ids)
                    self._neuron_spike_monitors.append(result)
                else:
                    local = np.arange(size) if mon.ids is None else np.asarray(mon.ids)
                    result = StateMonitorResult(mon.name, mon.group, mon.variable, local)
                    result._flat = local + offset
                    if mon.variable == "I":
                        self._i_monitors.append(result)
                    else:
                        self._v_monitors.append(result)
            elif mon.group in self.gen_offsets:
                offset = self.gen_offsets[mon.group]
                size = next(g.size for g in self.definition.generators if g.name == mon.group)
                result = SpikeMonitorResult(mon.name, mon.group, offset, size, mon.ids)
                self._gen_spike_monitors.append(result)
            else:
                runtime = self.synapse_runtimes[mon.group]
                size = runtime.src.size
                local = np.arange(size) if mon.ids is None else np.asarray(mon.ids)
                if mon.variable == "dw":
                    result = DeltaMonitorResult(mon.name, mon.group, local)
                    runtime.dw_monitors.append(result)
                else:
                    result = StateMonitorResult(mon.name, mon.group, mon.variable, local)
                    result._runtime = runtime
                    self._synapse_monitors.append(result)
            self.monitors.append(result)

    # -- error context ----------------------------------------------------

    def _locate(self, flat: int) -> str:
        for group in self.definition.groups:
            off = self.unit_offsets[group.name]
            if off <= flat < off + group.size:
                return f"{group.name}[{flat - off}]"
        return str(flat)

    def _check_state(self, values: np.ndarray, what: str):
        bad = np.abs(values) > STATE_MAGNITUDE_LIMIT
        if bad.any():
            flat = int(np.argmax(bad))
            raise StateOverflowError(
                f"{what} reached {int(values[flat])}", unit=self._locate(flat), step=self.t
            )

    # -- stepping ----------------------------------------------------------

    def run(self, steps: int, backend: str | None = None):
        """Advance ``steps`` steps; returns {monitor name: monitor result}."""
        if steps < 0:
            raise ValueError("steps must be >= 0")
        kernel = resolve_backend(backend)
        end = self.t + steps
        if kernel is not None and not self.plastic_groups:
            self._run_fused(kernel, end)
        else:
            while self.t < end:
                self._step_generic()
        return {monitor.name: monitor for monitor in self.monitors}

    def _draw_generator_spikes(self) -> np.ndarray:
        spikes = np.zeros(self.n_gens, dtype=bool)
        if self.n_gens:
            uniforms = advance_streams(self.gen_states)
            np.less(uniforms, self.rates, out=spikes, where=self.rates >= 0.0)
        while (
            self.event_cursor < self.event_steps.size
            and self.event_steps[self.event_cursor] == self.t
        ):
            spikes[self.event_gens[self.event_cursor]] = True
            self.event_cursor += 1
        return spikes

    def _deliver(self, indptr, tgt, wt, off, flat_sources):
        for flat in flat_sources:
            lo, hi = indptr[flat], indptr[flat + 1]
            if lo == hi:
                continue
            slots = (self.cursor + off[lo:hi]) % self.ring_len
            np.add.at(self.ring, (slots, tgt[lo:hi]), wt[lo:hi])

    def _step_generic(self):
        t = self.t

        # start: generators fire and deliver
        gspikes = self._draw_generator_spikes()
        firing_gens = np.nonzero(gspikes)[0]
        if firing_gens.size:
            steps_arr = np.full(firing_gens.size, t, dtype=np.int64)
            for monitor in self._gen_spike_monitors:
                monitor._record(steps_arr, firing_gens)
            self._deliver(self.gs_indptr, self.gs_tgt, self.gs_wt, self.gs_off, firing_gens)
            for group in self.plastic_groups:
                if group.src_is_gen:
                    group.enqueue(firing_gens)

        # synapses: accumulate deliveries, update traces and plastic weights
        winput = self.ring[self.cursor]
        for group in self.plastic_groups:
            group.step(t, winput, self.prev_spiked)
        self.I += winput
        self._check_state(self.I, "synaptic input")
        for monitor in self._i_monitors:
            monitor._record(t, self.I[monitor._flat].copy())
        for monitor in self._synapse_monitors:
            monitor._record(t, _synapse_values(monitor).copy())

        # groups: voltage integrates the post-accumulation input, then the
        # input decays (algebraically identical to decaying first and
        # integrating the decayed value, which is what the probed I shows)
        active = self.refrac == 0
        v_next = _decay_array(self.v, self.delta_v) + self.I + self.bias
        self._check_state(np.where(active, v_next, 0), "voltage")
        self.v = np.where(active, v_next, 0)
        self.refrac = np.where(active, 0, self.refrac - 1)
        self.I = _decay_array(self.I, self.delta_i)

        # thresholds: strict crossing only
        spiked = self.v > self.v_threshold

        # resets: zero voltage, arm refractory, deliver outgoing spikes
        firing = np.nonzero(spiked)[0]
        if firing.size:
            self.v[firing] = 0
            self.refrac[firing] = self.refractory[firing]
            steps_arr = np.full(firing.size, t, dtype=np.int64)
            for monitor in self._neuron_spike_monitors:
                monitor._record(steps_arr, firing)
            self._deliver(self.ns_indptr, self.ns_tgt, self.ns_wt, self.ns_off, firing)
            for group in self.plastic_groups:
                if not group.src_is_gen:
                    group.enqueue(firing)
        self.prev_spiked = spiked

        # end: late probes, recycle the consumed delivery slot
        for monitor in self._v_monitors:
            monitor._record(t, self.v[monitor._flat].copy())
        winput[:] = 0
        self.cursor = (self.cursor + 1) % self.ring_len
        for group in self.plastic_groups:
            group.end_step()
        self.t = t + 1

    def _run_fused(self, kernel, end: int):
        imon_flat = (
            np.concatenate([m._flat for m in self._i_monitors])
            if self._i_monitors
            else np.empty(0, dtype=np.int64)
        )
        vmon_flat = (
            np.concatenate([m._flat for m in self._v_monitors])
            if self._v_monitors
            else np.empty(0, dtype=np.int64)
        )
        nspk_mask = np.zeros(self.n_units, dtype=np.uint8)
        for monitor in self._neuron_spike_monitors:
            nspk_mask[monitor._offset : monitor._offset + monitor._mask.size] |= monitor._mask
        gspk_mask = np.zeros(self.n_gens, dtype=np.uint8)
        for monitor in self._gen_spike_monitors:
            gspk_mask[monitor._offset : monitor._offset + monitor._mask.size] |= monitor._mask

        # a chunk must fit at least one worst-case step (everything spiking)
        capacity = max(_SPIKE_BUFFER, self.n_units + 1, self.n_gens + 1)
        spk_step = np.empty(capacity, dtype=np.int64)
        spk_unit = np.empty(capacity, dtype=np.int64)
        gspk_step = np.empty(capacity, dtype=np.int64)
        gspk_unit = np.empty(capacity, dtype=np.int64)

        while self.t < end:
            chunk = min(_CHUNK_STEPS, end - self.t)
            imon_out = np.empty((chunk, imon_flat.size), dtype=np.int64)
            vmon_out = np.empty((chunk, vmon_flat.size), dtype=np.int64)
            t0 = self.t
            (
                done,
                self.cursor,
                self.event_cursor,
                n_spk,
                n_gspk,
                err_unit,
            ) = kernel.run_chunk(
                t0,
                chunk,
                self.I,
                self.v,
                self.refrac,
                self.prev_spiked.view(np.uint8),
                self.delta_i,
                self.delta_v,
                self.v_threshold,
                self.bias,
                self.refractory,
                self.ring,
                self.cursor,
                self.ns_indptr,
                self.ns_tgt,
                self.ns_wt,
                self.ns_off,
                self.gs_indptr,
                self.gs_tgt,
                self.gs_wt,
                self.gs_off,
                self.rates,
                self.gen_states,
                self.event_steps,
                self.event_gens,
                self.event_cursor,
                imon_flat,
                imon_out,
                vmon_flat,
                vmon_out,
                nspk_mask,
                gspk_mask,
                spk_step,
                spk_unit,
                gspk_step,
                gspk_unit,
            )
            self.t = t0 + done

            if done:
                block_steps = np.arange(t0, t0 + done, dtype=np.int64)
                column = 0
                for monitor in self._i_monitors:
                    width = monitor.ids.size
                    monitor._record_block(block_steps, imon_out[:done, column : column + width])
                    column += width
                column = 0
                for monitor in self._v_monitors:
                    width = monitor.ids.size
                    monitor._record_block(block_steps, vmon_out[:done, column : column + width])
                    column += width
                for monitor in self._synapse_monitors:
                    # only static groups reach the fused path; their weights
                    # are constant, so replicate the current row
                    values = _synapse_values(monitor)
                    monitor._record_block(block_steps, np.tile(values, (done, 1)))
            if n_spk:
                for monitor in self._neuron_spike_monitors:
                    monitor._record(spk_step[:n_spk].copy(), spk_unit[:n_spk].copy())
            if n_gspk:
                for monitor in self._gen_spike_monitors:
                    monitor._record(gspk_step[:n_gspk].copy(), gspk_unit[:n_gspk].copy())

            if err_unit >= 0:
                raise StateOverflowError(
                    "integer state left the checked range",
                    unit=self._locate(err_unit),
                    step=self.t,
                )
            if done == 0:
                raise RuntimeError("kernel made no progress")


def _synapse_values(monitor):
    runtime = monitor._runtime
    if monitor.variable == "w":
        return runtime.mantissa[monitor.ids]
    if monitor.variable == "J":
        return runtime.actual[monitor.ids]
    return runtime.traces[monitor.variable][monitor.ids]


def build(definition: NetworkDef) -> Simulation:
    """Validate a definition and compile it into a runnable simulation."""
    return Simulation(definition)
