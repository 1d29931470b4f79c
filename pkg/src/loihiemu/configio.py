"""Network config files, run artifacts, and CSV output.

Configs are YAML with sections ``groups``, ``generators``, ``synapses``,
``monitors`` plus ``seed`` and ``steps``. Synapse connections come in three
forms: an inline ``list`` of ``[src, dst, mantissa, exponent, delay]`` rows,
a referenced ``csv`` file with the same columns, or ``random`` sampling
(connection probability plus a mantissa distribution), which is drawn
deterministically from the master seed. The resolved config (overrides
applied, referenced CSV inlined) is hashed so a run can be identified and
replayed from its manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass

from .engine import (
    Connection,
    GeneratorGroupDef,
    MonitorDef,
    NetworkDef,
    NeuronGroupDef,
    SynapseGroupDef,
)
from .fixedpoint import RandomStream, derive_seed
from .neuron import CompartmentParams
from .plasticity import TraceParams
from .weights import SignMode

__all__ = [
    "ConfigError",
    "StdpWindowSpec",
    "config_hash",
    "definition_from_config",
    "load_config",
    "resolve_config",
    "write_monitor_csv",
    "write_stdp_window_csv",
]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class StdpWindowSpec:
    """Post-run join of dw events with pre/post spike monitors."""

    pre_monitor: str
    post_monitor: str
    dw_monitor: str
    out: str
    max_lag: int = 32


def load_config(path: str) -> dict:
    import yaml

    try:
        with open(path) as handle:
            raw = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return raw


def resolve_config(
    raw: dict,
    config_dir: str = ".",
    seed_override: int | None = None,
    steps_override: int | None = None,
) -> dict:
    """Apply CLI overrides and inline referenced connection CSV files."""
    resolved = json.loads(json.dumps(raw))  # deep copy, plain data only
    if seed_override is not None:
        resolved["seed"] = seed_override
    if steps_override is not None:
        resolved["steps"] = steps_override
    for synapse in resolved.get("synapses", []):
        connections = synapse.get("connections")
        if isinstance(connections, dict) and "csv" in connections:
            path = os.path.join(config_dir, connections["csv"])
            try:
                with open(path, newline="") as handle:
                    rows = [
                        [int(cell) for cell in row]
                        for row in csv.reader(handle)
                        if row and not row[0].lstrip().startswith("#")
                    ]
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read connection csv '{path}': {exc}") from exc
            synapse["connections"] = {"list": rows}
    return resolved


def config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing '{key}'")
    return mapping[key]


def _sample_mantissa(spec, sign_mode: SignMode, rng: RandomStream) -> int:
    low, high = sign_mode.mantissa_range
    sign = -1 if sign_mode is SignMode.INHIBITORY else 1
    if "value" in spec:
        return int(spec["value"])
    if "uniform" in spec:
        lo, hi = spec["uniform"]
        magnitude = int(lo) + int(rng.uniform() * (int(hi) - int(lo) + 1))
    elif "lognormal" in spec:
        median = float(spec["lognormal"]["median"])
        sigma = float(spec["lognormal"]["sigma"])
        u1 = 1.0 - rng.uniform()
        u2 = rng.uniform()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        magnitude = round(median * math.exp(sigma * z))
    else:
        raise ConfigError(f"mantissa spec needs value, uniform or lognormal: {spec}")
    return min(max(sign * magnitude, low), high)


def _random_connections(spec, name, n_src, n_dst, sign_mode, seed):
    probability = float(_require(spec, "probability", f"synapse '{name}' random"))
    if not 0.0 <= probability <= 1.0:
        raise ConfigError(f"synapse '{name}': probability {probability} outside [0, 1]")
    exponent = int(spec.get("exponent", 0))
    delay = int(spec.get("delay", 0))
    mantissa_spec = _require(spec, "mantissa", f"synapse '{name}' random")
    autapses = bool(spec.get("autapses", True))

    topology = RandomStream(derive_seed(seed, "connect", name))
    draw = RandomStream(derive_seed(seed, "mantissa", name))
    connections = []
    for src in range(n_src):
        for dst in range(n_dst):
            if topology.uniform() < probability:
                if not autapses and src == dst:
                    continue
                mantissa = _sample_mantissa(mantissa_spec, sign_mode, draw)
                connections.append(Connection(src, dst, mantissa, exponent, delay))
    return tuple(connections)


def _trace_params(spec, where) -> dict:
    params = {}
    for trace_name, values in (spec or {}).items():
        try:
            params[trace_name] = TraceParams(
                impulse=int(values.get("impulse", 0)), tau=int(values.get("tau", 1))
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad trace '{trace_name}': {exc}") from exc
    return params


def definition_from_config(resolved: dict):
    """Build (NetworkDef, steps, postprocess specs) from a resolved config."""
    seed = int(resolved.get("seed", 0))
    steps = int(resolved.get("steps", 0))
    if steps < 0:
        raise ConfigError("steps must be >= 0")

    groups = []
    group_sizes = {}
    for spec in resolved.get("groups", []):
        name = _require(spec, "name", "neuron group")
        where = f"neuron group '{name}'"
        try:
            params = CompartmentParams(
                delta_i=int(_require(spec, "delta_i", where)),
                delta_v=int(_require(spec, "delta_v", where)),
                v_mantissa=int(_require(spec, "threshold_mantissa", where)),
                bias=int(spec.get("bias", 0)),
                refractory=int(spec.get("refractory", 0)),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        size = int(_require(spec, "size", where))
        groups.append(NeuronGroupDef(name, size, params))
        group_sizes[name] = size

    generators = []
    for spec in resolved.get("generators", []):
        name = _require(spec, "name", "generator group")
        size = int(_require(spec, "size", f"generator group '{name}'"))
        rate = spec.get("rate")
        spikes = tuple((int(s), int(u)) for s, u in spec.get("spikes", []))
        generators.append(
            GeneratorGroupDef(
                name, size, rate=float(rate) if rate is not None else None, spikes=spikes
            )
        )
        group_sizes[name] = size

    synapses = []
    for spec in resolved.get("synapses", []):
        name = _require(spec, "name", "synapse group")
        where = f"synapse group '{name}'"
        source = _require(spec, "source", where)
        target = _require(spec, "target", where)
        try:
            sign_mode = SignMode(_require(spec, "sign_mode", where))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        connections_spec = _require(spec, "connections", where)
        if "list" in connections_spec:
            connections = tuple(
                Connection(int(r[0]), int(r[1]), int(r[2]), int(r[3]), int(r[4]))
                for r in connections_spec["list"]
            )
        elif "random" in connections_spec:
            if source not in group_sizes or target not in group_sizes:
                raise ConfigError(f"{where}: unknown source or target group")
            connections = _random_connections(
                connections_spec["random"],
                name,
                group_sizes[source],
                group_sizes[target],
                sign_mode,
                seed,
            )
        else:
            raise ConfigError(f"{where}: connections need 'list', 'csv' or 'random'")
        synapses.append(
            SynapseGroupDef(
                name,
                source=source,
                target=target,
                sign_mode=sign_mode,
                connections=connections,
                n_wb=int(spec.get("weight_bits", 8)),
                plastic=bool(spec.get("plastic", False)),
                rule=spec.get("rule"),
                pre_traces=_trace_params(spec.get("pre_traces"), where),
                post_traces=_trace_params(spec.get("post_traces"), where),
            )
        )

    monitors = []
    for spec in resolved.get("monitors", []):
        name = _require(spec, "name", "monitor")
        monitors.append(
            MonitorDef(
                name,
                group=_require(spec, "group", f"monitor '{name}'"),
                variable=_require(spec, "variable", f"monitor '{name}'"),
                ids=tuple(spec["ids"]) if spec.get("ids") is not None else None,
            )
        )

    postprocess = []
    post_spec = resolved.get("postprocess", {})
    if "stdp_window" in post_spec:
        window = post_spec["stdp_window"]
        postprocess.append(
            StdpWindowSpec(
                pre_monitor=_require(window, "pre", "postprocess stdp_window"),
                post_monitor=_require(window, "post", "postprocess stdp_window"),
                dw_monitor=_require(window, "dw", "postprocess stdp_window"),
                out=window.get("out", "stdp_window.csv"),
                max_lag=int(window.get("max_lag", 32)),
            )
        )

    definition = NetworkDef(
        groups=tuple(groups),
        generators=tuple(generators),
        synapses=tuple(synapses),
        monitors=tuple(monitors),
        seed=seed,
    )
    return definition, steps, postprocess


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def write_monitor_csv(monitor, outdir: str) -> str:
    """One CSV per monitor: ``step,id`` for spikes, ``step,id,value`` else."""
    path = os.path.join(outdir, f"{monitor.name}.csv")
    lines = [",".join(monitor.columns)]
    if monitor.kind == "spikes":
        events = monitor.events()
        lines.extend(f"{step},{unit}" for step, unit in events.tolist())
    elif monitor.kind == "state":
        steps, values = monitor.series()
        ids = monitor.ids.tolist()
        for step, row in zip(steps.tolist(), values.tolist()):
            lines.extend(f"{step},{unit},{value}" for unit, value in zip(ids, row))
    else:  # dw events carry exact float values
        lines.extend(f"{step},{unit},{value!r}" for step, unit, value in monitor.rows())
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


def write_stdp_window_csv(spec: StdpWindowSpec, monitors: dict, outdir: str) -> str:
    """Join dw events with the nearest pre/post spikes into (lag, dw) rows."""
    for name in (spec.pre_monitor, spec.post_monitor, spec.dw_monitor):
        if name not in monitors:
            raise ConfigError(f"postprocess stdp_window: unknown monitor '{name}'")
    pre_steps = [step for step, _ in monitors[spec.pre_monitor].rows()]
    post_steps = [step for step, _ in monitors[spec.post_monitor].rows()]

    def latest_at_or_before(steps, t):
        import bisect

        k = bisect.bisect_right(steps, t)
        return steps[k - 1] if k else None

    lines = ["step,delta_t,dw"]
    for step, _, dw in monitors[spec.dw_monitor].rows():
        pre = latest_at_or_before(pre_steps, step)
        post = latest_at_or_before(post_steps, step)
        if pre is None or post is None:
            continue
        lag = post - pre
        if abs(lag) <= spec.max_lag:
            lines.append(f"{step},{lag},{dw!r}")
    path = os.path.join(outdir, spec.out)
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
    return path
