#!/usr/bin/env python3
"""Benchmark the compiled stepping kernel against the NumPy fallback.

Runs the bundled 500-unit recurrent demo and a single-unit network on both
backends, checks that the results match bit-exactly, and prints a timing
table. Usage: python benchmarks/benchmark_backends.py [--steps N]
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from loihiemu.configio import definition_from_config, load_config, resolve_config
from loihiemu.engine import available_backends, build

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def load_definition(name, steps):
    raw = load_config(os.path.join(CONFIG_DIR, name))
    resolved = resolve_config(raw, CONFIG_DIR, steps_override=steps)
    definition, steps, _ = definition_from_config(resolved)
    return definition, steps


def time_backend(definition, steps, backend):
    sim = build(definition)
    started = time.perf_counter()
    monitors = sim.run(steps, backend=backend)
    elapsed = time.perf_counter() - started
    spikes = {
        name: mon.events() for name, mon in monitors.items() if mon.kind == "spikes"
    }
    return elapsed, spikes


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=20_000)
    args = parser.parse_args()

    if "compiled" not in available_backends():
        print("compiled backend not built; nothing to compare")
        return 1

    cases = [
        ("network500.yaml", "500-unit recurrent net", args.steps),
        ("single_neuron.yaml", "single unit", 100_000),
    ]
    print(f"{'case':<28} {'steps':>8} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for config, label, steps in cases:
        definition, steps = load_definition(config, steps)
        compiled_time, compiled_spikes = time_backend(definition, steps, "compiled")
        python_time, python_spikes = time_backend(definition, steps, "python")
        for name in compiled_spikes:
            a, b = compiled_spikes[name], python_spikes[name]
            if a.shape != b.shape or (a != b).any():
                print(f"MISMATCH between backends in monitor '{name}' for {label}")
                return 1
        print(
            f"{label:<28} {steps:>8} {compiled_time:>9.2f}s {python_time:>9.2f}s"
            f" {python_time / compiled_time:>7.1f}x"
        )
    print("all spike outputs identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
