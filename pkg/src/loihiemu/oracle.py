"""Independent references and validation experiments.

The scalar single-unit reference below is deliberately written from the
update-rule description alone, with its own float-based rounding, and shares
no dynamics code with the engine; agreement between the two is the strongest
check available for the integer kernels. The statistical experiments
reproduce the expected behavior of stochastic weight rounding, trace decay
and the plasticity window at desk scale, and report every metric with its
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .engine import (
    Connection,
    GeneratorGroupDef,
    MonitorDef,
    NetworkDef,
    NeuronGroupDef,
    SynapseGroupDef,
    build,
)
from .fixedpoint import RandomStream, derive_seed
from .neuron import CompartmentParams
from .plasticity import TraceParams, decay_and_impulse, eval_rule, parse_rule
from .weights import (
    SignMode,
    WeightConfig,
    apply_mantissa_delta,
    encode_weight,
    precision_exponent,
    truncate_mantissa,
)

__all__ = [
    "Metric",
    "ValidationReport",
    "closed_form_current",
    "float_sanity_experiment",
    "oracle_equivalence_experiment",
    "run_suite",
    "scalar_algorithm1",
    "stdp_window_experiment",
    "trace_experiment",
    "weight_interval_experiment",
]

# The float-based rounding in the scalar reference is exact as long as
# state * 4096 stays inside the 2**53 double mantissa; enforce a margin.
_FLOAT_EXACT_LIMIT = 1 << 41


def _round_away(value: float) -> int:
    return int(math.copysign(math.ceil(abs(value)), value))


def scalar_algorithm1(
    delta_i: int,
    delta_v: int,
    v_mantissa: int,
    bias: int,
    refractory: int,
    weighted_input,
    steps: int,
):
    """Single-unit reference: decay, integrate, threshold, reset, clamp.

    ``weighted_input[t]`` is the presummed weighted spike input at step t.
    Returns (I, v, spike) series as lists. This is a straight per-step
    transcription of the unit's update loop using float ceil rounding, kept
    independent of the engine's integer-shift implementation.
    """
    threshold = v_mantissa * 64
    I = 0
    v = 0
    refrac = 0
    series_i, series_v, series_s = [], [], []
    push_i, push_v, push_s = series_i.append, series_v.append, series_s.append
    ceil, copysign = math.ceil, math.copysign
    for t in range(steps):
        I = I - int(copysign(ceil(abs(I * delta_i / 4096.0)), I)) + weighted_input[t]
        if abs(I) >= _FLOAT_EXACT_LIMIT:
            raise RuntimeError("scalar reference left its float-exact range")
        if refrac > 0:
            v = 0
            refrac -= 1
            spike = False
        else:
            v = v - int(copysign(ceil(abs(v * delta_v / 4096.0)), v)) + I + bias
            if abs(v) >= _FLOAT_EXACT_LIMIT:
                raise RuntimeError("scalar reference left its float-exact range")
            if v > threshold:
                spike = True
                v = 0
                refrac = refractory
            else:
                spike = False
        push_i(I)
        push_v(v)
        push_s(spike)
    return series_i, series_v, series_s


def closed_form_current(spike_times, J: float, tau_i: float, t: float) -> float:
    """Continuous-time synaptic input: a decaying exponential per spike."""
    if tau_i <= 0:
        raise ValueError("tau_i must be positive")
    total = 0.0
    for t_k in spike_times:
        if t >= t_k:
            total += J * math.exp((t_k - t) / tau_i)
    return total


# ---------------------------------------------------------------------------
# Validation reports
# ---------------------------------------------------------------------------


@dataclass
class Metric:
    name: str
    observed: float
    expected: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        out = (
            f"[{status}] {self.name}: observed={self.observed:g}"
            f" expected={self.expected:g} tolerance={self.tolerance:g}"
        )
        return out + (f" ({self.detail})" if self.detail else "")


@dataclass
class ValidationReport:
    experiment: str
    seed: int
    samples: int
    metrics: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def add(self, name, observed, expected, tolerance, passed=None, detail=""):
        if passed is None:
            passed = abs(observed - expected) <= tolerance
        self.metrics.append(Metric(name, observed, expected, tolerance, passed, detail))

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "samples": self.samples,
            "passed": self.passed,
            "metrics": [vars(m) for m in self.metrics],
        }

    def lines(self):
        yield f"# {self.experiment} (seed={self.seed}, samples={self.samples})"
        for metric in self.metrics:
            yield metric.line()
        yield f"result: {'PASS' if self.passed else 'FAIL'}"


# ---------------------------------------------------------------------------
# Weight-change intervals
# ---------------------------------------------------------------------------


def weight_interval_experiment(
    n_wb: int,
    sign_mode: SignMode = SignMode.EXCITATORY,
    samples: int = 8000,
    seed: int = 0,
) -> ValidationReport:
    """Distribution of steps between weight changes under dw=+1 per step.

    A unit increment on a mantissa grid of spacing ``2**n_s`` rounds up with
    probability ``2**-n_s`` per step, so inter-change intervals should be
    geometric with mean ``2**n_s``. The mantissa starts at the lower clip
    bound and is reset there after each recorded change, so the upper bound
    never interferes with the sampling (at the coarsest precisions the grid
    has very few points and an unreset walk would pin at the top).
    """
    config = WeightConfig(sign_mode, n_wb, 0)
    rng = RandomStream(derive_seed(seed, "weight-interval", sign_mode.value, n_wb))
    expected_mean = float(config.precision)

    low = config.mantissa_bounds[0]
    intervals = np.empty(samples, dtype=np.int64)
    mantissa = low
    waited = 0
    for k in range(samples):
        while True:
            waited += 1
            updated = apply_mantissa_delta(mantissa, 1.0, config, rng)
            if updated != mantissa:
                intervals[k] = waited
                waited = 0
                mantissa = low
                break

    report = ValidationReport(
        experiment=f"weight-interval {sign_mode.value} n_wb={n_wb}",
        seed=seed,
        samples=samples,
    )
    mean = float(intervals.mean())
    report.add(
        "mean inter-change interval",
        mean,
        expected_mean,
        0.03 * expected_mean,
    )

    histogram = np.bincount(intervals)
    report.tables["intervals"] = [
        (int(k), int(count)) for k, count in enumerate(histogram) if count
    ]

    if config.precision > 1:
        p_value = _geometric_chi2(intervals, 1.0 / config.precision)
        report.add(
            "geometric shape (chi^2 p-value)",
            p_value,
            1.0,
            0.0,
            passed=p_value > 0.01,
            detail="requires p > 0.01",
        )
    return report


def _geometric_chi2(intervals: np.ndarray, p: float) -> float:
    """Chi-square goodness of fit against Geometric(p) on {1, 2, ...}."""
    n = intervals.size
    # Individual value bins while the expected count stays >= 5, then a tail.
    k_max = 1
    while n * p * (1 - p) ** k_max >= 5 and k_max < 10000:
        k_max += 1
    observed = np.array(
        [(intervals == k).sum() for k in range(1, k_max + 1)] + [(intervals > k_max).sum()],
        dtype=float,
    )
    expected = np.array(
        [n * p * (1 - p) ** (k - 1) for k in range(1, k_max + 1)] + [n * (1 - p) ** k_max]
    )
    statistic = float(((observed - expected) ** 2 / expected).sum())
    return float(chi2.sf(statistic, df=len(observed) - 1))


# ---------------------------------------------------------------------------
# Trace statistics
# ---------------------------------------------------------------------------


def trace_experiment(
    taus=(4, 8, 16, 32),
    impulse: int = 120,
    trials: int = 400,
    horizon: int = 10_000,
    seed: int = 0,
) -> ValidationReport:
    """Mean emulated trace against the real-valued decay recursion.

    One impulse at t=0, then pure decay. The stochastic rounding is unbiased,
    so over ``trials`` repetitions the mean trace must follow
    ``m[t] = m[t-1] * (1 - 1/tau)`` within sampling noise; deviations are
    checked to 2 trace units up to 5*tau and must stay bounded out to the
    full horizon. Once every trial has decayed to zero the remaining steps
    are exact (zero is absorbing), so the loop stops early.
    """
    report = ValidationReport(experiment="trace-decay", seed=seed, samples=trials)
    for tau in taus:
        params = TraceParams(impulse=impulse, tau=tau)
        rngs = [
            RandomStream(derive_seed(seed, "trace", tau, trial)) for trial in range(trials)
        ]
        values = np.full(trials, impulse, dtype=np.int64)
        reference = float(impulse)
        check_until = 5 * tau

        max_early_deviation = 0.0
        max_signed_deviation = 0.0
        deviation_rows = [(0, 0.0)]
        for t in range(1, horizon + 1):
            reference *= params.alpha
            if values.any():
                for trial in range(trials):
                    values[trial] = decay_and_impulse(
                        int(values[trial]), params, False, rngs[trial]
                    )
                mean = float(values.mean())
            else:
                mean = 0.0
            deviation = mean - reference
            deviation_rows.append((t, deviation))
            max_signed_deviation = max(max_signed_deviation, abs(deviation))
            if t <= check_until:
                max_early_deviation = max(max_early_deviation, abs(deviation))

        report.add(
            f"tau={tau}: max |mean - recursion| for t <= {check_until}",
            max_early_deviation,
            0.0,
            2.0,
        )
        report.add(
            f"tau={tau}: max |mean signed deviation| over {horizon} steps",
            max_signed_deviation,
            0.0,
            2.0,
        )
        report.tables[f"deviation_tau{tau}"] = deviation_rows
    return report


# ---------------------------------------------------------------------------
# Plasticity window
# ---------------------------------------------------------------------------


def stdp_window_experiment(
    rule_text: str = "2^-2*x1*y0 - 2^-2*x0*y1",
    tau: int = 8,
    impulse: int = 120,
    trials: int = 400,
    seed: int = 0,
) -> ValidationReport:
    """Sign and decay of the learning window over pre/post spike lags.

    For each lag an isolated pre/post pair is played into fresh traces and
    the rule is evaluated every step; positive lags (pre before post) must
    produce dw > 0, negative lags dw < 0, and the mean magnitude must not
    grow with the lag (stochastic ties allowed within a small slack).
    """
    rule = parse_rule(rule_text)
    params = TraceParams(impulse=impulse, tau=tau)
    lags = [dt for dt in range(-2 * tau, 2 * tau + 1) if dt != 0]

    means = {}
    for lag in lags:
        total = 0.0
        for trial in range(trials):
            pre_step = 1 if lag > 0 else 1 - lag
            post_step = pre_step + lag
            rng_x = RandomStream(derive_seed(seed, "stdp", lag, trial, "x1"))
            rng_y = RandomStream(derive_seed(seed, "stdp", lag, trial, "y1"))
            x1 = y1 = 0
            for t in range(max(pre_step, post_step) + 1):
                x0 = 1 if t == pre_step else 0
                y0 = 1 if t == post_step else 0
                x1 = decay_and_impulse(x1, params, bool(x0), rng_x)
                y1 = decay_and_impulse(y1, params, bool(y0), rng_y)
                env = {
                    "x0": x0, "y0": y0,
                    "x1": x1, "x2": 0, "y1": y1, "y2": 0, "y3": 0,
                    "w": 0, "t": t,
                }
                total += eval_rule(rule, env)
        means[lag] = total / trials

    report = ValidationReport(experiment="stdp-window", seed=seed, samples=trials)
    report.tables["window"] = sorted(means.items())

    worst_positive = min(means[lag] for lag in lags if lag > 0)
    worst_negative = max(means[lag] for lag in lags if lag < 0)
    report.add(
        "min mean dw over pre-before-post lags",
        worst_positive,
        1.0,
        0.0,
        passed=worst_positive > 0.0,
        detail="requires dw > 0",
    )
    report.add(
        "max mean dw over post-before-pre lags",
        worst_negative,
        -1.0,
        0.0,
        passed=worst_negative < 0.0,
        detail="requires dw < 0",
    )

    slack = 0.2
    monotone = True
    for side in (1, -1):
        ordered = [means[side * k] for k in range(1, 2 * tau + 1)]
        magnitudes = [abs(m) for m in ordered]
        for a, b in zip(magnitudes, magnitudes[1:]):
            if b > a + slack:
                monotone = False
    report.add(
        "window magnitude nonincreasing in |lag|",
        1.0 if monotone else 0.0,
        1.0,
        0.0,
        passed=monotone,
        detail=f"slack {slack}",
    )
    return report


# ---------------------------------------------------------------------------
# Engine vs scalar reference
# ---------------------------------------------------------------------------


def _rand_int(rng: RandomStream, lo: int, hi: int) -> int:
    return lo + int(rng.uniform() * (hi - lo + 1))


def random_unit_definition(seed: int, index: int):
    """One random single-unit network and the matching reference inputs.

    Parameter ranges are chosen to exercise decay, spiking, refractoriness,
    inhibition and all sign modes while keeping |I| and |v| inside the
    float-exact range of the scalar reference (see module notes).
    """
    rng = RandomStream(derive_seed(seed, "oracle-instance", index))
    params = CompartmentParams(
        delta_i=_rand_int(rng, 64, 4096),
        delta_v=_rand_int(rng, 0, 4096),
        v_mantissa=_rand_int(rng, 10, 5000),
        bias=_rand_int(rng, -200, 200),
        refractory=_rand_int(rng, 0, 5),
    )
    sign_modes = (SignMode.EXCITATORY, SignMode.INHIBITORY, SignMode.MIXED)
    generators = []
    synapses = []
    weights = []
    for k in range(2):
        sign_mode = sign_modes[_rand_int(rng, 0, 2)]
        n_wb = _rand_int(rng, 1, 8)
        low, high = sign_mode.mantissa_range
        mantissa = _rand_int(rng, low, high)
        exponent = _rand_int(rng, -4, 2)
        rate = 0.02 + rng.uniform() * 0.23
        generators.append(GeneratorGroupDef(f"gen{k}", 1, rate=rate))
        synapses.append(
            SynapseGroupDef(
                f"syn{k}",
                source=f"gen{k}",
                target="unit",
                sign_mode=sign_mode,
                n_wb=n_wb,
                connections=(Connection(0, 0, mantissa, exponent, 0),),
            )
        )
        aligned = truncate_mantissa(mantissa, precision_exponent(n_wb, sign_mode))
        weights.append(encode_weight(aligned, exponent, WeightConfig(sign_mode, n_wb)))

    definition = NetworkDef(
        groups=(NeuronGroupDef("unit", 1, params),),
        generators=tuple(generators),
        synapses=tuple(synapses),
        monitors=(
            MonitorDef("I", "unit", "I"),
            MonitorDef("v", "unit", "v"),
            MonitorDef("spikes", "unit", "spikes"),
            MonitorDef("gen0_spikes", "gen0", "spikes"),
            MonitorDef("gen1_spikes", "gen1", "spikes"),
        ),
        seed=derive_seed(seed, "oracle-net", index),
    )
    return definition, params, weights


def oracle_equivalence_experiment(
    instances: int = 100,
    steps: int = 100_000,
    seed: int = 0,
    backend: str | None = None,
) -> ValidationReport:
    """Bit-exact comparison of the engine against the scalar reference.

    Runs random single-unit networks driven by Bernoulli generators, replays
    the recorded generator spikes through the scalar reference, and counts
    mismatching entries across the I, v and spike series. Must be zero.
    """
    report = ValidationReport(
        experiment="engine vs scalar reference", seed=seed, samples=instances * steps
    )
    mismatches = 0
    for index in range(instances):
        definition, params, weights = random_unit_definition(seed, index)
        sim = build(definition)
        monitors = sim.run(steps, backend=backend)

        weighted = np.zeros(steps, dtype=np.int64)
        for k, J in enumerate(weights):
            events = monitors[f"gen{k}_spikes"].events()
            weighted[events[:, 0]] += J

        ref_i, ref_v, ref_s = scalar_algorithm1(
            params.delta_i,
            params.delta_v,
            params.v_mantissa,
            params.bias,
            params.refractory,
            weighted.tolist(),
            steps,
        )
        engine_i = monitors["I"].series()[1][:, 0]
        engine_v = monitors["v"].series()[1][:, 0]
        engine_s = np.zeros(steps, dtype=bool)
        engine_s[monitors["spikes"].events()[:, 0]] = True

        mismatches += int((engine_i != np.asarray(ref_i)).sum())
        mismatches += int((engine_v != np.asarray(ref_v)).sum())
        mismatches += int((engine_s != np.asarray(ref_s)).sum())

    report.add("mismatching samples", float(mismatches), 0.0, 0.0)
    return report


def float_sanity_experiment(seed: int = 0) -> ValidationReport:
    """Integer decay against the continuous exponential, large-weight regime.

    With a large single-spike amplitude the integer quantization is
    relatively small and forward-Euler-with-rounding should track the
    closed-form exponential to 5% for 1 <= t <= 1.5*tau. Beyond that horizon
    the Euler discretization itself drifts past 5%, so the comparison stops
    there.
    """
    report = ValidationReport(experiment="float-sanity", seed=seed, samples=0)
    J = 1 << 20
    for tau in (16, 32, 64):
        delta = 4096 // tau
        steps = int(1.5 * tau) + 1
        weighted = [J] + [0] * (steps - 1)
        series_i, _, _ = scalar_algorithm1(delta, 0, 131071, 0, 0, weighted, steps)
        worst = 0.0
        for t in range(1, steps):
            expected = closed_form_current([0], float(J), float(tau), float(t))
            worst = max(worst, abs(series_i[t] - expected) / expected)
        report.add(f"tau={tau}: max relative deviation over 1 <= t <= 1.5*tau", worst, 0.0, 0.05)
    return report


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def run_suite(name: str, seed: int = 0, fast: bool = False):
    """Run one named validation suite; returns the list of reports."""
    if name == "weights":
        reports = []
        for sign_mode in (SignMode.EXCITATORY, SignMode.MIXED):
            for n_wb in range(1, 9):
                reports.append(weight_interval_experiment(n_wb, sign_mode, seed=seed))
        return reports
    if name == "traces":
        return [trace_experiment(seed=seed, horizon=1000 if fast else 10_000)]
    if name == "stdp":
        return [stdp_window_experiment(seed=seed, trials=100 if fast else 400)]
    if name == "oracle":
        instances, steps = (10, 10_000) if fast else (100, 100_000)
        return [
            oracle_equivalence_experiment(instances=instances, steps=steps, seed=seed),
            float_sanity_experiment(seed=seed),
        ]
    if name == "all":
        reports = []
        for suite in ("weights", "traces", "stdp", "oracle"):
            reports.extend(run_suite(suite, seed=seed, fast=fast))
        return reports
    raise ValueError(f"unknown suite '{name}' (weights, traces, stdp, oracle, all)")
