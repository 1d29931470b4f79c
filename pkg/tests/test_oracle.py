import math

import pytest

from loihiemu.fixedpoint import RandomStream
from loihiemu.neuron import CompartmentParams, CompartmentState, step_compartment
from loihiemu.oracle import (
    ValidationReport,
    closed_form_current,
    float_sanity_experiment,
    oracle_equivalence_experiment,
    run_suite,
    scalar_algorithm1,
    stdp_window_experiment,
    trace_experiment,
    weight_interval_experiment,
)
from loihiemu.weights import SignMode


class TestScalarReference:
    def test_zero_input_stays_zero(self):
        I, v, s = scalar_algorithm1(1000, 1000, 100, 0, 0, [0] * 50, 50)
        assert not any(I) and not any(v) and not any(s)

    def test_single_spike_decay(self):
        I, _, _ = scalar_algorithm1(2048, 4096, 131071, 0, 0, [64, 0, 0], 3)
        assert I == [64, 32, 16]

    def test_matches_scalar_compartment_step(self):
        # dual route: the engine-facing step function and the float-ceil
        # reference must agree state by state on randomized inputs
        rng = RandomStream(88)
        params = CompartmentParams(
            delta_i=700, delta_v=300, v_mantissa=60, bias=-3, refractory=3
        )
        inputs = [int(rng.uniform() * 2000) - 700 for _ in range(100_000)]
        ref_i, ref_v, ref_s = scalar_algorithm1(700, 300, 60, -3, 3, inputs, len(inputs))
        state = CompartmentState()
        for t, weighted in enumerate(inputs):
            state, spiked = step_compartment(state, params, weighted)
            assert (state.I, state.v, spiked) == (ref_i[t], ref_v[t], ref_s[t]), t

    def test_guard_on_float_exact_range(self):
        with pytest.raises(RuntimeError):
            scalar_algorithm1(0, 0, 131071, 0, 0, [1 << 41, 0], 2)


class TestClosedForm:
    def test_no_spikes_is_zero(self):
        assert closed_form_current([], 100.0, 8.0, 5.0) == 0.0

    def test_amplitude_at_spike_time(self):
        assert closed_form_current([0], 123.0, 8.0, 0.0) == 123.0

    def test_one_tau_decay(self):
        value = closed_form_current([0], 100.0, 16.0, 16.0)
        assert value == pytest.approx(100.0 / math.e)

    def test_causality(self):
        assert closed_form_current([10], 50.0, 4.0, 9.0) == 0.0

    def test_superposition(self):
        single = closed_form_current([0], 10.0, 4.0, 6.0)
        assert closed_form_current([0, 6], 10.0, 4.0, 6.0) == pytest.approx(single + 10.0)


class TestExperiments:
    def test_weight_interval_precision_one_is_every_step(self):
        report = weight_interval_experiment(8, SignMode.EXCITATORY, samples=500, seed=0)
        assert report.passed
        assert report.metrics[0].observed == 1.0

    def test_weight_interval_mixed_mode_precision_two(self):
        report = weight_interval_experiment(8, SignMode.MIXED, samples=4000, seed=0)
        assert report.passed
        assert abs(report.metrics[0].observed - 2.0) < 0.06

    def test_trace_experiment_small(self):
        report = trace_experiment(taus=(4, 8), trials=100, horizon=400, seed=0)
        assert report.passed
        table = dict((t, d) for t, d in report.tables["deviation_tau4"])
        assert table[0] == 0.0

    def test_stdp_window_small(self):
        report = stdp_window_experiment(trials=60, seed=0)
        assert report.passed
        window = dict(report.tables["window"])
        assert window[1] > 0 > window[-1]

    def test_equivalence_small(self):
        report = oracle_equivalence_experiment(instances=3, steps=5000, seed=1)
        assert report.passed and report.metrics[0].observed == 0

    def test_float_sanity(self):
        report = float_sanity_experiment()
        assert report.passed

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("nope")

    def test_report_failure_detection(self):
        report = ValidationReport(experiment="x", seed=0, samples=1)
        report.add("ok", 1.0, 1.0, 0.1)
        assert report.passed
        report.add("bad", 2.0, 1.0, 0.1)
        assert not report.passed
        assert any("FAIL" in line for line in report.lines())
