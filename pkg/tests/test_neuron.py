import pytest

from loihiemu.fixedpoint import StateOverflowError
from loihiemu.neuron import BIAS_LIMIT, CompartmentParams, CompartmentState, step_compartment


def run_unit(params, inputs):
    state = CompartmentState()
    series = []
    for weighted in inputs:
        state, spiked = step_compartment(state, params, weighted)
        series.append((state.I, state.v, spiked))
    return series


class TestParams:
    def test_threshold_is_mantissa_times_64(self):
        params = CompartmentParams(delta_i=0, delta_v=0, v_mantissa=100)
        assert params.v_threshold == 6400

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(delta_i=-1, delta_v=0, v_mantissa=1),
            dict(delta_i=0, delta_v=4097, v_mantissa=1),
            dict(delta_i=0, delta_v=0, v_mantissa=131072),
            dict(delta_i=0, delta_v=0, v_mantissa=1, refractory=-1),
            dict(delta_i=0, delta_v=0, v_mantissa=1, bias=BIAS_LIMIT + 1),
        ],
    )
    def test_rejects_bad_ranges(self, kwargs):
        with pytest.raises(ValueError):
            CompartmentParams(**kwargs)


class TestDynamics:
    def test_input_decay_series(self):
        params = CompartmentParams(delta_i=2048, delta_v=4096, v_mantissa=131071)
        series = run_unit(params, [64, 0, 0])
        assert [I for I, _, _ in series] == [64, 32, 16]

    def test_perfect_integrator(self):
        # no voltage decay, instant input decay: v accumulates 10 per step
        params = CompartmentParams(delta_i=4096, delta_v=0, v_mantissa=131071)
        series = run_unit(params, [10] * 8)
        assert [v for _, v, _ in series] == [10 * k for k in range(1, 9)]

    def test_threshold_is_strict(self):
        params = CompartmentParams(delta_i=4096, delta_v=4096, v_mantissa=10)
        state, spiked = step_compartment(CompartmentState(), params, 640)
        assert not spiked and state.v == 640  # v == v_th exactly
        state, spiked = step_compartment(CompartmentState(), params, 641)
        assert spiked and state.v == 0

    def test_bias_enters_voltage_every_step(self):
        params = CompartmentParams(delta_i=4096, delta_v=0, v_mantissa=131071, bias=7)
        series = run_unit(params, [0, 0, 0])
        assert [v for _, v, _ in series] == [7, 14, 21]

    def test_voltage_decays_toward_zero_without_input(self):
        params = CompartmentParams(delta_i=4096, delta_v=512, v_mantissa=131071)
        state = CompartmentState(I=0, v=1000, refrac_left=0)
        previous = 1000
        for _ in range(100):
            state, _ = step_compartment(state, params, 0)
            assert 0 <= state.v <= previous
            previous = state.v
        assert state.v == 0

    def test_negative_voltage_decays_without_crossing_zero(self):
        params = CompartmentParams(delta_i=4096, delta_v=512, v_mantissa=131071)
        state = CompartmentState(I=0, v=-1000, refrac_left=0)
        previous = -1000
        for _ in range(100):
            state, _ = step_compartment(state, params, 0)
            assert previous <= state.v <= 0
            previous = state.v


class TestRefractory:
    def test_voltage_clamped_for_exactly_refractory_steps(self):
        params = CompartmentParams(delta_i=4096, delta_v=0, v_mantissa=10, refractory=3)
        state = CompartmentState()
        state, spiked = step_compartment(state, params, 1000)
        assert spiked and state.v == 0 and state.refrac_left == 3
        for _ in range(3):
            state, spiked = step_compartment(state, params, 1000)
            assert not spiked and state.v == 0
        # counter exhausted: integrates again (and crosses threshold)
        state, spiked = step_compartment(state, params, 1000)
        assert spiked

    def test_input_keeps_evolving_while_refractory(self):
        params = CompartmentParams(delta_i=2048, delta_v=0, v_mantissa=10, refractory=2)
        state = CompartmentState()
        state, spiked = step_compartment(state, params, 1000)
        assert spiked
        state, _ = step_compartment(state, params, 0)
        assert state.I == 500
        state, _ = step_compartment(state, params, 64)
        assert state.I == 314  # 500 - 250 + 64

    def test_zero_refractory_allows_consecutive_spikes(self):
        params = CompartmentParams(delta_i=4096, delta_v=0, v_mantissa=10, refractory=0)
        state = CompartmentState()
        for _ in range(4):
            state, spiked = step_compartment(state, params, 1000)
            assert spiked


class TestOverflow:
    def test_input_overflow_raises(self):
        params = CompartmentParams(delta_i=0, delta_v=0, v_mantissa=131071)
        state = CompartmentState(I=(1 << 60) - 5, v=0, refrac_left=0)
        with pytest.raises(StateOverflowError):
            step_compartment(state, params, 100)

    def test_voltage_overflow_raises(self):
        params = CompartmentParams(
            delta_i=4096, delta_v=0, v_mantissa=131071, bias=BIAS_LIMIT
        )
        state = CompartmentState(I=0, v=(1 << 60) - 1, refrac_left=0)
        with pytest.raises(StateOverflowError):
            step_compartment(state, params, 0)
