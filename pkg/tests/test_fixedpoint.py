import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loihiemu.fixedpoint import (
    DECAY_MAX,
    RandomStream,
    advance_streams,
    decay_step,
    derive_seed,
    round_away_from_zero,
    stochastic_round,
    stochastic_round_unit,
)


class TestRoundAwayFromZero:
    @pytest.mark.parametrize(
        "value,expected",
        [(0, 0), (2.3, 3), (-2.3, -3), (2.0, 2), (-2.0, -2), (0.0001, 1), (-0.0001, -1)],
    )
    def test_values(self, value, expected):
        assert round_away_from_zero(value) == expected

    @given(st.floats(min_value=-1e12, max_value=1e12, allow_nan=False))
    def test_odd_function(self, x):
        assert round_away_from_zero(-x) == -round_away_from_zero(x)

    @given(st.floats(min_value=-1e12, max_value=1e12, allow_nan=False))
    def test_smallest_integer_of_larger_magnitude(self, x):
        mag = abs(round_away_from_zero(x))
        assert mag >= abs(x)
        assert mag == 0 or mag - 1 < abs(x)


class TestDecayStep:
    @pytest.mark.parametrize(
        "state,delta,expected",
        [
            (100, 0, 100),
            (100, 4096, 0),
            (100, 2048, 50),
            (-5, 410, -4),
            (0, 1234, 0),
        ],
    )
    def test_values(self, state, delta, expected):
        assert decay_step(state, delta) == expected

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            decay_step(10, -1)
        with pytest.raises(ValueError):
            decay_step(10, DECAY_MAX + 1)

    @given(
        st.integers(min_value=-(2**60), max_value=2**60),
        st.integers(min_value=0, max_value=DECAY_MAX),
    )
    def test_contracts_toward_zero(self, state, delta):
        out = decay_step(state, delta)
        assert abs(out) <= abs(state)
        assert out * state >= 0  # sign preserved or zero
        assert decay_step(0, delta) == 0

    @given(st.integers(min_value=-(2**60), max_value=2**60))
    def test_full_decay_zeroes(self, state):
        assert decay_step(state, DECAY_MAX) == 0


class TestStochasticRound:
    def test_on_grid_is_deterministic(self):
        rng = RandomStream(1)
        assert all(stochastic_round(8, 1, rng) == 8 for _ in range(100))
        assert all(stochastic_round(-12, 4, rng) == -12 for _ in range(100))

    def test_two_outcomes_and_probability(self):
        rng = RandomStream(2)
        outcomes = [stochastic_round(101, 2, rng) for _ in range(20000)]
        assert set(outcomes) == {100, 102}
        up = sum(1 for o in outcomes if o == 102) / len(outcomes)
        assert abs(up - 0.5) < 0.02

    def test_negative_rounds_toward_signed_grid(self):
        rng = RandomStream(3)
        outcomes = [stochastic_round(-3, 4, rng) for _ in range(20000)]
        assert set(outcomes) == {0, -4}
        down = sum(1 for o in outcomes if o == -4) / len(outcomes)
        assert abs(down - 0.75) < 0.02

    def test_rejects_non_power_of_two_step(self):
        with pytest.raises(ValueError):
            stochastic_round(1.5, 3, RandomStream(0))

    @given(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        st.sampled_from([1, 2, 4, 8, 16, 32]),
        st.integers(min_value=0, max_value=2**32),
    )
    @settings(max_examples=200)
    def test_always_on_grid(self, x, step, seed):
        out = stochastic_round(x, step, RandomStream(seed))
        assert out % step == 0
        assert abs(out - x) < step + 1e-9

    def test_unbiased(self):
        rng = RandomStream(4)
        n = 100_000
        for x, step in ((101.0, 2), (5.3, 8), (-77.25, 4)):
            mean = sum(stochastic_round(x, step, rng) for _ in range(n)) / n
            assert abs(mean - x) <= 4 * step / n**0.5


class TestStochasticRoundUnit:
    def test_integer_is_deterministic(self):
        rng = RandomStream(5)
        assert all(stochastic_round_unit(5.0, rng) == 5 for _ in range(50))

    def test_half_splits_evenly(self):
        rng = RandomStream(6)
        outcomes = [stochastic_round_unit(0.5, rng) for _ in range(20000)]
        assert set(outcomes) == {0, 1}
        assert abs(sum(outcomes) / len(outcomes) - 0.5) < 0.02

    def test_mostly_rounds_up_near_top(self):
        rng = RandomStream(7)
        up = sum(stochastic_round_unit(104.99, rng) == 105 for _ in range(20000))
        assert abs(up / 20000 - 0.99) < 0.01

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            stochastic_round_unit(-0.1, RandomStream(0))


class TestRandomStream:
    def test_same_seed_same_sequence(self):
        a, b = RandomStream(1234), RandomStream(1234)
        assert [a.next_u64() for _ in range(1000)] == [b.next_u64() for _ in range(1000)]

    def test_million_draws_reproducible(self):
        a = RandomStream(derive_seed(99, "gen", 0))
        b = RandomStream(derive_seed(99, "gen", 0))
        assert all(a.uniform() == b.uniform() for _ in range(1_000_000))

    def test_vectorized_matches_scalar_streams(self):
        seeds = [derive_seed(5, "gen", g) for g in range(8)]
        states = np.array(seeds, dtype=np.uint64)
        scalars = [RandomStream(s) for s in seeds]
        for _ in range(10_000):
            block = advance_streams(states)
            expected = [s.uniform() for s in scalars]
            assert block.tolist() == expected

    def test_uniform_range(self):
        rng = RandomStream(42)
        values = [rng.uniform() for _ in range(10000)]
        assert all(0.0 <= v < 1.0 for v in values)
        assert abs(sum(values) / len(values) - 0.5) < 0.02

    def test_derive_seed_separates_streams(self):
        seeds = {
            derive_seed(7, "gen", 0),
            derive_seed(7, "gen", 1),
            derive_seed(7, "trace", 0),
            derive_seed(7, "trace", 0, "x1"),
            derive_seed(8, "gen", 0),
        }
        assert len(seeds) == 5
