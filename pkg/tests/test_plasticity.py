import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loihiemu.fixedpoint import RandomStream
from loihiemu.plasticity import (
    TRACE_MAX,
    LearningRule,
    RuleSyntaxError,
    RuleTerm,
    TraceParams,
    UnsupportedSymbolError,
    decay_and_impulse,
    eval_rule,
    parse_rule,
)


class TestTraceDecay:
    def test_exact_decay_is_deterministic(self):
        params = TraceParams(impulse=0, tau=8)
        rng = RandomStream(0)
        assert all(decay_and_impulse(120, params, False, rng) == 105 for _ in range(50))

    def test_zero_is_fixed_point(self):
        for tau in (1, 2, 7, 100):
            assert decay_and_impulse(0, TraceParams(impulse=5, tau=tau), False, RandomStream(1)) == 0

    def test_impulse_saturates_at_127(self):
        params = TraceParams(impulse=120, tau=8)
        assert decay_and_impulse(120, params, True, RandomStream(2)) == 127

    def test_tau_one_clears_trace(self):
        params = TraceParams(impulse=64, tau=1)
        assert decay_and_impulse(100, params, False, RandomStream(3)) == 0
        assert decay_and_impulse(100, params, True, RandomStream(3)) == 64

    def test_expected_value_follows_recursion(self):
        params = TraceParams(impulse=0, tau=3)  # alpha = 2/3, fractional decay
        n = 40_000
        rng = RandomStream(4)
        total = sum(decay_and_impulse(100, params, False, rng) for _ in range(n))
        expected = 100 * (1 - 1 / 3)
        assert abs(total / n - expected) < 0.02 * expected

    def test_rejects_out_of_range_trace(self):
        with pytest.raises(ValueError):
            decay_and_impulse(128, TraceParams(), False, RandomStream(0))
        with pytest.raises(ValueError):
            decay_and_impulse(-1, TraceParams(), False, RandomStream(0))

    @given(
        st.integers(min_value=0, max_value=TRACE_MAX),
        st.integers(min_value=0, max_value=TRACE_MAX),
        st.integers(min_value=1, max_value=64),
        st.booleans(),
        st.integers(min_value=0, max_value=2**32),
    )
    @settings(max_examples=300)
    def test_stays_in_range(self, trace, impulse, tau, spiked, seed):
        params = TraceParams(impulse=impulse, tau=tau)
        out = decay_and_impulse(trace, params, spiked, RandomStream(seed))
        assert 0 <= out <= TRACE_MAX

    def test_converges_to_zero_without_impulses(self):
        params = TraceParams(impulse=0, tau=4)
        rng = RandomStream(5)
        trace = 127
        for _ in range(400):
            trace = decay_and_impulse(trace, params, False, rng)
        assert trace == 0


class TestParser:
    def test_pair_rule_with_scales(self):
        rule = parse_rule("2^-2*x1*y0 - 2^-2*y1*x0")
        assert rule.terms == (
            RuleTerm(sign=1, log2_scale=-2, factors=("x1", "y0")),
            RuleTerm(sign=-1, log2_scale=-2, factors=("y1", "x0")),
        )

    def test_pair_rule_without_scales(self):
        rule = parse_rule("x1*y0 - y1*x0")
        assert [t.sign for t in rule.terms] == [1, -1]
        assert [t.log2_scale for t in rule.terms] == [0, 0]

    def test_unsupported_symbol_is_named(self):
        with pytest.raises(UnsupportedSymbolError) as err:
            parse_rule("x1*z9")
        assert err.value.symbol == "z9"
        with pytest.raises(UnsupportedSymbolError):
            parse_rule("u10")

    def test_syntax_error_carries_position(self):
        with pytest.raises(RuleSyntaxError) as err:
            parse_rule("x1 * * y0")
        assert err.value.position == 5
        with pytest.raises(RuleSyntaxError):
            parse_rule("x1 +")
        with pytest.raises(RuleSyntaxError):
            parse_rule("")
        with pytest.raises(RuleSyntaxError):
            parse_rule("x1 ^ 2")

    def test_non_power_of_two_literal_rejected(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("3*x1")
        with pytest.raises(RuleSyntaxError):
            parse_rule("0*x1")

    def test_plain_power_of_two_literal_normalizes(self):
        rule = parse_rule("4*x1*y0")
        assert rule.terms[0].log2_scale == 2
        assert rule.to_text() == "2^2*x1*y0"

    def test_leading_sign_and_constant_terms(self):
        rule = parse_rule("-x0*y1 + 2^3")
        assert rule.terms[0].sign == -1
        assert rule.terms[1] == RuleTerm(sign=1, log2_scale=3, factors=())
        assert rule.to_text() == "-x0*y1 + 2^3"

    def test_u0_constant_rule(self):
        rule = parse_rule("u0")
        assert rule.terms == (RuleTerm(sign=1, log2_scale=0, factors=("u0",)),)

    @pytest.mark.parametrize(
        "text",
        ["2^-2*x1*y0 - 2^-2*y1*x0", "x1*y0 - y1*x0", "u0", "-x0*y1 + 2^3", "2^1*w*x0"],
    )
    def test_canonical_round_trip(self, text):
        rule = parse_rule(text)
        assert parse_rule(rule.to_text()) == rule

    @given(
        st.lists(
            st.tuples(
                st.sampled_from((1, -1)),
                st.integers(min_value=-6, max_value=6),
                st.lists(
                    st.sampled_from(("x0", "y0", "x1", "x2", "y1", "y2", "y3", "w", "u1")),
                    max_size=3,
                ),
            ),
            min_size=1,
            max_size=4,
        )
    )
    @settings(max_examples=200)
    def test_print_parse_identity(self, raw_terms):
        rule = LearningRule(
            terms=tuple(
                RuleTerm(sign=s, log2_scale=k, factors=tuple(f)) for s, k, f in raw_terms
            )
        )
        assert parse_rule(rule.to_text()) == rule


class TestEval:
    ENV = dict(x0=0, y0=1, x1=40, x2=3, y1=77, y2=0, y3=9, w=12, t=8)

    def test_pair_rule_substitution(self):
        rule = parse_rule("2^-2*x1*y0 - 2^-2*x0*y1")
        assert eval_rule(rule, self.ENV) == 10.0

    def test_gated_off_when_no_spikes(self):
        rule = parse_rule("2^-2*x1*y0 - 2^-2*x0*y1")
        env = dict(self.ENV, x0=0, y0=0)
        assert eval_rule(rule, env) == 0.0

    def test_epoch_gate_u1(self):
        rule = parse_rule("u1*x1*y0")
        assert eval_rule(rule, dict(self.ENV, t=7)) == 0.0
        assert eval_rule(rule, dict(self.ENV, t=8)) == 40.0

    def test_epoch_gates_powers_of_two(self):
        rule = parse_rule("u3*x1")
        values = [eval_rule(rule, dict(self.ENV, t=t)) for t in range(16)]
        assert [v != 0 for v in values] == [t % 8 == 0 for t in range(16)]

    def test_u0_always_on(self):
        rule = parse_rule("u0")
        assert all(eval_rule(rule, dict(self.ENV, t=t)) == 1.0 for t in range(7))

    def test_weight_variable(self):
        rule = parse_rule("2^1*w*x0")
        assert eval_rule(rule, dict(self.ENV, x0=1)) == 24.0

    def test_missing_env_key_raises(self):
        with pytest.raises(KeyError):
            eval_rule(parse_rule("x1*y0"), {"x1": 3, "t": 0})
