import os

import pytest

from loihiemu.configio import (
    ConfigError,
    StdpWindowSpec,
    config_hash,
    definition_from_config,
    load_config,
    resolve_config,
    write_monitor_csv,
    write_stdp_window_csv,
)
from loihiemu.engine import build
from loihiemu.engine.simulation import (
    DeltaMonitorResult,
    SpikeMonitorResult,
    StateMonitorResult,
)

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def load_demo(name, **overrides):
    raw = load_config(os.path.join(CONFIG_DIR, name))
    return resolve_config(raw, CONFIG_DIR, **overrides)


class TestDemoConfigs:
    @pytest.mark.parametrize(
        "name", ["single_neuron.yaml", "network500.yaml", "stdp.yaml"]
    )
    def test_demo_configs_build(self, name):
        resolved = load_demo(name)
        definition, steps, _ = definition_from_config(resolved)
        assert steps > 0
        build(definition)

    def test_network500_shape(self):
        definition, _, _ = definition_from_config(load_demo("network500.yaml"))
        assert [g.size for g in definition.groups] == [400, 100]
        assert definition.generators[0].size == 40
        total = sum(len(s.connections) for s in definition.synapses)
        assert 10_000 < total < 17_000  # ~0.05 of all pairs

    def test_random_connectivity_is_seed_deterministic(self):
        a, _, _ = definition_from_config(load_demo("network500.yaml"))
        b, _, _ = definition_from_config(load_demo("network500.yaml"))
        assert a.synapses == b.synapses
        c, _, _ = definition_from_config(load_demo("network500.yaml", seed_override=1))
        assert c.synapses != a.synapses


class TestResolveAndHash:
    def test_overrides_change_hash(self):
        base = load_demo("single_neuron.yaml")
        assert config_hash(base) == config_hash(load_demo("single_neuron.yaml"))
        assert config_hash(base) != config_hash(load_demo("single_neuron.yaml", seed_override=9))
        assert config_hash(base) != config_hash(
            load_demo("single_neuron.yaml", steps_override=7)
        )

    def test_csv_connections_inline_into_hash(self, tmp_path):
        csv_path = tmp_path / "conns.csv"
        csv_path.write_text("0,0,100,0,0\n0,1,-0,0,2\n")
        raw = {
            "seed": 3,
            "steps": 5,
            "groups": [
                {"name": "n", "size": 2, "delta_i": 0, "delta_v": 0, "threshold_mantissa": 100}
            ],
            "generators": [{"name": "g", "size": 1, "rate": 0.5}],
            "synapses": [
                {
                    "name": "s",
                    "source": "g",
                    "target": "n",
                    "sign_mode": "excitatory",
                    "connections": {"csv": "conns.csv"},
                }
            ],
        }
        resolved = resolve_config(raw, str(tmp_path))
        assert resolved["synapses"][0]["connections"] == {"list": [[0, 0, 100, 0, 0], [0, 1, 0, 0, 2]]}
        digest = config_hash(resolved)
        csv_path.write_text("0,0,99,0,0\n")
        assert config_hash(resolve_config(raw, str(tmp_path))) != digest

        definition, steps, _ = definition_from_config(resolved)
        assert len(definition.synapses[0].connections) == 2

    def test_missing_csv_is_config_error(self, tmp_path):
        raw = {
            "synapses": [
                {"name": "s", "connections": {"csv": "absent.csv"}}
            ]
        }
        with pytest.raises(ConfigError):
            resolve_config(raw, str(tmp_path))


class TestSchemaErrors:
    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing 'delta_i'"):
            definition_from_config(
                {"groups": [{"name": "n", "size": 1, "delta_v": 0, "threshold_mantissa": 1}]}
            )

    def test_bad_sign_mode(self):
        config = {
            "groups": [
                {"name": "n", "size": 1, "delta_i": 0, "delta_v": 0, "threshold_mantissa": 1}
            ],
            "synapses": [
                {
                    "name": "s",
                    "source": "n",
                    "target": "n",
                    "sign_mode": "positive",
                    "connections": {"list": []},
                }
            ],
        }
        with pytest.raises(ConfigError):
            definition_from_config(config)

    def test_bad_probability(self):
        config = {
            "groups": [
                {"name": "n", "size": 1, "delta_i": 0, "delta_v": 0, "threshold_mantissa": 1}
            ],
            "synapses": [
                {
                    "name": "s",
                    "source": "n",
                    "target": "n",
                    "sign_mode": "excitatory",
                    "connections": {"random": {"probability": 1.2, "mantissa": {"value": 1}}},
                }
            ],
        }
        with pytest.raises(ConfigError):
            definition_from_config(config)

    def test_out_of_range_compartment_param(self):
        with pytest.raises(ConfigError):
            definition_from_config(
                {
                    "groups": [
                        {
                            "name": "n",
                            "size": 1,
                            "delta_i": 9999,
                            "delta_v": 0,
                            "threshold_mantissa": 1,
                        }
                    ]
                }
            )


class TestCsvWriters:
    def test_spike_csv(self, tmp_path):
        monitor = SpikeMonitorResult("spk", "n", offset=0, size=3, ids=None)
        import numpy as np

        monitor._record(np.array([4, 4, 9]), np.array([0, 2, 1]))
        path = write_monitor_csv(monitor, str(tmp_path))
        assert open(path).read() == "step,id\n4,0\n4,2\n9,1\n"

    def test_state_csv(self, tmp_path):
        import numpy as np

        monitor = StateMonitorResult("vv", "n", "v", [3, 5])
        monitor._record(0, np.array([10, -2]))
        monitor._record(1, np.array([11, -3]))
        path = write_monitor_csv(monitor, str(tmp_path))
        assert open(path).read() == "step,id,value\n0,3,10\n0,5,-2\n1,3,11\n1,5,-3\n"

    def test_dw_csv_round_trips_floats(self, tmp_path):
        monitor = DeltaMonitorResult("dw", "p", [0])
        monitor._record(3, 0, 0.25)
        monitor._record(7, 0, -2.0)
        path = write_monitor_csv(monitor, str(tmp_path))
        lines = open(path).read().splitlines()
        assert lines[0] == "step,id,value"
        assert float(lines[1].split(",")[2]) == 0.25

    def test_stdp_window_join(self, tmp_path):
        import numpy as np

        pre = SpikeMonitorResult("pre", "g", offset=0, size=1, ids=None)
        pre._record(np.array([10, 40]), np.array([0, 0]))
        post = SpikeMonitorResult("post", "n", offset=0, size=1, ids=None)
        post._record(np.array([13, 38]), np.array([0, 0]))
        dw = DeltaMonitorResult("dw", "p", [0])
        dw._record(14, 0, 5.0)   # post(13) - pre(10) = +3
        dw._record(40, 0, -1.5)  # post(38) - pre(40) = -2
        spec = StdpWindowSpec("pre", "post", "dw", "window.csv", max_lag=16)
        path = write_stdp_window_csv(spec, {"pre": pre, "post": post, "dw": dw}, str(tmp_path))
        assert open(path).read() == "step,delta_t,dw\n14,3,5.0\n40,-2,-1.5\n"
