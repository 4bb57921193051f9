import dataclasses
import json

import pytest

from laborsim.config import (
    CoarseDynamics,
    config_from_json_dict,
    default_config,
    load_config,
    save_config,
)
from laborsim.errors import ConfigError


class TestValidation:
    def test_mode_required(self):
        with pytest.raises(ConfigError, match="mode"):
            config_from_json_dict({"mode": "weird", "horizon": 12, "seed": 1})

    def test_missing_dynamics_block(self):
        with pytest.raises(ConfigError, match="coarse"):
            config_from_json_dict({"mode": "coarse", "horizon": 12, "seed": 1})

    def test_horizon_positive(self):
        with pytest.raises(ConfigError, match="horizon"):
            default_config("coarse", seed=1, horizon=0)

    def test_rows_must_be_stochastic(self):
        bad = dataclasses.asdict(CoarseDynamics())
        bad["fhr_initial"] = [0.5, 0.5, 0.5, 0.5]
        with pytest.raises(ConfigError, match="sum to 1"):
            config_from_json_dict({"mode": "coarse", "horizon": 12, "seed": 1, "coarse": _untuple(bad)})

    def test_probability_bounds(self):
        bad = dataclasses.asdict(CoarseDynamics())
        bad["sbp_to_high"] = 1.4
        with pytest.raises(ConfigError, match="sbp_to_high"):
            config_from_json_dict({"mode": "coarse", "horizon": 12, "seed": 1, "coarse": _untuple(bad)})


def _untuple(obj):
    if isinstance(obj, dict):
        return {k: _untuple(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return [_untuple(v) for v in obj]
    return obj


class TestJsonRoundTrip:
    def test_round_trip_both_modes(self, tmp_path):
        for mode in ("coarse", "continuous"):
            cfg = default_config(mode, seed=77)
            path = tmp_path / f"{mode}.json"
            save_config(cfg, str(path))
            assert load_config(str(path)) == cfg

    def test_unknown_top_level_key_rejected(self):
        doc = default_config("coarse", seed=1).to_json_dict()
        doc["bogus"] = 1
        with pytest.raises(ConfigError, match="bogus"):
            config_from_json_dict(doc)

    def test_unknown_nested_key_rejected(self):
        doc = default_config("coarse", seed=1).to_json_dict()
        doc["coarse"]["hazard"]["typo"] = 0.3
        with pytest.raises(ConfigError, match="typo"):
            config_from_json_dict(doc)

    def test_bad_json_file(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(p))

    def test_json_is_plain_data(self):
        text = default_config("continuous", seed=3).to_json()
        assert json.loads(text)["mode"] == "continuous"
