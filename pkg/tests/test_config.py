import json

import pytest

from ggev.config import RunConfig, from_dict, load_config, save_config
from ggev.errors import ConfigurationError


def test_defaults():
    cfg = RunConfig().validate()
    assert (cfg.iters, cfg.groups, cfg.gamma, cfg.max_disparity) == (8, 8, 0.9, 192)
    assert cfg.thresholds == [1.0, 2.0, 3.0]


def test_round_trip(tmp_path):
    cfg = RunConfig(seed=7, iters=3, channels={2: 16, 4: 16, 8: 16, 16: 16})
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


@pytest.mark.parametrize("bad", [
    {"iters": -1}, {"k_small": 4}, {"d_max4": 0}, {"channels": {"2": 30, "4": 48, "8": 64, "16": 96}},
    {"feature_source": "gpu"}, {"gamma": 0.0}, {"unknown": 1}, {"iters": 2.5},
])
def test_rejects_invalid(bad):
    with pytest.raises(ConfigurationError):
        from_dict(bad)


def test_merged_flags_win():
    cfg = RunConfig(iters=3).merged({"iters": 5, "seed": None})
    assert cfg.iters == 5 and cfg.seed == 42


def test_invalid_json(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "c.json")
    (tmp_path / "d.json").write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "d.json")
