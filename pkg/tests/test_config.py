import json

import pytest

from spargen.config import build_config, load_config
from spargen.errors import ConfigError
from spargen.keyframes import SubsampleConfig


def test_defaults():
    cfg = build_config(env={})
    assert cfg.subsample == SubsampleConfig(0.5, 15.0)
    assert cfg.visibility.tau_v == 0.3 and cfg.workers == 1


def test_profiles():
    assert build_config({"profile": "scannetpp"}, env={}).subsample == SubsampleConfig(0.5, 45.0)
    assert build_config({"profile": "structured3d"}, env={}).subsample is None
    with pytest.raises(ConfigError):
        build_config({"profile": "arkit"}, env={})


@pytest.mark.parametrize("raw", [
    {"colour": 1},
    {"visibility": {"tau": 0.3}},
    {"tasks": {"Depth-OC": {"max": 3}}},
    {"tasks": {"Depth-OC": {"qa_types": ["essay"]}}},
    {"tasks": {"NoSuchTask": 3}},
    {"workers": 0},
    {"up_axis": [0, 0, 0]},
    {"pose_convention": "sideways"},
])
def test_bad_configs_raise(raw):
    with pytest.raises(ConfigError):
        build_config(raw, env={})


def test_precedence_file_env_flag(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 1\nworkers: 2\nmax_per_scene: 5\n")
    cfg = load_config(p, env={})
    assert (cfg.seed, cfg.workers) == (1, 2)
    assert {t.max_per_scene for t in cfg.tasks.values()} == {5}
    cfg = load_config(p, env={"SPARGEN_SEED": "9"})
    assert cfg.seed == 9
    cfg = load_config(p, env={"SPARGEN_SEED": "9"}, seed=3)
    assert cfg.seed == 3
    with pytest.raises(ConfigError):
        load_config(p, env={"SPARGEN_SEED": "nine"})


def test_json_and_missing_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tasks": {"PosMatch": {"max_per_scene": 4, "qa_types": ["select"]}}}))
    cfg = load_config(p, env={})
    assert cfg.tasks["PosMatch"].max_per_scene == 4 and cfg.tasks["PosMatch"].qa_types == ("select",)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml", env={})
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml", env={})


def test_hash_ignores_workers():
    a = build_config({"workers": 1}, env={})
    b = build_config({"workers": 8}, env={})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != build_config({"seed": 1}, env={}).config_hash()
