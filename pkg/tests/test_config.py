import json

import pytest

from eqboot.config import (ConfigError, Experiment, bundled_config_path, bundled_configs, load_config,
                           load_schema, resolve_config)


def minimal(**extra):
    cfg = {"problem": "compressed_sensing", "image_shape": [4, 4]}
    cfg.update(extra)
    return cfg


def test_schema_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="bogus"):
        resolve_config(minimal(bogus=1))
    with pytest.raises(ConfigError, match="bootstrap"):
        resolve_config(minimal(bootstrap={"n_samples": 10, "extra": 1}))


def test_schema_reports_field_path():
    with pytest.raises(ConfigError, match="field 'bootstrap.n_samples'"):
        resolve_config(minimal(bootstrap={"n_samples": 0}))
    with pytest.raises(ConfigError, match="field 'problem'"):
        resolve_config(minimal(problem="tomography"))


def test_defaults_filled():
    cfg = resolve_config(minimal())
    assert cfg["bootstrap"] == {"n_samples": 200, "error_mode": "forward"}
    assert cfg["operator"] == {"m": 5}
    assert cfg["group"] == {"max_shift": 0, "rotations": False}
    assert cfg["arms"] == [{"name": "naive", "max_shift": 0, "rotations": False}]
    assert cfg["signal"]["invariance"] == "none"
    assert cfg["master_seed"] == 0
    # resolving a resolved config is a fixed point
    assert resolve_config(cfg) == cfg


def test_default_arms_follow_group():
    cfg = resolve_config(minimal(group={"max_shift": 2}))
    assert [a["name"] for a in cfg["arms"]] == ["naive", "equivariant"]
    assert cfg["signal"]["invariance"] == "shifts"


def test_cross_field_checks():
    with pytest.raises(ConfigError, match="rotations"):
        resolve_config({"problem": "deblur", "image_shape": [8, 10], "group": {"rotations": True}})
    with pytest.raises(ConfigError, match="ascending"):
        resolve_config(minimal(levels=[0.9, 0.5]))
    with pytest.raises(ConfigError, match="odd"):
        resolve_config({"problem": "deblur", "image_shape": [8, 8], "operator": {"kernel_shape": [4, 1]}})
    with pytest.raises(ConfigError, match="not used"):
        resolve_config(minimal(operator={"p": 0.5}))
    with pytest.raises(ConfigError, match="duplicate"):
        resolve_config(minimal(arms=[{"name": "a"}, {"name": "a"}]))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="missing.json"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "problem": "deblur",\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(bad)


def test_schema_is_valid_json_schema():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(load_schema())


@pytest.mark.parametrize("name", bundled_configs())
def test_bundled_configs_build(name):
    cfg = load_config(bundled_config_path(name))
    exp = Experiment.from_config(cfg)
    assert exp.operator.image_shape == tuple(cfg["image_shape"])
    assert list(exp.arms) == [a["name"] for a in cfg["arms"]]


def test_bundled_config_set():
    assert {"deblur_fig5.json", "compressed_sensing.json", "well_specified.json",
            "inpainting.json"} <= set(bundled_configs())
    with pytest.raises(ConfigError):
        bundled_config_path("nope.json")


def test_experiment_reproducible():
    cfg = resolve_config(minimal(estimator={"kind": "learned_linear", "n_train": 30}))
    a = Experiment.from_config(cfg)
    b = Experiment.from_config(json.loads(json.dumps(cfg)))
    assert (a.operator.dense() == b.operator.dense()).all()
    assert (a.estimator.matrix_ == b.estimator.matrix_).all()
