import json

import pytest

from skewlab.config import (
    apply_overrides,
    build_system,
    config_hash,
    default_config,
    dump_config,
    parse_config,
)
from skewlab.errors import ConfigError


def test_round_trip_identity():
    cfg = apply_overrides(default_config(), ["system.eps=0.25", "ladder.sigma=[[61.0]]"])
    once = parse_config(dump_config(cfg))
    assert once == cfg
    assert dump_config(parse_config(dump_config(once))) == dump_config(once)
    assert config_hash(once) == config_hash(cfg)


def test_empty_config_is_defaults():
    assert parse_config("") == default_config()


def test_override_values_parse_as_json_or_string():
    cfg = apply_overrides(default_config(), ["output_dir=runs/x", "ladder.M=100", "sampler.chains=null"])
    assert cfg["output_dir"] == "runs/x" and cfg["ladder"]["M"] == 100 and cfg["sampler"]["chains"] is None


@pytest.mark.parametrize(
    "assignment",
    ["system.f.name=nope", "system.fast_flow.name=rossler", "system.f0.name=x", "nokey=1", "system.eps=2",
     "estimate.sigma.M=10", "ladder.eps_ladder=[0.1,0.2]", "estimate.ldp.n_windows=50", "root_seed=-1", "badform"],
)
def test_rejects_bad_values(assignment):
    with pytest.raises(ConfigError):
        apply_overrides(default_config(), [assignment])


def test_rejects_unknown_keys_and_versions():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"system": {"colour": 1}}))
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"schema_version": 2}))
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_registry_builds_each_component():
    for ff in ("lorenz", "linear_decay"):
        for f0 in ("lorenz_projection", "zero", "coordinates"):
            for f in ("benchmark", "zero", "tanh_decay"):
                cfg = apply_overrides(default_config(), [f"system.fast_flow.name={ff}", f"system.f0.name={f0}", f"system.f.name={f}"])
                s = build_system(cfg)
                assert s.d == 1 and s.ell == 3
