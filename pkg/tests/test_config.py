import math

import pytest

from subharmonic.config import (OUTPUT_ENV, PRESETS, ConfigError, parse_config_text,
                                resolve_config)


def test_parse_comments_and_blank_lines():
    raw = parse_config_text("# run\nsystem = generalized_euler  # inline\n\nepsilon=0.01, 0.02\n")
    assert raw == {"system": "generalized_euler", "epsilon": "0.01, 0.02"}


@pytest.mark.parametrize("text", ["system generalized_euler", "= 3", "a = 1\na = 2"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown configuration key"):
        resolve_config({"tolerance": "1e-9"}, env={})


def test_unknown_parameter_rejected():
    with pytest.raises(ConfigError, match="unknown parameter"):
        resolve_config({"system": "linear_oscillator", "param.stiffness": "2"}, env={})


@pytest.mark.parametrize("eps", ["1", "-1.0", "2.5", "nan"])
def test_large_epsilon_rejected(eps):
    with pytest.raises(ConfigError, match="epsilon"):
        resolve_config({"epsilon": eps}, env={})


def test_preset_values():
    cfg = resolve_config(cli_values={"preset": "paper-5.1"}, env={})
    assert cfg.system == "generalized_euler"
    assert cfg.overrides["beta1"] == 2.89972
    assert cfg.overrides["alpha1"] == pytest.approx(-3 / (2 * math.sqrt(2)))
    assert cfg.resonance == (1, 1) and cfg.cycles == 11 and cfg.epsilon == [0.001]
    cfg = resolve_config(cli_values={"preset": "paper-5.2"}, env={})
    assert cfg.overrides["a"] == pytest.approx(601 / (6 * math.sqrt(5)))
    assert cfg.seed == [math.pi, 5.0, 2.0, 1.0]


def test_precedence_preset_file_flags():
    cfg = resolve_config({"preset": "paper-5.1", "cycles": "20", "param.c": "-1.0"},
                         {"cycles": 30}, env={})
    assert cfg.cycles == 30
    assert cfg.overrides["c"] == -1.0
    assert cfg.overrides["beta1"] == PRESETS["paper-5.1"]["overrides"]["beta1"]


def test_preset_system_conflict():
    with pytest.raises(ConfigError, match="preset"):
        resolve_config(cli_values={"preset": "paper-5.1", "system": "coupled_oscillator"}, env={})


def test_output_dir_fallbacks():
    assert resolve_config(env={OUTPUT_ENV: "/tmp/x"}).output_dir == "/tmp/x"
    assert resolve_config(env={}).output_dir == "melnikov-output"
    assert resolve_config({"output_dir": "here"}, env={OUTPUT_ENV: "/tmp/x"}).output_dir == "here"


def test_seed_and_resonance_validation():
    with pytest.raises(ConfigError, match="seed"):
        resolve_config({"system": "generalized_euler", "seed": "0.1, 2.0"}, env={})
    with pytest.raises(ConfigError):
        resolve_config({"resonance": "0,1"}, env={})
    with pytest.raises(ConfigError):
        resolve_config({"resonance": "1,2,3"}, env={})
    cfg = resolve_config({"resonance": "4, 2"}, env={})
    assert cfg.resonance_spec().m == 2


def test_param_lists_and_types():
    cfg = resolve_config({"system": "generalized_euler", "param.omegas": "1, 2, 4",
                          "param.k_pert": "0.3"}, env={})
    assert cfg.overrides["omegas"] == [1.0, 2.0, 4.0]
    model = cfg.build_model()
    assert model.N == 3


def test_to_dict_is_plain():
    d = resolve_config(cli_values={"preset": "paper-5.2"}, env={}).to_dict()
    assert d["resonance"] == [1, 1]
    assert list(d["overrides"]) == sorted(d["overrides"])
