"""Run configuration: flat ``key = value`` files, presets and validation."""

from dataclasses import dataclass, field, fields
import inspect
import math
import os

from .systems import SYSTEMS, ResonanceSpec, build_system

__all__ = ["ConfigError", "RunConfig", "PRESETS", "parse_config_text", "load_config",
           "resolve_config", "OUTPUT_ENV"]

OUTPUT_ENV = "MELNIKOV_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "melnikov-output"


class ConfigError(ValueError):
    """Invalid configuration (usage error)."""


@dataclass
class RunConfig:
    system: str = "linear_oscillator"
    preset: str = None
    overrides: dict = field(default_factory=dict)
    epsilon: list = field(default_factory=lambda: [0.0])
    resonance: tuple = None
    seed: list = None
    x0: list = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    quad_tol: float = 1e-11
    newton_tol: float = 1e-9
    zero_tol: float = 1e-6
    degeneracy_tol: float = 1e-8
    seed_bound: float = 10.0
    output_dir: str = None
    cycles: int = 10
    samples_per_cycle: int = 64
    t_final: float = None
    workers: int = None
    grid_seed: int = 0

    def build_model(self):
        try:
            return build_system(self.system, **self.overrides)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    def resonance_spec(self):
        return ResonanceSpec(*self.resonance) if self.resonance else ResonanceSpec(1, 1)

    def to_dict(self):
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        d["overrides"] = dict(sorted(self.overrides.items()))
        return d


_SQRT2 = math.sqrt(2.0)

PRESETS = {
    "paper-5.1": {
        "system": "generalized_euler",
        "overrides": {
            "a": [1.0, -2.0, 1.0],
            "alpha1": -3.0 / (2.0 * _SQRT2),
            "beta1": 2.89972,
            "alpha2": 0.0,
            "beta2": 1.5,
            "amp": -3.0 / _SQRT2,
            "b": 0.0,
            "c": -0.75,
            "omegas": [1.0, 2.0, 3.0],
            "k_pert": 0.5,
        },
        "resonance": (1, 1),
        "seed": [0.1, 2.0, 1.0],
        "epsilon": [0.001],
        "cycles": 11,
    },
    "paper-5.2": {
        "system": "coupled_oscillator",
        "overrides": {
            "omega": 1.0,
            "a": 601.0 / (6.0 * math.sqrt(5.0)),
            "b": 0.0,
            "c": -1.0 / 1080.0,
            "d": 1.0 / 2280.0,
        },
        "resonance": (1, 1),
        "seed": [math.pi, 5.0, 2.0, 1.0],
        "epsilon": [-0.1],
        "cycles": 72,
    },
}

_FLOAT_KEYS = {"rel_tol", "abs_tol", "quad_tol", "newton_tol", "zero_tol",
               "degeneracy_tol", "seed_bound", "t_final"}
_INT_KEYS = {"cycles", "samples_per_cycle", "workers", "grid_seed"}
_LIST_KEYS = {"epsilon", "seed", "x0"}
_STR_KEYS = {"system", "preset", "output_dir"}
KEYS = _FLOAT_KEYS | _INT_KEYS | _LIST_KEYS | _STR_KEYS | {"resonance"}


def _float_list(key, text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from None


def _param_value(text):
    text = str(text).strip()
    if "," in text:
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse list value {text!r}") from None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` comments) into a raw dict."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _apply(cfg, key, value):
    if key.startswith("param."):
        name = key[len("param."):]
        if not name:
            raise ConfigError("empty parameter name")
        cfg.overrides[name] = _param_value(value) if isinstance(value, str) else value
        return
    if key not in KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if value is None:
        return
    try:
        if key in _FLOAT_KEYS:
            setattr(cfg, key, float(value))
        elif key in _INT_KEYS:
            setattr(cfg, key, int(value))
        elif key in _LIST_KEYS:
            setattr(cfg, key, value if isinstance(value, list) else _float_list(key, value))
        elif key == "resonance":
            vals = value if isinstance(value, (list, tuple)) else str(value).split(",")
            if len(vals) != 2:
                raise ConfigError("resonance: expected 'm,n'")
            setattr(cfg, key, (int(vals[0]), int(vals[1])))
        else:
            setattr(cfg, key, str(value))
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from None


def _check_params(cfg):
    cls = SYSTEMS[cfg.system]
    allowed = set(inspect.signature(cls.__init__).parameters) - {"self"}
    unknown = sorted(set(cfg.overrides) - allowed)
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {cfg.system}: {', '.join(unknown)}; "
                          f"allowed: {', '.join(sorted(allowed))}")


def resolve_config(file_values=None, cli_values=None, env=None):
    """Combine preset, config file and command-line values (in that order).

    ``file_values`` and ``cli_values`` map keys to raw values; ``None``
    values on the command line mean "not given".
    """
    file_values = dict(file_values or {})
    cli_values = {k: v for k, v in (cli_values or {}).items() if v is not None}
    env = os.environ if env is None else env

    preset = cli_values.get("preset", file_values.get("preset"))
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        p = PRESETS[preset]
        cfg.preset = preset
        cfg.system = p["system"]
        cfg.overrides = dict(p["overrides"])
        cfg.resonance = p["resonance"]
        cfg.seed = list(p["seed"])
        cfg.epsilon = list(p["epsilon"])
        cfg.cycles = p["cycles"]

    for source in (file_values, cli_values):
        if "system" in source and preset is not None and source["system"] != cfg.system:
            raise ConfigError(f"preset {preset!r} is for system {cfg.system!r}, "
                              f"not {source['system']!r}")
        for key, value in source.items():
            _apply(cfg, key, value)

    if cfg.system not in SYSTEMS:
        raise ConfigError(f"unknown system {cfg.system!r}; choose from {sorted(SYSTEMS)}")
    _check_params(cfg)
    if not cfg.epsilon:
        raise ConfigError("epsilon: at least one value is required")
    for e in cfg.epsilon:
        if not math.isfinite(e) or abs(e) >= 1.0:
            raise ConfigError(
                f"epsilon={e!r} rejected: the analysis is first order in a small "
                "perturbation parameter, use |epsilon| < 1 (typically 1e-3 to 1e-1)")
    if cfg.cycles < 1:
        raise ConfigError("cycles must be at least 1")
    if cfg.samples_per_cycle < 1:
        raise ConfigError("samples_per_cycle must be at least 1")
    for key in ("rel_tol", "abs_tol"):
        v = getattr(cfg, key)
        if not (0.0 < v <= 1e-2):
            raise ConfigError(f"{key} must lie in (0, 1e-2]")
    if cfg.resonance is not None:
        try:
            ResonanceSpec(*cfg.resonance)
        except ValueError as err:
            raise ConfigError(str(err)) from None
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers must be positive")
    if cfg.output_dir is None:
        cfg.output_dir = env.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR
    model = cfg.build_model()
    if cfg.seed is not None and len(cfg.seed) != model.N:
        raise ConfigError(f"seed must have {model.N} entries (theta0 then {model.N - 1} levels)")
    if cfg.x0 is not None and len(cfg.x0) != model.N:
        raise ConfigError(f"x0 must have {model.N} entries")
    return cfg
