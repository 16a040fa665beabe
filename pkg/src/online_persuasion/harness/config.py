"""Experiment configuration (JSON) and its validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError
from ..regret import BANDIT, OGD
from ..type_reporting.learners import DUAL_ELLIPSOID
from .adversaries import KINDS

FTRL = "FTRL"
ENVIRONMENTS = ("synthetic", "single_receiver", "multi_receiver", "type_reporting",
                "security_game")
FEEDBACK = ("full", "partial", "type_reporting")
FEATURES = (DUAL_ELLIPSOID,)
TOLERANCE_KEYS = ("ic",)

# environment -> allowed (algorithm, feedback) pairs
_COMPATIBLE = {
    "synthetic": {(OGD, "full"), (BANDIT, "partial")},
    "single_receiver": {(OGD, "full"), (BANDIT, "partial")},
    "multi_receiver": {(OGD, "full"), (BANDIT, "partial")},
    "security_game": {(OGD, "full"), (BANDIT, "partial")},
    "type_reporting": {(OGD, "type_reporting"), (FTRL, "type_reporting")},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell.

    ``instance`` is either ``{"path": file}`` or ``{"generate": params}``
    (see :func:`generate_instance`); the synthetic and security-game
    environments read their sizes from ``params`` instead.  ``adversary``
    may fix ``kind`` (default: cycles through the battery by seed) and
    ``seed`` (default: the experiment seed).
    """

    environment: str
    algorithm: str
    feedback: str
    horizon: int
    seed: int
    output: str = "out"
    instance: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    adversary: dict = field(default_factory=dict)
    profiles: list | None = None
    features: tuple = ()
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        missing = {"environment", "algorithm", "feedback", "horizon", "seed"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        data = dict(data)
        data["features"] = tuple(data.get("features", ()))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = cls.from_dict(data)
        # relative instance paths are relative to the config file
        if "path" in cfg.instance and not Path(cfg.instance["path"]).is_absolute():
            inst = dict(cfg.instance, path=str(Path(path).parent / cfg.instance["path"]))
            cfg = replace(cfg, instance=inst)
        return cfg

    def to_dict(self):
        return {"environment": self.environment, "algorithm": self.algorithm,
                "feedback": self.feedback, "horizon": self.horizon, "seed": self.seed,
                "output": self.output, "instance": self.instance, "params": self.params,
                "adversary": self.adversary, "profiles": self.profiles,
                "features": list(self.features), "tolerances": self.tolerances}

    def with_overrides(self, seed=None, output=None, features=None, horizon=None):
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if output is not None:
            out = replace(out, output=str(output))
        if features:
            out = replace(out, features=tuple(sorted(set(out.features) | set(features))))
        if horizon is not None:
            out = replace(out, horizon=int(horizon))
        return out


def validate(cfg):
    if cfg.environment not in ENVIRONMENTS:
        raise ConfigError(f"environment must be one of {ENVIRONMENTS}")
    if cfg.feedback not in FEEDBACK:
        raise ConfigError(f"feedback must be one of {FEEDBACK}")
    if (cfg.algorithm, cfg.feedback) not in _COMPATIBLE[cfg.environment]:
        raise ConfigError(f"algorithm {cfg.algorithm!r} with {cfg.feedback!r} feedback is not "
                          f"available in the {cfg.environment!r} environment")
    if not isinstance(cfg.horizon, int) or isinstance(cfg.horizon, bool) or cfg.horizon < 1:
        raise ConfigError("horizon must be an integer >= 1")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit nonnegative integer")
    for feat in cfg.features:
        if feat not in FEATURES:
            raise ConfigError(f"unknown feature {feat!r}")
    if cfg.features and cfg.environment != "type_reporting":
        raise ConfigError("the dual-ellipsoid feature applies to type reporting only")
    for key, val in cfg.tolerances.items():
        if key not in TOLERANCE_KEYS:
            raise ConfigError(f"unknown tolerance {key!r}")
        if not isinstance(val, (int, float)) or not val > 0:
            raise ConfigError(f"tolerance {key!r} must be positive")
    kind = cfg.adversary.get("kind")
    if kind is not None and kind not in KINDS:
        raise ConfigError(f"adversary kind must be one of {KINDS}")
    if cfg.environment in ("single_receiver", "multi_receiver", "type_reporting"):
        if bool("path" in cfg.instance) == bool("generate" in cfg.instance):
            raise ConfigError("instance needs exactly one of 'path' or 'generate'")
    if cfg.environment == "multi_receiver" and cfg.profiles is not None:
        if not isinstance(cfg.profiles, list) or not cfg.profiles:
            raise ConfigError("profiles must be a nonempty list of type profiles")
