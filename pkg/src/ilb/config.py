"""Flat ``key = value`` configuration shared by the learner and the CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    max_core_form_len: int = 2
    max_feature_len: int = 2
    max_depth: int = 4
    node_literal_cap: int = 2
    min_leaf_weight_frac: float = 0.01
    rounds: int = 20
    margin_clip: float = 4.0
    instances_per_core_form: int = 1000
    max_features: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("max_core_form_len", "max_feature_len", "max_depth", "node_literal_cap",
                     "rounds", "instances_per_core_form", "max_features"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.min_leaf_weight_frac < 1.0:
            raise ConfigError("min_leaf_weight_frac must lie in [0, 1)")
        if not self.margin_clip > 0:
            raise ConfigError("margin_clip must be positive")

    def replace(self, **changes) -> "Config":
        return Config(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


def parse_config(text: str, base: Config = Config()) -> Config:
    types = {f.name: f.type for f in fields(Config)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        conv = float if types[key] in (float, "float") else int
        try:
            values[key] = conv(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return base.replace(**values)


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
