"""Pipeline configuration as a flat ``key=value`` text file.

Precedence, lowest to highest: defaults, config file, ``COOCSEM_*``
environment variables, command-line overrides.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping

from .assoc import CABands
from .cooc import AssociationConfig
from .corpus import FREQUENCY_MODES, ID_MODES, TokenizerConfig
from .errors import ConfigError

ENV_PREFIX = "COOCSEM_"


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = ""
    output_dir: str = "."
    # tokenizer / index
    case_fold: bool = False
    strip_punctuation: bool = False
    id_column: str = "auto"
    frequency_mode: str = "sentence"
    # pair statistics and associates
    min_pair_freq: int = 2
    as_log_base: float = 10.0
    significance_threshold: float = 3.841
    associate_cap: int = 1000
    stoplist_size: int = 100
    stoplist_before_cap: bool = True
    ca_high: int = 60
    ca_low: int = 15
    # lexical controls
    on_case_sensitive: bool = True
    on_min_freq: int = 1
    # stimulus selection
    require_zero_prime_as: bool = True
    prime_as_tolerance: float = 0.0
    check_length: bool = False
    comma_balance: bool = False
    n_per_cell: int = 40
    max_iters: int = 20000
    restarts: int = 8
    # eye movements
    eye: str = "right"
    min_fixation_ms: float = 70.0
    cutoff_sfd: float = 800.0
    cutoff_ffd: float = 800.0
    cutoff_gd: float = 1000.0
    cutoff_tvd: float = 1500.0
    cutoff_gpd: float = 1500.0
    trim_k: float = 2.5
    # run control
    seed: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.id_column not in ID_MODES:
            raise ConfigError(f"id_column must be one of {ID_MODES}")
        if self.frequency_mode not in FREQUENCY_MODES:
            raise ConfigError(f"frequency_mode must be one of {FREQUENCY_MODES}")
        if self.significance_threshold <= 1.0 or self.as_log_base <= 1.0:
            raise ConfigError("significance_threshold and as_log_base must exceed 1")
        if self.ca_low > self.ca_high + 1:
            raise ConfigError("ca_low must not exceed ca_high")
        for name in ("min_pair_freq", "associate_cap", "n_per_cell", "threads", "restarts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.stoplist_size < 0 or self.max_iters < 0 or self.trim_k <= 0:
            raise ConfigError("stoplist_size and max_iters must be >= 0, trim_k > 0")
        if self.eye not in ("left", "right"):
            raise ConfigError("eye must be 'left' or 'right'")

    # -- derived settings -----------------------------------------------
    def tokenizer(self) -> TokenizerConfig:
        return TokenizerConfig(self.case_fold, self.strip_punctuation, self.id_column)

    def association(self) -> AssociationConfig:
        return AssociationConfig(self.significance_threshold, self.as_log_base)

    def bands(self) -> CABands:
        return CABands(self.ca_high, self.ca_low)

    def cutoffs(self) -> dict:
        return {m: getattr(self, f"cutoff_{m}") for m in ("sfd", "ffd", "gd", "tvd", "gpd")}

    # -- text form ------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return (base or cls()).with_overrides(values)

    def with_overrides(self, values: Mapping[str, str]) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _parse(key, types[key], raw)
        try:
            return replace(self, **changes)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def with_env(self, environ: Mapping[str, str] | None = None) -> "PipelineConfig":
        environ = os.environ if environ is None else environ
        names = {f.name for f in fields(self)}
        values = {k[len(ENV_PREFIX):].lower(): v for k, v in environ.items()
                  if k.startswith(ENV_PREFIX) and k[len(ENV_PREFIX):].lower() in names}
        return self.with_overrides(values)

    def as_dict(self) -> dict:
        return asdict(self)


def _parse(key: str, kind, raw: str):
    kind = kind if isinstance(kind, str) else kind.__name__
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    if "\t" in raw or "\n" in raw:
        raise ConfigError(f"{key}: value may not contain tabs or newlines")
    return raw


def load_config(path: str | None = None, overrides: Mapping[str, str] | None = None,
                environ: Mapping[str, str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = PipelineConfig.from_text(fh.read(), cfg)
    cfg = cfg.with_env(environ)
    return cfg.with_overrides(overrides or {})
