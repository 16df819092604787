import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_ABBREVIATIONS = [
    "e.g.", "i.e.", "et al.", "Fig.", "vs.", "Dr.", "approx.", "ca.", "cf.", "Eq.", "No.",
]


class Config:
    """Process-level configuration"""

    # Work directory holding spans/, models/, aligned/ and the CSV reports
    WORKDIR: str = os.getenv("CITEDRIFT_WORKDIR", "./work")

    # Training
    DEFAULT_SEED: int = int(os.getenv("CITEDRIFT_SEED", "1"))

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", "")

    @classmethod
    def get_log_file(cls, workdir: str) -> str:
        """Log file inside the work dir unless LOG_FILE overrides it"""
        return cls.LOG_FILE or os.path.join(workdir, "logs", "pipeline.log")

    @classmethod
    def validate(cls) -> None:
        """Validate configuration"""
        errors = []

        if not cls.WORKDIR:
            errors.append("CITEDRIFT_WORKDIR must not be empty")

        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL '{cls.LOG_LEVEL}' is not a logging level")

        if errors:
            raise ConfigError("Configuration errors: " + "; ".join(errors))


class NormConfig(BaseModel):
    """Toggles for the fixed-order normalization pipeline"""

    url_replace: bool = Field(True, description="Replace http(s):// and www. runs by xurlx")
    dash_removal: bool = Field(True, description="Join hyphenated words, drop standalone dashes")
    number_replace: bool = Field(True, description="Mask standalone integers/decimals as xnumx")
    lowercase: bool = Field(True, description="Capitalization normalization")
    acronym_pass: bool = Field(
        False,
        description="Keep corpus acronyms (all-caps, length >= 2, seen >= 2x); needs a pre-scan"
    )
    phrase_merge: bool = Field(True, description="Greedy longest-match phrase merging")
    abbreviations: List[str] = Field(default_factory=lambda: list(DEFAULT_ABBREVIATIONS))
    abbreviations_path: Optional[str] = Field(None, description="One abbreviation per line")

    @model_validator(mode="after")
    def load_abbreviation_file(self):
        if self.abbreviations_path:
            path = Path(self.abbreviations_path)
            if not path.is_file():
                raise ValueError(f"abbreviation list not found: {path}")
            entries = []
            for line in path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line and not line.startswith("#"):
                    entries.append(line)
            self.abbreviations = entries
        return self


class TrainConfig(BaseModel):
    dim: int = Field(100, ge=1)
    window: int = Field(5, ge=1)
    negatives: int = Field(5, ge=1)
    epochs: int = Field(5, ge=0)
    lr_start: float = Field(0.025, gt=0)
    lr_end: float = Field(1e-4, gt=0)
    subsample_t: float = Field(1e-4, gt=0)
    seed: int = Field(default_factory=lambda: Config.DEFAULT_SEED)
    workers: int = Field(1, ge=1)
    batch_pairs: int = Field(1, ge=1, description="Pairs per SGD step; >1 opts into mini-batches")
    min_count_word: int = Field(5, ge=1)
    min_count_citation: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_schedule(self):
        if not self.lr_start > self.lr_end:
            raise ValueError("lr_start must be greater than lr_end")
        return self


class AlignConfig(BaseModel):
    center: bool = Field(True, description="Mean-center shared rows before Procrustes")
    anchor_min_count: int = Field(1, ge=1, description="Minimum count in both periods for an anchor row")


class AnalysisConfig(BaseModel):
    thresholds: List[int] = Field(default_factory=lambda: [20, 50, 100])
    rank_from: Optional[int] = None
    rank_to: Optional[int] = None
    min_years: int = Field(1, ge=1)
    top_k: int = Field(5, ge=1)
    n_words: int = Field(8, ge=1)
    bin_width: float = Field(0.01, gt=0)
    cumulative_counts: bool = Field(False, description="citations_t cumulative instead of within-year")

    @field_validator("thresholds")
    def validate_thresholds(cls, v):
        if any(t < 0 for t in v):
            raise ValueError("thresholds must be non-negative")
        return sorted(set(v))


class PipelineConfig(BaseModel):
    corpus_dir: Optional[str] = None
    workdir: str = Field(default_factory=lambda: Config.WORKDIR)
    phrase_dict: Optional[str] = None
    norm_config: Optional[str] = Field(None, description="Standalone NormConfig file; flat norm keys win over it")
    years: Optional[List[int]] = None
    norm: NormConfig = Field(default_factory=NormConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    align: AlignConfig = Field(default_factory=AlignConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)

    @field_validator("years")
    def validate_years(cls, v):
        if v is not None and any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("years must be strictly increasing")
        return v

    @property
    def work_path(self) -> Path:
        return Path(self.workdir)

    def require_paths(self, *names: str) -> None:
        """Fail fast when a configured path is unset or missing"""
        errors = []
        for name in names:
            value = getattr(self, name)
            if not value:
                errors.append(f"{name} is not configured")
            elif not Path(value).exists():
                errors.append(f"{name} does not exist: {value}")
        if errors:
            raise ConfigError("Configuration errors: " + "; ".join(errors))


_SECTIONS = {
    "norm": NormConfig,
    "train": TrainConfig,
    "align": AlignConfig,
    "analysis": AnalysisConfig,
}
_TOP_LEVEL = {"corpus_dir", "workdir", "phrase_dict", "norm_config", "years"}
_LIST_KEYS = {"abbreviations", "thresholds", "years"}


def parse_key_value_file(path: str) -> Dict[str, str]:
    """Read a flat key=value file; '#' starts a comment line"""
    values: Dict[str, str] = {}
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    for lineno, raw in enumerate(file_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _coerce(key: str, value: Any) -> Any:
    if key in _LIST_KEYS and isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def build_pipeline_config(values: Mapping[str, Any]) -> PipelineConfig:
    """Distribute flat keys over the config sections and validate"""
    top: Dict[str, Any] = {}
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in _SECTIONS}
    unknown = []

    for key, value in values.items():
        value = _coerce(key, value)
        if key in _TOP_LEVEL:
            top[key] = value
            continue
        for name, model in _SECTIONS.items():
            if key in model.model_fields:
                sections[name][key] = value
                break
        else:
            unknown.append(key)

    if unknown:
        raise ConfigError("Configuration errors: unknown keys " + ", ".join(sorted(unknown)))

    if top.get("norm_config"):
        sections["norm"] = {**_read_norm_values(top["norm_config"]), **sections["norm"]}

    try:
        return PipelineConfig(
            **top,
            **{name: model(**sections[name]) for name, model in _SECTIONS.items()}
        )
    except ValidationError as e:
        raise ConfigError(f"Configuration errors: {e}") from e


def load_pipeline_config(path: Optional[str] = None,
                         overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """File values first, then command-line overrides (flag wins)"""
    values: Dict[str, Any] = parse_key_value_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    config = build_pipeline_config(values)
    logger.debug(f"Loaded pipeline config: {config.model_dump()}")
    return config


def _read_norm_values(path: str) -> Dict[str, Any]:
    values = {k: _coerce(k, v) for k, v in parse_key_value_file(path).items()}
    unknown = sorted(set(values) - set(NormConfig.model_fields))
    if unknown:
        raise ConfigError(f"Configuration errors: unknown keys in {path}: " + ", ".join(unknown))
    return values


def load_norm_config(path: str) -> NormConfig:
    """Standalone NormConfig file (url_replace=true, ...)"""
    values = _read_norm_values(path)
    try:
        return NormConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Configuration errors: {e}") from e


def config_keys() -> List[str]:
    """Every flat key a config file (or a same-named flag) may set"""
    keys = set(_TOP_LEVEL)
    for model in _SECTIONS.values():
        keys.update(model.model_fields)
    return sorted(keys)
