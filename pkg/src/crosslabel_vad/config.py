"""Configuration management: typed run settings, flat config files and logging."""

import hashlib
import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Type, TypeVar

import structlog
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .exceptions import ConfigError, MissingFileError

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
LogFormat = Literal["json", "console"]

M = TypeVar("M", bound=BaseModel)


@dataclass
class LoggingConfig:
    """Logging settings, overridable from the environment."""

    log_level: LogLevel = "INFO"
    log_format: LogFormat = "console"
    log_file: Optional[Path] = None

    @classmethod
    def from_env(cls) -> "LoggingConfig":
        """Create configuration from environment variables."""
        return cls(
            log_level=os.getenv("VAD_LOG_LEVEL", "INFO").upper(),  # type: ignore
            log_format=os.getenv("VAD_LOG_FORMAT", "console").lower(),  # type: ignore
            log_file=Path(log_file)
            if (log_file := os.getenv("VAD_LOG_FILE"))
            else None,
        )


def setup_logging(
    level: LogLevel, format_type: LogFormat, log_file: Optional[Path] = None
) -> None:
    """Setup structured logging with the specified configuration."""

    processors = [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if format_type == "json":
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    # stderr only; stdout carries reports
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(message)s",
        handlers=[
            logging.FileHandler(log_file) if log_file else logging.StreamHandler(),
        ],
        force=True,
    )


# ---------------------------------------------------------------------------
# Run settings


class PseudoDirection(str, Enum):
    """Which pseudo track supervises which branch in stage 2."""

    NONE = "none"
    B_TO_C = "b2c"
    C_TO_B = "c2b"
    SELF = "self"
    BOTH = "both"

    @classmethod
    def parse(cls, value: str) -> "PseudoDirection":
        """Parse a direction name, accepting arrow spellings like ``B→C``."""
        key = value.strip().lower().replace("→", "2").replace("->", "2")
        for member in cls:
            if member.value == key:
                return member
        raise ConfigError(f"Unknown pseudo direction: {value}", key="direction")


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SynthConfig(_Settings):
    """Parameters of the seeded synthetic feature generator."""

    num_videos: int = Field(60, ge=1)
    dim: int = Field(32, ge=1)
    num_categories: int = Field(7, ge=2)
    min_length: int = Field(160, ge=8)
    max_length: int = Field(320, ge=8)
    anomaly_ratio: float = Field(0.5, ge=0.0, lt=1.0)
    shift_magnitude: float = Field(3.0, gt=0.0)
    min_segment: int = Field(16, ge=1)
    max_segment: int = Field(48, ge=1)
    smooth_width: float = Field(2.0, ge=0.0)
    noise_std: float = Field(0.5, gt=0.0)
    seed: int = 7

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        if self.min_length > self.max_length:
            raise ValueError("min_length must not exceed max_length")
        if self.min_segment > self.max_segment:
            raise ValueError("min_segment must not exceed max_segment")
        # three segments plus separating gaps must fit the shortest video
        if 3 * self.max_segment + 4 > self.min_length:
            raise ValueError("max_segment too long for min_length")
        return self


class LossConfig(_Settings):
    """Top-K rule and focal-loss constants."""

    k_divisor: int = Field(16, ge=1)
    gamma: float = Field(2.0, ge=0.0)
    alpha: float = Field(0.25, gt=0.0, lt=1.0)
    p_min: float = Field(1e-7, gt=0.0, lt=0.5)

    def top_k(self, length: int) -> int:
        """K for a level of ``length`` snippets."""
        return max(1, length // self.k_divisor)


class RefineConfig(_Settings):
    """Consistency-aware refinement constants."""

    theta: float = Field(0.5, gt=0.0, lt=1.0)
    max_gap: int = Field(5, ge=1)
    min_length: int = Field(3, ge=1)
    sigma_b: float = Field(2.0, gt=0.0)
    mad_scale: float = Field(1.4826, gt=0.0)
    sigma_floor: float = Field(1e-6, gt=0.0)


def _split_floats(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(",") if v.strip())
    return value


class EvalConfig(_Settings):
    """Fine-grained evaluation protocol."""

    thresholds: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    iou_thresholds: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)

    @field_validator("thresholds", "iou_thresholds", mode="before")
    @classmethod
    def _split(cls, value: Any) -> Any:
        return _split_floats(value)

    @field_validator("thresholds", "iou_thresholds")
    @classmethod
    def _unit_interval(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("at least one threshold is required")
        if any(not 0.0 < v < 1.0 for v in value):
            raise ValueError("thresholds must lie in (0, 1)")
        return tuple(sorted(set(value)))


class TrainConfig(_Settings):
    """Everything that determines a training run and its evaluation."""

    stage: int = Field(1, ge=1, le=2)
    epochs: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-4, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    seed: int = 0
    levels: int = Field(6, ge=1)
    n: int = Field(192, ge=1)
    hidden_dim: int = Field(256, ge=2)
    temperature: float = Field(0.07, gt=0.0)
    direction: PseudoDirection = PseudoDirection.BOTH
    car: bool = True
    balance: bool = True
    workers: int = Field(1, ge=1)
    loss: LossConfig = LossConfig()
    refine: RefineConfig = RefineConfig()
    evaluation: EvalConfig = EvalConfig()

    @field_validator("direction", mode="before")
    @classmethod
    def _parse_direction(cls, value: Any) -> Any:
        if isinstance(value, str):
            return PseudoDirection.parse(value)
        return value

    @model_validator(mode="after")
    def _check_pyramid(self) -> "TrainConfig":
        stride = 2 ** (self.levels - 1)
        if self.n % stride:
            raise ValueError(
                f"n={self.n} must be a positive multiple of 2^(levels-1)={stride}"
            )
        return self


# ---------------------------------------------------------------------------
# Flat key = value files


def load_flat_config(path: Path) -> Dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment line."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Config file not found: {path}", path=str(path))
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'", key=key)
        values[key] = value
    return values


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def flatten_config(model: BaseModel, prefix: str = "") -> Dict[str, str]:
    """Flatten a settings model into dotted keys with string values."""
    flat: Dict[str, str] = {}
    for name in type(model).model_fields:
        value = getattr(model, name)
        key = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            flat.update(flatten_config(value, prefix=f"{key}."))
        else:
            flat[key] = _format_value(value)
    return flat


def dump_flat_config(model: BaseModel) -> str:
    """Render the resolved config, one sorted ``key = value`` per line."""
    flat = flatten_config(model)
    return "".join(f"{key} = {flat[key]}\n" for key in sorted(flat))


def build_config(model_cls: Type[M], flat: Mapping[str, Any]) -> M:
    """Build a settings model from dotted keys, raising ``ConfigError``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None:
            continue
        target = nested
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"Key '{key}' conflicts with a scalar", key=key)
        target[parts[-1]] = value
    try:
        return model_cls.model_validate(nested)
    except ConfigError:
        raise
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(
            f"Invalid {model_cls.__name__} value for '{where}': {first['msg']}",
            key=where,
        ) from e


def resolve_config(
    model_cls: Type[M],
    config_file: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> M:
    """File values first, then explicit overrides (``None`` means unset)."""
    flat: Dict[str, Any] = {}
    if config_file is not None:
        flat.update(load_flat_config(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = value
    return build_config(model_cls, flat)


def evaluation_fingerprint(cfg: TrainConfig) -> str:
    """Hash of the settings that shape an evaluation report."""
    flat = flatten_config(cfg)
    keys = ["n", "levels"] + sorted(k for k in flat if k.startswith("evaluation."))
    payload = "".join(f"{k}={flat[k]}\n" for k in keys)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
