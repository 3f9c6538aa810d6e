"""
Environment-driven defaults (a local .env file is honoured via python-dotenv).
"""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

from core.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    default_samples: int = 100
    default_seed: int = 42
    harmonic_n: int = 64

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        if dotenv:
            load_dotenv()
        level = os.getenv("OA_LOG_LEVEL", cls.log_level).upper()
        if level not in logging.getLevelNamesMapping():
            raise ConfigError(f"OA_LOG_LEVEL must be a logging level name, got {level!r}")
        return cls(
            log_level=level,
            default_samples=_int_env("OA_DEFAULT_SAMPLES", cls.default_samples),
            default_seed=_int_env("OA_DEFAULT_SEED", cls.default_seed),
            harmonic_n=_int_env("OA_HARMONIC_N", cls.harmonic_n),
        )


def configure_logging(level: str = "INFO", quiet: bool = False):
    logging.basicConfig(
        level=logging.WARNING if quiet else getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )
