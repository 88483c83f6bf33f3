# config.py
# Runtime settings for the reduction toolkit.
# Values come from the environment (optionally a .env file) and fall back to documented defaults.

import logging
import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field


class Settings(BaseModel):
    """Process-wide defaults; command-line flags take precedence"""

    model_config = ConfigDict(frozen=True)

    default_volume: float = Field(100.0, gt=0)
    rtol: float = Field(1e-8, gt=0)
    atol: float = Field(1e-10, gt=0)
    output_dir: str = "results"
    log_level: str = "INFO"
    seed: int = 0
    truncation_threshold: float = Field(0.01, gt=0)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load settings once from the environment"""
    load_dotenv()
    env = {
        "default_volume": os.getenv("LNAMOR_DEFAULT_VOLUME"),
        "rtol": os.getenv("LNAMOR_RTOL"),
        "atol": os.getenv("LNAMOR_ATOL"),
        "output_dir": os.getenv("LNAMOR_OUTPUT_DIR"),
        "log_level": os.getenv("LNAMOR_LOG_LEVEL"),
        "seed": os.getenv("LNAMOR_SEED"),
        "truncation_threshold": os.getenv("LNAMOR_TRUNCATION_THRESHOLD"),
    }
    return Settings(**{key: value for key, value in env.items() if value is not None})


def configure_logging(level: str = None):
    """Set the root log level for command-line runs"""
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO))
    logging.getLogger().setLevel(getattr(logging, level_name, logging.INFO))
