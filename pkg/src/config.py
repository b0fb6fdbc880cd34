"""
Runtime Settings
Environment-driven configuration shared by samplers, inference and experiments

Values are read from environment variables prefixed with TREELAB_. A .env file
in the project root is loaded first if present, so local overrides do not need
to be exported in the shell.

Example .env:
    TREELAB_LOG_LEVEL=DEBUG
    TREELAB_N_JOBS=8
    TREELAB_FIM_MIN_COUNT=50
"""

import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger("config")

PROJECT_ROOT = Path(__file__).resolve().parent.parent


@dataclass(frozen=True)
class Settings:
    """Tunable constants; every field has an environment override"""
    max_nodes: int = 4_000_000
    log_level: str = "INFO"
    log_file: Optional[str] = None
    n_jobs: int = 1
    calibration_samples: int = 20_000
    calibration_seed: int = 7_919
    fim_min_count: int = 30
    fim_tie_margin: float = 0.002
    flip_margin: float = 0.01
    distance_tolerance: float = 0.05
    exhaustive_max_q: int = 6
    default_r: int = 2
    min_k_factor: float = 10.0


def _env(name: str, default, cast):
    raw = os.getenv(f"TREELAB_{name}")
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        logger.warning(f"Ignoring invalid TREELAB_{name}={raw!r}, using {default!r}")
        return default


def load_settings(env_path: Optional[Path] = None) -> Settings:
    """
    Build Settings from the environment

    Args:
        env_path: Optional .env file (defaults to the project root .env)

    Returns:
        Settings instance
    """
    env_path = Path(env_path) if env_path else PROJECT_ROOT / ".env"
    if env_path.exists():
        load_dotenv(env_path)

    defaults = Settings()
    return Settings(
        max_nodes=_env("MAX_NODES", defaults.max_nodes, int),
        log_level=_env("LOG_LEVEL", defaults.log_level, str).upper(),
        log_file=_env("LOG_FILE", defaults.log_file, str),
        n_jobs=_env("N_JOBS", defaults.n_jobs, int),
        calibration_samples=_env("CALIBRATION_SAMPLES", defaults.calibration_samples, int),
        calibration_seed=_env("CALIBRATION_SEED", defaults.calibration_seed, int),
        fim_min_count=_env("FIM_MIN_COUNT", defaults.fim_min_count, int),
        fim_tie_margin=_env("FIM_TIE_MARGIN", defaults.fim_tie_margin, float),
        flip_margin=_env("FLIP_MARGIN", defaults.flip_margin, float),
        distance_tolerance=_env("DISTANCE_TOLERANCE", defaults.distance_tolerance, float),
        exhaustive_max_q=_env("EXHAUSTIVE_MAX_Q", defaults.exhaustive_max_q, int),
        default_r=_env("DEFAULT_R", defaults.default_r, int),
        min_k_factor=_env("MIN_K_FACTOR", defaults.min_k_factor, float),
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Process-wide settings, loaded once"""
    return load_settings()
