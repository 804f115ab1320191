"""
Configuration management using Pydantic settings
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import List, Optional
import logging
import sys


class Settings(BaseSettings):
    """Library and CLI settings loaded from the environment or a .env file"""

    # Environment
    ENVIRONMENT: str = "development"
    DEBUG: bool = False

    # API
    API_PORT: int = 8000
    API_HOST: str = "0.0.0.0"
    API_TITLE: str = "Circular Effects API"
    API_VERSION: str = "1.0.0"
    API_MAX_REPLICATIONS: int = 200
    CORS_ORIGINS: List[str] = ["*"]

    # Circular kernel
    EPS_RHO: float = 1e-10

    # Logistic propensity solver
    TOL_SCORE: float = 1e-9
    MAX_ITER: int = 100
    MAX_HALVINGS: int = 30
    DELTA_SEP: float = 1e-8
    ETA_MAX: float = 50.0
    X_BOUND: float = 1e6

    # Linear algebra / sandwich
    PIVOT_TOL: float = 1e-12
    NEGATIVE_VARIANCE_TOL: float = 1e-10

    # Inference
    CONFIDENCE_LEVEL: float = 0.95

    # Simulation
    SIM_FAILURE_FLAG_RATE: float = 0.01
    SIM_QUADRATURE_NODES: int = 48
    SIM_PROGRESS: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="CIRCEFF_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()


# Configure logging
def setup_logging(level: Optional[str] = None):
    """Setup logging; always to stderr, to LOG_FILE as well when it is set"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))

    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


logger = logging.getLogger(__name__)
