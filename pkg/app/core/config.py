import os
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings with environment variable support."""

    # Application settings
    APP_NAME: str = "Out(F_n) Translation Length Toolkit"
    APP_VERSION: str = "1.0.0"
    APP_ENV: str = "development"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Report output
    OUTPUT_FOLDER: str = os.path.join(os.getcwd(), "reports")
    FLOAT_DIGITS: int = 12
    SEED: int = 0

    # Bounded cancellation
    BCC_DEPTH: int = 8

    # Growth and translation length budgets
    TORSION_CAP: int = 24
    GROWTH_K_MAX: int = 20
    GROWTH_LENGTH_BUDGET: int = 200_000
    WITNESS_K_MAX: int = 30
    UPPER_K_MAX: int = 6
    UPPER_LENGTH_BUDGET: int = 1_000

    # Graph maps
    PATH_LENGTH_CAP: int = 10_000_000
    WITNESS_ITERATIONS: int = 50
    SPLITTING_K_MAX: int = 20

    # Outer classes and the Cayley ball
    PLATEAU_CAP: int = 1_000_000
    ORACLE_NODE_BUDGET: int = 10_000_000
    ORACLE_RADIUS: int = 5
    CANONICAL_CACHE_SIZE: int = 200_000
    WORKERS: int = 1

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


# Create settings instance
settings = Settings()
