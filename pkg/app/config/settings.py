"""
Configuration settings for the MAXQ hierarchical learning engine.
Loads environment variables and provides configuration objects.
"""
import os
from pathlib import Path
from pydantic import BaseModel, Field
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Base directory
BASE_DIR = Path(__file__).resolve().parent.parent.parent


class OracleSettings(BaseModel):
    """Dynamic programming settings shared by the exact solvers."""
    tolerance: float = Field(default_factory=lambda: float(os.getenv("MAXQ_DP_TOLERANCE", "1e-8")))
    max_iterations: int = Field(default_factory=lambda: int(os.getenv("MAXQ_DP_MAX_ITERATIONS", "1000000")))
    tie_tolerance: float = Field(default_factory=lambda: float(os.getenv("MAXQ_TIE_TOLERANCE", "1e-9")))


class LearningSettings(BaseModel):
    """Defaults for the online learners."""
    step_cap: int = Field(default_factory=lambda: int(os.getenv("MAXQ_STEP_CAP", "100000")))
    initial_value: float = Field(default_factory=lambda: float(os.getenv("MAXQ_INITIAL_VALUE", "0.123")))
    temperature_floor: float = Field(
        default_factory=lambda: float(os.getenv("MAXQ_TEMPERATURE_FLOOR", "0.1"))
    )


class HarnessSettings(BaseModel):
    """Experiment harness settings."""
    output_root: Path = Field(
        default_factory=lambda: Path(os.getenv("MAXQ_OUTPUT_ROOT", str(BASE_DIR / "results")))
    )
    default_trials: int = Field(default_factory=lambda: int(os.getenv("MAXQ_DEFAULT_TRIALS", "10")))
    full_trials: int = Field(default_factory=lambda: int(os.getenv("MAXQ_FULL_TRIALS", "100")))
    workers: int = Field(default_factory=lambda: int(os.getenv("MAXQ_WORKERS", "4")))


class Settings(BaseModel):
    """Global application settings."""
    environment: str = Field(default_factory=lambda: os.getenv("ENVIRONMENT", "development"))
    log_level: str = Field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))
    log_to_file: bool = Field(default_factory=lambda: os.getenv("LOG_TO_FILE", "True").lower() == "true")
    oracle: OracleSettings = Field(default_factory=OracleSettings)
    learning: LearningSettings = Field(default_factory=LearningSettings)
    harness: HarnessSettings = Field(default_factory=HarnessSettings)


# Create global settings instance
settings = Settings()
