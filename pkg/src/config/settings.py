"""
Configuration settings for AML IDS Lab.
"""
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Process-level settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="AML_IDS_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    app_name: str = Field(default="AML IDS Lab", description="Application name")
    app_version: str = Field(default="1.0.0", description="Application version")
    debug: bool = Field(default=False, description="Debug mode")
    log_level: str = Field(default="INFO", description="Logging level")

    # Execution
    threads: int = Field(default=1, ge=1, description="Default worker thread cap")
    output_dir: str = Field(default="runs/default", description="Default artifact directory")

    # Data
    power_system_dir: Optional[str] = Field(
        default=None,
        description="Directory holding the power-system CSV corpus (enables the full-corpus tests)",
    )


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get the current settings instance."""
    return settings


def update_settings(**kwargs) -> Settings:
    """Update settings with new values."""
    global settings
    for key, value in kwargs.items():
        if hasattr(settings, key):
            setattr(settings, key, value)
    return settings
