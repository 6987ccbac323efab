import logging

from pydantic_settings import BaseSettings, PydanticBaseSettingsSource

logger = logging.getLogger(__name__)

_MAX_SANE_GRACE_US = 60_000_000


class Settings(BaseSettings):
    app_env: str = "production"
    app_debug: bool = False
    log_level: str = "INFO"

    # Trial timing (µs). Reception stays open for grace_us after the last transmission.
    grace_us: int = 5_000_000
    skew_bound_us: int = 90

    # LRE de-duplication window (outstanding sequence numbers)
    window_capacity: int = 2048

    # Analysis defaults
    deadlines_us: list[int] = [1_000, 3_000, 10_000, 30_000]
    max_lag_cap: int = 1000
    percentile: float = 0.9999

    # Independence verdict
    independence_tolerance: float = 0.10
    min_expected_events: int = 100

    cors_origins: list[str] = ["http://localhost:3000"]
    max_upload_size_mb: int = 200

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8"}

    def validate_runtime(self) -> None:
        """Raise on inconsistent values; warn on unusual ones."""
        problems = []
        if self.grace_us < 0:
            problems.append("GRACE_US")
        if self.skew_bound_us < 0:
            problems.append("SKEW_BOUND_US")
        if self.window_capacity < 1:
            problems.append("WINDOW_CAPACITY")
        if not 0.0 < self.percentile <= 1.0:
            problems.append("PERCENTILE")
        if any(h < 0 for h in self.deadlines_us):
            problems.append("DEADLINES_US")
        if problems:
            raise ValueError(f"Configuração inválida, verifique: {', '.join(problems)}")

        if self.grace_us > _MAX_SANE_GRACE_US:
            logger.warning(
                "Janela de recepção muito longa (%d µs); cópias atrasadas serão contadas como "
                "entregues",
                self.grace_us,
            )
        if self.independence_tolerance <= 0:
            logger.warning(
                "Tolerância de independência %.3f: todo desvio será reprovado",
                self.independence_tolerance,
            )


class CliSettings(Settings):
    """Settings for the command line: defaults and explicit arguments only, no env or .env."""

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


settings = Settings()


def isolate_from_environment() -> Settings:
    """Reset the shared settings to built-in defaults; the CLI ignores env and .env."""
    clean = CliSettings()
    for name in Settings.model_fields:
        setattr(settings, name, getattr(clean, name))
    return settings
