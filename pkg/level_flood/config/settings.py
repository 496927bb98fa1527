"""Experiment configuration from flags, environment, .env and TOML files.

Set the DEPLOYMENT environment variable to select .env.${DEPLOYMENT};
defaults to the testing environment when unset. A TOML file whose keys mirror
the field names below can be layered underneath with ``load_settings``.

Notes
-----
Precedence, highest first: explicit overrides (CLI flags), environment
variables, the .env file, the TOML file, then field defaults.

Nothing is built at import time. The CLI builds its instance through
``load_settings`` after parsing flags, so flags win over the environment and
an environment value that a flag corrects never fails validation on its own.

Every variable carries the ``LBF_`` prefix:

**Application Identity**

LBF_APP_NAME
    Name used in logs. Default: "level_flood".

LBF_VERSION
    Version from package metadata, git commit, or fallback.
    Default: "unknown".

DEPLOYMENT
    Selects .env.{DEPLOYMENT} and sets deployment.environment in logs.
    Default: "testing". Unprefixed.

**Experiment Selection**

LBF_SCENARIO
    Preset name, "s1" .. "s5". Default: "s1".

LBF_CUSTOM_SCENARIO
    JSON ScenarioConfig used instead of a preset; LBF_SCENARIO then only
    labels the rows. Default: unset.

LBF_PROTOCOL
    "lbf" or "flood". Default: "lbf".

LBF_P
    Rebroadcast threshold in [0, 1]. Default: unset (the preset's value).

LBF_SWEEP_P
    JSON list of thresholds, e.g. '[0.2, 0.5, 1.0]'. Default: unset.

LBF_SEEDS
    "1..20", "3,5,9" or topology:protocol pairs "1:7,2:8". Default: "1..20".

LBF_TARGETS
    "all" or a comma list of node ids. Default: "all".

LBF_BROADCAST_REQUESTS
    Network-wide broadcast requests per cell for SR/EC/RE. Default: 10.
    Valid: >=0.

LBF_PAYLOAD_BYTES
    DataBack payload length. Default: 4. Valid: 0..255.

LBF_ALLOW_LARGE_SCENARIOS
    Permit the s4 and s5 presets. Default: False.

LBF_INCLUDE_FAILED_IN_COST
    Count failed queries in average cost and energy. Default: True.

**Timing**

LBF_HOP_DELAY
    Virtual seconds per hop. Default: 1.0. Valid: >0.

LBF_JITTER
    Maximum extra per-delivery delay. Default: 0.1. Valid: >=0.

LBF_RAD_TMAX
    Maximum random assessment delay. Default: 0.5.
    Valid: >=0 and < LBF_HOP_DELAY.

**Execution**

LBF_WORKERS
    Worker processes for independent cells. Default: 1. Valid: >=1.

LBF_EVENT_BUDGET
    Events one phase may process before aborting. Default: 20000000.

LBF_TRACE_LIMIT
    Event-log lines kept per cell when tracing. Default: 100000.

LBF_OUT / LBF_TRACE
    Output CSV path and event-log path. Default: stdout / no trace.

**Logging**

LBF_DEBUG
    Force DEBUG logging. Default: False.

LBF_LOG_LEVEL
    Minimum log level to emit. Default: "INFO".
    Valid: "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL".
"""

import contextlib
import os
import shutil
import subprocess
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _package_version
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import Field, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from level_flood.domain.topology import ScenarioConfig

__all__ = ["Settings", "load_settings"]

DEPLOYMENT = os.getenv("DEPLOYMENT", "testing")
_ENV_FILE = Path(f".env.{DEPLOYMENT}")

#: Valid values for Settings.protocol.
ProtocolName = Literal["lbf", "flood"]

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def _get_version(package_name: str) -> str:
    """Determine the application version from installed package metadata or git.

    Attempts to resolve version from three sources in priority order:

    1. Installed package metadata (importlib.metadata)
    2. Current git commit short-hash (git rev-parse --short HEAD)
    3. Fallback literal string "unknown"

    Parameters
    ----------
    package_name : str
        Name of the installed package to query for version metadata.

    Returns
    -------
    str
        Version string from metadata, git commit hash, or "unknown" fallback.
    """
    with contextlib.suppress(PackageNotFoundError):
        return _package_version(package_name)

    git = shutil.which("git")
    if git is None:
        return "unknown"

    try:
        result = subprocess.run(  # noqa: S603
            [git, "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        )
        return f"git-{result.stdout.strip()}"
    except (subprocess.CalledProcessError, subprocess.TimeoutExpired):
        return "git-unknown"


# ----------------------------------------------------------------------
# Settings model - reads from environment, .env file and optional TOML
# ----------------------------------------------------------------------
class Settings(BaseSettings):
    """Experiment settings loaded from overrides, environment, .env and TOML.

    See level_flood/config/settings.py module docstring for the complete
    list of configuration parameters and their defaults.
    """

    model_config = SettingsConfigDict(
        env_prefix="LBF_",
        env_file=str(_ENV_FILE),
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    app_name: str = "level_flood"
    version: str = "unknown"
    deployment_environment: str = Field(default=DEPLOYMENT, alias="DEPLOYMENT")

    scenario: str = "s1"
    custom_scenario: ScenarioConfig | None = None
    protocol: ProtocolName = "lbf"
    p: float | None = None
    sweep_p: list[float] | None = None
    seeds: str = "1..20"
    targets: str = "all"
    out: Path | None = None
    trace: Path | None = None

    hop_delay: float = Field(default=1.0, gt=0)
    jitter: float = Field(default=0.1, ge=0)
    rad_tmax: float = Field(default=0.5, ge=0)
    payload_bytes: int = Field(default=4, ge=0, le=255)
    broadcast_requests: int = Field(default=10, ge=0)

    workers: int = Field(default=1, ge=1)
    event_budget: int = Field(default=20_000_000, ge=1)
    trace_limit: int = Field(default=100_000, ge=1)
    allow_large_scenarios: bool = False
    include_failed_in_cost: bool = True

    debug: bool = False
    log_level: LogLevel = "INFO"

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Layer a TOML source beneath the environment sources.

        The TOML source reads ``model_config["toml_file"]``, which is unset on
        this class and set on the subclasses ``load_settings`` creates, so the
        plain ``Settings()`` never touches the filesystem for TOML.

        Returns
        -------
        tuple[PydanticBaseSettingsSource, ...]
            Sources in precedence order, highest first.
        """
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            TomlConfigSettingsSource(settings_cls),
            file_secret_settings,
        )

    @model_validator(mode="after")
    def _check_rad_window(self) -> Self:
        """Verify the random assessment delay fits inside one hop.

        A RAD window as long as a hop would let a node still be collecting
        duplicates when the next wavefront reaches it.

        Returns
        -------
        Self
            The validated Settings instance.

        Raises
        ------
        ValueError
            If rad_tmax is not smaller than hop_delay.
        """
        if self.rad_tmax >= self.hop_delay:
            raise ValueError(  # noqa: TRY003
                f"rad_tmax ({self.rad_tmax}) must be smaller than"
                f" hop_delay ({self.hop_delay})"
            )
        return self

    @model_validator(mode="after")
    def _check_thresholds(self) -> Self:
        """Verify p and every sweep_p value lie in [0, 1].

        Returns
        -------
        Self
            The validated Settings instance.

        Raises
        ------
        ValueError
            If a threshold is out of range, the sweep is empty, or both p and
            sweep_p are given.
        """
        if self.p is not None and not 0 <= self.p <= 1:
            raise ValueError(f"p ({self.p}) must lie in [0, 1]")  # noqa: TRY003
        if self.sweep_p is not None:
            if not self.sweep_p:
                raise ValueError("sweep_p must not be empty")  # noqa: TRY003
            bad = [value for value in self.sweep_p if not 0 <= value <= 1]
            if bad:
                raise ValueError(  # noqa: TRY003
                    f"sweep_p values {bad} must lie in [0, 1]"
                )
            if self.p is not None:
                raise ValueError(  # noqa: TRY003
                    "p and sweep_p are mutually exclusive"
                )
        return self

    @model_validator(mode="after")
    def _resolve_version(self) -> Self:
        """Resolve version from package metadata if not explicitly set.

        Returns
        -------
        Self
            The validated Settings instance with version field populated.
        """
        if self.version == "unknown":
            self.version = _get_version(self.app_name)
        return self

    @property
    def effective_log_level(self) -> str:
        """DEBUG when debug is on, otherwise log_level."""
        return "DEBUG" if self.debug else self.log_level


def load_settings(config_file: Path | None = None, **overrides: Any) -> Settings:
    """Build Settings with a TOML file under the environment and overrides on top.

    Parameters
    ----------
    config_file : Path, optional
        TOML file whose keys mirror Settings field names. A
        ``[custom_scenario]`` table describes an inline ScenarioConfig.
    **overrides
        Field values that win over every other source. ``None`` values are
        skipped so unset CLI flags fall through to lower layers.

    Returns
    -------
    Settings
        The merged, validated settings.

    Raises
    ------
    pydantic.ValidationError
        If any merged value fails validation.
    """
    explicit = {key: value for key, value in overrides.items() if value is not None}
    if config_file is None:
        return Settings(**explicit)

    class _FileSettings(Settings):
        model_config = SettingsConfigDict(toml_file=config_file)

    return _FileSettings(**explicit)

