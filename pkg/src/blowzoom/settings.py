from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .sharpness import SharpnessConfig

__all__ = [
    "LPConfig",
    "Paths",
    "AppConfig",
    "Settings",
]

ROOT_ENV = "BLOWZOOM_ROOT"
CONFIG_DIR_ENV = "BLOWZOOM_CONFIG_DIR"

# ---------- tiny .env loader (opt-in, no external dependency) ----------


def _load_dotenv(dotenv_path: Path) -> None:
    """Load KEY=VALUE pairs from a .env file into os.environ if not already set."""
    if not dotenv_path.exists():
        return
    for line in dotenv_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, val = line.split("=", 1)
        os.environ.setdefault(key.strip(), val.strip().strip("'").strip('"'))


# ---------- helpers ----------

_ENV_VAR_PATTERN = re.compile(r"\$\{([A-Z0-9_]+)\}")


def _env_expand(value: Any) -> Any:
    """Expand ${VAR} using environment variables within YAML scalar strings."""
    if isinstance(value, str):

        def repl(match: re.Match[str]) -> str:
            return os.environ.get(match.group(1), match.group(0))

        return _ENV_VAR_PATTERN.sub(repl, value)
    if isinstance(value, dict):
        return {k: _env_expand(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_env_expand(v) for v in value]
    return value


def _read_yaml(path: Path) -> Dict[str, Any]:
    if not path.exists():
        return {}
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise RuntimeError(f"{path} must contain a YAML mapping")
    return _env_expand(data)  # type: ignore[return-value]


# ---------- Pydantic models ----------


class LPConfig(BaseModel):
    tolerance: float = Field(default=1e-9, description="HiGHS primal/dual tolerance")
    max_atoms: int = Field(default=4000, description="support points per LP")

    @field_validator("tolerance")
    @classmethod
    def _check_tol(cls, v: float) -> float:
        if not 0 < v < 1e-3:
            raise ValueError("lp.tolerance must lie in (0, 1e-3)")
        return v

    @field_validator("max_atoms")
    @classmethod
    def _check_cap(cls, v: int) -> int:
        if v < 2:
            raise ValueError("lp.max_atoms must be >= 2")
        return v


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="ignore")

    log_level: str = Field(default="INFO", description="Python logging level")
    window_level: int = Field(default=4, description="world window I_B")
    workers: Optional[int] = Field(
        default=None, description="pool size; BLOWZOOM_WORKERS wins when set"
    )
    seed: int = 0
    precision: int = Field(default=12, description="significant digits in reports")
    lp: LPConfig = Field(default_factory=LPConfig)
    a_max: int = Field(default=20, description="truncation level of the metric d")
    boundary_depth: int = Field(default=6, description="sample_S boundary check depth")
    sharpness: SharpnessConfig = Field(default_factory=SharpnessConfig)

    @field_validator("log_level")
    @classmethod
    def _normalize_log_level(cls, v: str) -> str:
        lv = v.upper().strip()
        allowed = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}
        if lv not in allowed:
            raise ValueError(f"log_level must be one of {sorted(allowed)}")
        return lv

    @field_validator("window_level", "a_max", "boundary_depth")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("levels must be >= 1")
        return v

    @field_validator("workers")
    @classmethod
    def _check_workers(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError("workers must be a positive integer")
        return v

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, v: int) -> int:
        if not 0 <= v < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return v

    @field_validator("precision")
    @classmethod
    def _check_precision(cls, v: int) -> int:
        if not 1 <= v <= 17:
            raise ValueError("precision must lie in 1..17")
        return v


class Paths(BaseModel):
    root: Path
    config_dir: Path
    output_dir: Path
    logs_dir: Path

    @field_validator("root", "config_dir", "output_dir", "logs_dir", mode="before")
    @classmethod
    def _expanduser(cls, v: Union[str, Path]) -> Path:
        return Path(v).expanduser()


class Settings(BaseModel):
    """Single source of truth for runtime configuration."""

    paths: Paths
    app: AppConfig

    # ----------------- loader -----------------

    @classmethod
    def load(
        cls,
        root: Optional[Path] = None,
        dotenv: Optional[Path] = None,
    ) -> "Settings":
        """
        Load settings from environment + config/app.yaml.

        Precedence:
          1) Environment variables (including those loaded from `.env`)
          2) app.yaml
          3) Defaults in the models
        """
        env_root = os.environ.get(ROOT_ENV, "")
        if env_root:
            inferred_root = Path(env_root).expanduser()
        else:
            # src/blowzoom/settings.py -> project root is parents[2]
            inferred_root = Path(__file__).resolve().parents[2]
        base_root = root or inferred_root

        cfg_override = os.environ.get(CONFIG_DIR_ENV)
        config_dir = (
            Path(cfg_override).expanduser() if cfg_override else (base_root / "config")
        )

        _load_dotenv(dotenv or base_root / ".env")

        paths = Paths(
            root=base_root,
            config_dir=config_dir,
            output_dir=base_root / "output",
            logs_dir=base_root / "logs",
        )

        app_path = config_dir / "app.yaml"
        if not app_path.exists():
            raise RuntimeError(
                f"Missing required config: {app_path}. "
                "Copy the template under config/app.yaml."
            )
        try:
            app_cfg = AppConfig(**_read_yaml(app_path))
        except ValidationError as e:
            raise RuntimeError(f"Invalid app.yaml configuration: {e}") from e

        return cls(paths=paths, app=app_cfg)

    # ----------------- conveniences -----------------

    def with_overrides(self, **changes: Any) -> "Settings":
        """Copy with AppConfig fields replaced (None values are ignored)."""
        updates = {k: v for k, v in changes.items() if v is not None}
        if not updates:
            return self
        try:
            app = AppConfig(**{**self.app.model_dump(), **updates})
        except ValidationError as e:
            raise RuntimeError(f"Invalid override: {e}") from e
        return self.model_copy(update={"app": app})

    def fmt(self, value: float) -> str:
        return f"{value:.{self.app.precision}g}"
