from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


def _parse_int(val: str | None, default: int) -> int:
    try:
        return int(val) if val is not None and str(val).strip() else default
    except Exception:
        return default


def _parse_bool(val: str | None) -> bool:
    return (val or "").strip().lower() in ("1", "true", "yes", "on")


def _default_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class Settings:
    """Process-wide settings read from ``SDDE_*`` environment variables."""

    home: Path = field(default=Path.home() / ".sdde")
    log_level: str = field(default="WARNING")
    workers: int = field(default_factory=_default_workers)
    plain: bool = field(default=False)
    out_dir: Optional[Path] = field(default=None)

    @property
    def runs_dir(self) -> Path:
        return self.out_dir or (self.home / "runs")

    @classmethod
    def from_env(cls) -> "Settings":
        """Load settings from environment variables."""
        settings = cls()
        settings.reload_from_env()
        return settings

    def reload_from_env(self) -> None:
        """Reload settings from environment variables in-place.

        Modules that imported the global instance see the updated values.
        """
        home = os.environ.get("SDDE_HOME")
        self.home = Path(home) if home else Path.home() / ".sdde"
        self.log_level = (os.environ.get("SDDE_LOG_LEVEL") or "WARNING").upper()
        self.workers = max(1, _parse_int(os.environ.get("SDDE_WORKERS"), _default_workers()))
        self.plain = _parse_bool(os.environ.get("SDDE_PLAIN"))
        out_dir = os.environ.get("SDDE_OUT_DIR")
        self.out_dir = Path(out_dir) if out_dir else None


# Global settings instance
settings = Settings.from_env()


def reload_settings() -> None:
    """Reload the global settings from the environment."""
    settings.reload_from_env()
