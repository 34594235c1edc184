"""Pipeline configuration: a flat ``key = value`` file plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .corpus import DEFAULT_MAX_BYTES
from .render import ASPECT_MODES, DEFAULT_TEX_COMMAND, DEFAULT_TIMEOUT, FONT_PACKAGES

ALLOWED_CAPS = (250, 500)


class ConfigError(ValueError):
    pass


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class PipelineConfig:
    corpus_root: Optional[Path] = None
    output_root: Path = Path("tablex-out")
    fonts: list[str] = field(default_factory=lambda: list(FONT_PACKAGES))
    aspect_modes: list[str] = field(default_factory=lambda: list(ASPECT_MODES))
    caps: list[int] = field(default_factory=lambda: list(ALLOWED_CAPS))
    rare_threshold: int = 5000
    jobs: int = 1
    tex_command: str = DEFAULT_TEX_COMMAND
    raster_command: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    max_bytes: int = DEFAULT_MAX_BYTES

    def validate(self) -> "PipelineConfig":
        if self.corpus_root is not None:
            self.corpus_root = Path(self.corpus_root).expanduser().resolve()
        self.output_root = Path(self.output_root).expanduser().resolve()
        if not self.fonts:
            raise ConfigError("fonts must be non-empty")
        bad = [f for f in self.fonts if f not in FONT_PACKAGES]
        if bad:
            raise ConfigError(f"unknown fonts {bad}; choose from {', '.join(FONT_PACKAGES)}")
        if not self.aspect_modes or any(m not in ASPECT_MODES for m in self.aspect_modes):
            raise ConfigError(f"aspect_modes must be a non-empty subset of {ASPECT_MODES}")
        if not self.caps or any(c not in ALLOWED_CAPS for c in self.caps):
            raise ConfigError(f"caps must be a non-empty subset of {ALLOWED_CAPS}")
        if self.rare_threshold < 0:
            raise ConfigError("rare_threshold must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        return self

    def set(self, key: str, value: str) -> None:
        """Assign one setting from its textual form."""
        key = key.strip().replace("-", "_")
        if key == "aspect":
            key = "aspect_modes"
        if key not in {f.name for f in fields(self)}:
            raise ConfigError(f"unknown setting {key!r}")
        value = value.strip()
        if key in ("corpus_root", "output_root"):
            setattr(self, key, Path(value))
        elif key == "fonts":
            setattr(self, key, list(FONT_PACKAGES) if value == "all" else _split_list(value))
        elif key == "aspect_modes":
            setattr(self, key, list(ASPECT_MODES) if value == "both" else _split_list(value))
        elif key == "caps":
            try:
                self.caps = [int(v) for v in _split_list(value)]
            except ValueError as exc:
                raise ConfigError(f"caps: {exc}") from exc
        elif key in ("rare_threshold", "jobs", "max_bytes"):
            try:
                setattr(self, key, int(value))
            except ValueError as exc:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc
        elif key == "timeout":
            self.timeout = float(value)
        elif key == "raster_command":
            self.raster_command = value or None
        else:
            setattr(self, key, value)


def load_config(path) -> PipelineConfig:
    """Read ``key = value`` lines; ``#`` starts a comment line. Relative paths resolve against the file."""
    path = Path(path)
    cfg = PipelineConfig()
    seen = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        try:
            cfg.set(key, value)
            seen.add(key.strip().replace("-", "_"))
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    for attr in ("corpus_root", "output_root"):
        value = getattr(cfg, attr)
        if attr in seen and not Path(value).is_absolute():
            setattr(cfg, attr, path.parent / value)
    return cfg
