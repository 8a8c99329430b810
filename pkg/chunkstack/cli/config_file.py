from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from chunkstack.training.config import PRESETS, TrainConfig


def parse_config_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """
    Parse ``key=value`` lines into TrainConfig field names.

    Blank lines and lines starting with ``#`` are skipped. Keys may use the flag
    spelling (``grad-accum-steps``) or the field name (``grad_accum_steps``).
    Values stay strings; TrainConfig validation converts them.
    """
    settings: Dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in TrainConfig.model_fields:
            raise ValueError(f"{source}:{lineno}: unknown setting {key!r}")
        settings[key] = value
    return settings


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    return parse_config_lines(path.read_text(encoding="utf-8").splitlines(), source=str(path))


def resolve_train_config(
    preset: Optional[str] = None,
    config_path: Optional[Union[str, Path]] = None,
    flags: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """Layer settings: field defaults < preset < config file < flags that were given (not None)."""
    settings: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"Unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        settings.update(PRESETS[preset])
    if config_path is not None:
        settings.update(read_config_file(config_path))
    settings.update({k: v for k, v in (flags or {}).items() if v is not None})
    return TrainConfig(**settings)
