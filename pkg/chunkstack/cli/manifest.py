import hashlib
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, Field

from chunkstack import __version__

logger = logging.getLogger(__name__)


def blob_hash(data: bytes) -> str:
    """Git blob object id: sha1 over ``b"blob <size>\\0"`` followed by the content."""
    digest = hashlib.sha1()
    digest.update(f"blob {len(data)}\0".encode("ascii"))
    digest.update(data)
    return digest.hexdigest()


def file_hash(path: Union[str, Path]) -> str:
    return blob_hash(Path(path).read_bytes())


class RunManifest(BaseModel):
    """Record of one CLI run: what was asked for, what it read, what it wrote."""

    command: str
    version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)

    @classmethod
    def for_run(
        cls,
        command: str,
        config: Dict[str, Any],
        inputs: Sequence[Union[str, Path]] = (),
        outputs: Sequence[Union[str, Path]] = (),
        seed: Optional[int] = None,
    ) -> "RunManifest":
        return cls(
            command=command,
            config=config,
            seed=seed,
            inputs={str(p): file_hash(p) for p in inputs},
            outputs=[str(p) for p in outputs],
        )

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote run manifest to {path}")
        return path


def manifest_path_for(output: Union[str, Path]) -> Path:
    """``<output>.manifest.json`` for a file, ``<dir>/manifest.json`` for a directory."""
    output = Path(output)
    if output.is_dir():
        return output / "manifest.json"
    return output.with_name(output.name + ".manifest.json")


def emit_manifest(
    manifest: RunManifest,
    output: Optional[Union[str, Path]] = None,
    manifest_path: Optional[Union[str, Path]] = None,
) -> Optional[Path]:
    """Write the manifest next to ``output``, or to ``manifest_path``; otherwise log it."""
    if manifest_path is not None:
        return manifest.write(manifest_path)
    if output is not None:
        return manifest.write(manifest_path_for(output))
    logger.info(f"Run manifest: {manifest.model_dump_json()}")
    return None
