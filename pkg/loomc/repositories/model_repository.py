"""Repository layer for `model.json` manifests."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

from marshmallow import ValidationError as MarshmallowValidationError

from loomc.errors import IoError, ParseError
from loomc.schemas.manifest import ModelManifestSchema

logger = logging.getLogger(__name__)

MANIFEST_NAME = "model.json"


class ModelRepository:
    """Load and store validated manifests."""

    def __init__(self) -> None:
        self._schema = ModelManifestSchema()

    def load(self, path: str | Path) -> dict[str, Any]:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot read manifest {path}: {exc.strerror or exc}") from exc
        return self.loads(text, source=str(path))

    def loads(self, text: str, source: str = "<manifest>") -> dict[str, Any]:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                message=f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}",
                details={"line": exc.lineno, "column": exc.colno},
            ) from exc
        try:
            manifest = self._schema.load(raw)
        except MarshmallowValidationError as exc:
            raise ParseError(message=f"{source}: malformed manifest", details=exc.messages) from exc
        logger.debug("Loaded manifest %s with %d node(s)", source, len(manifest["graph"]["node"]))
        return manifest

    def store(self, path: str | Path, manifest: dict[str, Any]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot write manifest {path}: {exc.strerror or exc}") from exc
        return path
