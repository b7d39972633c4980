"""Run manifests: enough of a record to rerun a command and get the same bytes."""

from __future__ import annotations

import json
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from ..errors import IncompatibleArtifactError
from .io import file_sha256

MANIFEST_FILE = "run_manifest.json"
MANIFEST_VERSION = 1


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    generator_fingerprint: str = ""
    tool_version: str = field(default_factory=tool_version)
    python: str = field(default_factory=platform.python_version)
    started: str = field(default_factory=_now)
    finished: str = ""
    version: int = MANIFEST_VERSION

    def add_input(self, path) -> None:
        if path is not None and Path(path).is_file():
            self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def write(self, out_dir) -> Path:
        """Write (or replace) the single manifest of ``out_dir``."""
        self.finished = _now()
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / MANIFEST_FILE
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        if not path.exists():
            raise FileNotFoundError(f"no run manifest at {path}")
        raw = json.loads(path.read_text())
        if raw.get("version") != MANIFEST_VERSION:
            raise IncompatibleArtifactError(f"{path}: unsupported manifest version {raw.get('version')}")
        return cls(**raw)

    def changed_inputs(self) -> list[str]:
        """Recorded inputs whose current contents no longer match."""
        return [p for p, digest in self.inputs.items() if not Path(p).is_file() or file_sha256(p) != digest]
