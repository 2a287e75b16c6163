"""Run manifests.

Every output directory gets a ``manifest.json`` that records the command, its
resolved options and the tool version, plus digests of the input files. The
``replay`` command re-invokes the command from it.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.utils.errors import ConfigurationError

MANIFEST_FILENAME = "manifest.json"
SCHEMA_VERSION = 1


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes, or an empty string if it cannot be read."""
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return ""


class RunManifest(BaseModel):
    """Everything needed to rerun a command bit for bit.

    Attributes:
        schema_version: Version of the output file formats
        tool_version: Package version that wrote the outputs
        command: Command name, e.g. ``simulate``
        options: Resolved command options, as passed to the command
        inputs: Input file path to SHA-256 digest
        flow: Integrator settings in effect, in mol/L and seconds
        concentration_unit: Unit of concentration columns in CSV outputs
        seed: Root seed
        runs: Runs per ensemble (1 for deterministic runs)
        out: Output directory
    """

    model_config = ConfigDict(frozen=True, extra="forbid", ser_json_inf_nan="constants")

    schema_version: int = SCHEMA_VERSION
    tool_version: str
    command: str
    options: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    flow: Dict[str, Any] = Field(default_factory=dict)
    concentration_unit: str = "M"
    seed: Optional[int] = None
    runs: int = 1
    out: str

    def write(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / MANIFEST_FILENAME
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        """Read a manifest file or the manifest inside a directory.

        Raises:
            ConfigurationError: If the file is missing or invalid
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILENAME
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"cannot read manifest {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"manifest {path} is not valid JSON: {e}") from e
        try:
            manifest = cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"invalid manifest {path}:\n{e}") from e
        if manifest.schema_version > SCHEMA_VERSION:
            raise ConfigurationError(
                f"manifest {path} has schema version {manifest.schema_version}; "
                f"this version reads up to {SCHEMA_VERSION}"
            )
        return manifest

    def changed_inputs(self) -> Dict[str, str]:
        """Inputs whose current digest differs from the recorded one."""
        return {
            name: digest
            for name, digest in self.inputs.items()
            if file_digest(name) != digest
        }
