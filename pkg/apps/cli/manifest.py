"""
Run manifests written next to every command's outputs.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from pause_intensity import __version__
from shared.utils import get_environment_info, get_file_hash, save_json_config

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """
    Everything needed to rerun a command: its name, the resolved parameters,
    the seed, and a SHA-256 digest of each output file. Timestamps are left
    out so identical runs produce identical manifests.
    """

    command: str
    params: dict[str, Any]
    seed: Optional[int]
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    environment: dict[str, Any] = field(default_factory=get_environment_info)

    def add_output(self, path: Union[str, Path]) -> None:
        path = Path(path)
        self.outputs[path.name] = get_file_hash(path)

    def write(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        save_json_config(asdict(self), path)
        return path
