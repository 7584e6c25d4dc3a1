"""Run manifests: what a command read, what it wrote, and with which settings.

Every written artifact ``X`` gets ``X.manifest.json``. When a later stage reads
``X`` it checks the recorded hash, so a hand-edited or half-rebuilt input is
caught before it silently skews results.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from heurepo.errors import StaleInputError
from heurepo.io_utils import read_json, sha256_file, write_json


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


@dataclass
class RunManifest:
    command: str
    config: Mapping[str, Any]
    seed: int | None = None
    registry_hash: str | None = None
    tool_version: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    duration_s: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path: str | Path) -> None:
        path = Path(path)
        check_fresh(path)
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[Path(path).name] = sha256_file(path)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("_t0")
        return d

    def write(self, *outputs: str | Path) -> None:
        """Hash ``outputs`` and write a manifest next to each of them."""
        for out in outputs:
            self.add_output(out)
        self.duration_s = round(time.perf_counter() - self._t0, 6)
        for out in outputs:
            write_json(manifest_path(out), self.to_dict())


def check_fresh(path: str | Path) -> None:
    """Raise StaleInputError if ``path`` no longer matches its manifest."""
    path = Path(path)
    mpath = manifest_path(path)
    if not path.is_file() or not mpath.is_file():
        return
    recorded = read_json(mpath).get("outputs", {}).get(path.name)
    if recorded is not None and recorded != sha256_file(path):
        raise StaleInputError(f"{path} changed since it was produced (hash differs from {mpath.name})")
