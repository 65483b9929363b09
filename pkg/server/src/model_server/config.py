"""Server configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

ALL_ENDPOINTS = ("depth", "segment", "inpaint", "pair", "describe", "detect")


def default_schema_dir() -> Path:
    """Locate the shared wire-protocol schemas.

    The schema files are the single source of truth for both the engine and
    this server and are checked in once at the repository root. Resolution
    order: MODEL_SERVER_SCHEMA_DIR, then `schemas/` walking up from this file.
    """
    env = os.environ.get("MODEL_SERVER_SCHEMA_DIR", "")
    if env:
        return Path(env)
    here = Path(__file__).resolve()
    for parent in here.parents:
        cand = parent / "schemas"
        if (cand / "depth_request.json").is_file():
            return cand
    raise FileNotFoundError(
        "could not locate the shared schemas/ directory; "
        "set MODEL_SERVER_SCHEMA_DIR"
    )


@dataclass(frozen=True)
class ServerConfig:
    port: int = 8040
    endpoints: tuple[str, ...] = ALL_ENDPOINTS
    models: dict = field(default_factory=dict)  # endpoint -> model identifier
    fallback: bool = True
    schema_dir: Path | None = None

    def __post_init__(self):
        unknown = set(self.endpoints) - set(ALL_ENDPOINTS)
        if unknown:
            raise ValueError(f"unknown endpoints: {sorted(unknown)}")
        if not (0 < self.port < 65536):
            raise ValueError("port out of range")

    def resolved_schema_dir(self) -> Path:
        return Path(self.schema_dir) if self.schema_dir else default_schema_dir()
