"""
Dataset manifest: a JSON document naming the atlas files and every case.

Example::

    {
        "atlas": {"volume": "atlas/volume.mvol", "mask": "atlas/mask.mmsk", "mesh": "atlas/mesh.obj"},
        "cases": [
            {"case_id": "case000", "volume": "cases/case000/volume.mvol",
             "mask": "cases/case000/mask.mmsk", "mesh": "cases/case000/mesh.obj"}
        ],
        "seed": 0,
        "split_fractions": [0.7, 0.2, 0.1]
    }

Relative paths are resolved against the manifest's directory.
"""
import logging
import math
from os import PathLike
from pathlib import Path
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.utilities.config_parsing import parse_config

__all__ = [
    "AtlasRecord",
    "CaseRecord",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",
]

logger = logging.getLogger(__name__)


def _resolve(path: Path | None, base_dir: Path) -> Path | None:
    if path is None or path.is_absolute():
        return path
    return base_dir / path


class AtlasRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    volume: Path
    mask: Path
    mesh: Path

    def resolved(self, base_dir: Path) -> Self:
        return type(self)(volume=_resolve(self.volume, base_dir), mask=_resolve(self.mask, base_dir), mesh=_resolve(self.mesh, base_dir))

    def paths(self) -> list[Path]:
        return [self.volume, self.mask, self.mesh]


class CaseRecord(BaseModel):
    """
    One patient volume with its optional ground truth (patient-space mask and mesh, atlas-grid field)
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    case_id: str = Field(min_length=1)
    volume: Path
    mask: Path | None = None
    mesh: Path | None = None
    field: Path | None = None

    def resolved(self, base_dir: Path) -> Self:
        return self.model_copy(update={
            name: _resolve(getattr(self, name), base_dir) for name in ("volume", "mask", "mesh", "field")
        })

    def paths(self) -> list[Path]:
        return [path for path in (self.volume, self.mask, self.mesh, self.field) if path is not None]


class DatasetManifest(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    atlas: AtlasRecord
    cases: list[CaseRecord]
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.7, 0.2, 0.1)

    @field_validator("split_fractions")
    @classmethod
    def validate_split_fractions(cls, fractions: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(fraction < 0 for fraction in fractions):
            raise ValueError(f"Split fractions must be non-negative, got {fractions}")
        if not math.isclose(sum(fractions), 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"Split fractions must sum to 1, got {fractions}")
        return fractions

    @model_validator(mode="after")
    def validate_case_ids(self) -> Self:
        identifiers = [case.case_id for case in self.cases]
        duplicates = sorted({identifier for identifier in identifiers if identifiers.count(identifier) > 1})
        if duplicates:
            raise ValueError(f"Duplicate case IDs: {duplicates}")
        return self

    def resolved(self, base_dir: str | PathLike) -> Self:
        base_dir = Path(base_dir)
        return self.model_copy(update={
            "atlas": self.atlas.resolved(base_dir),
            "cases": [case.resolved(base_dir) for case in self.cases],
        })

    def missing_files(self) -> list[Path]:
        paths = self.atlas.paths() + [path for case in self.cases for path in case.paths()]
        return [path for path in paths if not path.is_file()]

    def case(self, case_id: str) -> CaseRecord:
        for case in self.cases:
            if case.case_id == case_id:
                return case
        raise KeyError(f"No case '{case_id}' in the manifest")


def load_manifest(path: str | PathLike) -> DatasetManifest:
    """
    Parse a manifest, resolve its relative paths and check that every referenced file exists

    :param path: The manifest file
    :return: The manifest with absolute paths
    """
    path = Path(path)
    manifest = parse_config(path.read_text(encoding="utf-8"), DatasetManifest).resolved(path.parent)
    if missing := manifest.missing_files():
        raise FileNotFoundError(f"{path}: {len(missing)} referenced file(s) missing, first: {missing[0]}")
    logger.debug("Loaded manifest %s with %d cases", path, len(manifest.cases))
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | PathLike) -> None:
    Path(path).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
