"""JSONL dataset manifests: one record per stored view or scene frame."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import DatasetError

KINDS = ("multiview", "scene")


@dataclass(frozen=True)
class ManifestRecord:
    kind: str  # "multiview" | "scene"
    object_id: int
    index: int  # view_id for multiview, frame_id for scene
    image_path: str
    mask_path: str

    def to_json(self) -> str:
        key = "view_id" if self.kind == "multiview" else "frame_id"
        return json.dumps(
            {
                "kind": self.kind,
                "object_id": self.object_id,
                key: self.index,
                "image_path": self.image_path,
                "mask_path": self.mask_path,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        d = json.loads(line)
        kind = d.get("kind")
        if kind not in KINDS:
            raise DatasetError(f"unknown manifest kind: {kind!r}")
        key = "view_id" if kind == "multiview" else "frame_id"
        if key not in d:
            raise DatasetError(f"manifest record missing {key}: {line.strip()}")
        return cls(kind, int(d["object_id"]), int(d[key]), d["image_path"], d["mask_path"])


def write_manifest(path, records: list[ManifestRecord]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_manifest(path) -> list[ManifestRecord]:
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"manifest not found: {p}")
    records = []
    with open(p) as f:
        for line in f:
            if line.strip():
                records.append(ManifestRecord.from_json(line))
    return records


def group_records(records: list[ManifestRecord], kind: str) -> dict[int, list[ManifestRecord]]:
    """Records of one kind grouped by object_id, each group sorted by index."""
    groups: dict[int, list[ManifestRecord]] = {}
    for rec in records:
        if rec.kind == kind:
            groups.setdefault(rec.object_id, []).append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: r.index)
    return groups


MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class DatasetSource:
    """A dataset directory plus its parsed manifest."""

    root: Path
    records: tuple[ManifestRecord, ...]

    @classmethod
    def open(cls, root) -> "DatasetSource":
        root = Path(root)
        return cls(root=root, records=tuple(read_manifest(root / MANIFEST_NAME)))

    def groups(self, kind: str) -> dict[int, list[ManifestRecord]]:
        return group_records(list(self.records), kind)
