"""Content-addressed artifact store backing the pipeline and the API.

Objects are immutable: an artifact's payload lands at a path derived from its
configuration hash, the manifest maps logical names to the current object,
and rewriting identical bytes is a no-op. Attempting to change the bytes of
an existing object is a defect and raises.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(obj) -> str:
    """Stable hash of a JSON-serializable configuration."""
    return sha256_bytes(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())[:16]


class StoreError(Exception):
    pass


@dataclass
class ArtifactEntry:
    kind: str
    path: str  # relative to the store root
    sha256: str
    config_hash: str


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        self.objects = self.root / "objects"
        self.objects.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "manifest.json"
        self.manifest: dict[str, ArtifactEntry] = {}
        if self._manifest_path.exists():
            raw = json.loads(self._manifest_path.read_text())
            self.manifest = {name: ArtifactEntry(**entry) for name, entry in raw.items()}

    def _save_manifest(self) -> None:
        payload = {name: vars(entry) for name, entry in sorted(self.manifest.items())}
        self._manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True))

    def put(self, name: str, kind: str, payload: bytes, cfg_hash: str) -> ArtifactEntry:
        digest = sha256_bytes(payload)
        suffix = Path(name).suffix or {"json": ".json", "csv": ".csv"}.get(kind, "")
        rel = f"objects/{cfg_hash}_{name}" + ("" if name.endswith(suffix) else suffix)
        target = self.root / rel
        if target.exists():
            existing = sha256_file(target)
            if existing != digest:
                raise StoreError(f"artifact object {rel} exists with different content")
        else:
            tmp = target.with_suffix(target.suffix + ".tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, target)
        entry = ArtifactEntry(kind=kind, path=rel, sha256=digest, config_hash=cfg_hash)
        self.manifest[name] = entry
        self._save_manifest()
        return entry

    def put_file(self, name: str, kind: str, src, cfg_hash: str) -> ArtifactEntry:
        return self.put(name, kind, Path(src).read_bytes(), cfg_hash)

    def has(self, name: str) -> bool:
        return name in self.manifest

    def entry(self, name: str) -> ArtifactEntry:
        if name not in self.manifest:
            raise KeyError(name)
        return self.manifest[name]

    def path(self, name: str) -> Path:
        return self.root / self.entry(name).path

    def read_bytes(self, name: str) -> bytes:
        return self.path(name).read_bytes()

    def read_json(self, name: str):
        return json.loads(self.read_bytes(name).decode())

    def remove(self, name: str) -> None:
        """Drop an artifact (used only to clean up a failed pipeline stage)."""
        entry = self.manifest.pop(name, None)
        if entry is not None:
            target = self.root / entry.path
            if target.exists():
                target.unlink()
            self._save_manifest()

    def verify(self) -> list[str]:
        """Names whose checksum no longer matches the stored object."""
        bad = []
        for name, entry in self.manifest.items():
            target = self.root / entry.path
            if not target.exists() or sha256_file(target) != entry.sha256:
                bad.append(name)
        return bad
