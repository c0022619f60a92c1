"""Directory-backed store of generated BOMs for a fleet of substations.

Layout: one ``<name>.bom.json`` file per substation plus an ``index.json``
mapping substation names to file, digest, and component count. Index writes
go through a temp file and an atomic rename, so concurrent invocations
cannot corrupt it (last writer wins).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from .cpe import normalize_token
from .serializer import from_json
from .vulnscan import ScanReport, VulnRecord, scan, summarize

INDEX_NAME = "index.json"


class NameCollision(Exception):
    pass


@dataclass(frozen=True)
class FleetEntry:
    name: str
    file: str
    digest: str
    timestamp: str
    components: int


class FleetStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def index_path(self) -> Path:
        return self.root / INDEX_NAME

    def load_index(self) -> dict[str, FleetEntry]:
        if not self.index_path.exists():
            return {}
        raw = json.loads(self.index_path.read_text(encoding="utf-8"))
        return {
            name: FleetEntry(**entry) for name, entry in raw.get("entries", {}).items()
        }

    def _write_index(self, entries: dict[str, FleetEntry]) -> None:
        payload = {"entries": {name: asdict(e) for name, e in sorted(entries.items())}}
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".index-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2)
                handle.write("\n")
            os.replace(tmp, self.index_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def add(self, name: str, bom_bytes: bytes, *, force: bool = False) -> FleetEntry:
        """Store a generated BOM under its substation name.

        Raises NameCollision when the name (or its filesystem-safe form)
        already exists and force is not set.
        """
        token = normalize_token(name)
        if not token:
            raise ValueError(f"substation name {name!r} has no filesystem-safe form")
        self.root.mkdir(parents=True, exist_ok=True)
        entries = self.load_index()
        filename = f"{token}.bom.json"
        if not force:
            if name in entries:
                raise NameCollision(f"substation {name!r} already stored")
            if any(e.file == filename for e in entries.values()):
                raise NameCollision(f"file {filename!r} already used by another substation")

        bom = from_json(bom_bytes)
        (self.root / filename).write_bytes(bom_bytes)
        entry = FleetEntry(
            name=name,
            file=filename,
            digest=hashlib.sha256(bom_bytes).hexdigest(),
            timestamp=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            components=len(bom.components),
        )
        entries = {k: v for k, v in entries.items() if v.file != filename}
        entries[name] = entry
        self._write_index(entries)
        return entry

    def list(self) -> list[FleetEntry]:
        return [entry for _, entry in sorted(self.load_index().items())]

    def remove(self, name: str) -> bool:
        entries = self.load_index()
        entry = entries.pop(name, None)
        if entry is None:
            return False
        path = self.root / entry.file
        if path.exists():
            path.unlink()
        self._write_index(entries)
        return True

    def load_bom_bytes(self, name: str) -> bytes:
        entries = self.load_index()
        if name not in entries:
            raise KeyError(f"substation {name!r} not in fleet")
        return (self.root / entries[name].file).read_bytes()


def scan_all(store: FleetStore, dataset: list[VulnRecord]) -> list[ScanReport]:
    """Scan every stored substation and order reports by max severity
    (descending), breaking ties by substation name."""
    reports = []
    for entry in store.list():
        bom = from_json(store.load_bom_bytes(entry.name))
        findings = scan(bom, dataset)
        reports.append(summarize(findings, bom, dataset))
    reports.sort(
        key=lambda r: (-(r.max_severity.rank if r.max_severity else -1), r.substation)
    )
    return reports
