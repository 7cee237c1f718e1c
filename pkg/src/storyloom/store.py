"""File-backed document store for domains, spaces, sessions and jobs.

Documents are canonical JSON files under DATA_DIR, one file per id, so a
service restart reproduces every document byte for byte. Writes go
through per-id locks; id generation is a persisted counter, which keeps
artifact ids deterministic for a fresh data directory.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from pathlib import Path

from .domain import REFERENCE_DOMAIN_PATH

KINDS = ("domains", "spaces", "sessions", "jobs")


def canonical_json(doc: object) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class DocumentStore:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        for kind in KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)
        self._counter_lock = threading.Lock()
        self._locks: dict[tuple[str, str], threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _path(self, kind: str, doc_id: str) -> Path:
        if kind not in KINDS:
            raise ValueError(f"unknown document kind {kind!r}")
        return self.root / kind / f"{doc_id}.json"

    def lock(self, kind: str, doc_id: str) -> threading.Lock:
        """Exclusive per-document guard serializing mutations."""
        with self._locks_guard:
            return self._locks[(kind, doc_id)]

    def get(self, kind: str, doc_id: str) -> dict | None:
        path = self._path(kind, doc_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, kind: str, doc_id: str, doc: dict) -> None:
        self._path(kind, doc_id).write_text(canonical_json(doc), encoding="utf-8")

    def delete(self, kind: str, doc_id: str) -> bool:
        path = self._path(kind, doc_id)
        if path.exists():
            path.unlink()
            return True
        return False

    def list_ids(self, kind: str) -> list[str]:
        if kind not in KINDS:
            raise ValueError(f"unknown document kind {kind!r}")
        return sorted(p.stem for p in (self.root / kind).glob("*.json"))

    def next_id(self, kind: str) -> str:
        """Deterministic sequential ids: space-0001, session-0002, ..."""
        singular = kind.rstrip("s")
        counters_path = self.root / "counters.json"
        with self._counter_lock:
            counters = {}
            if counters_path.exists():
                counters = json.loads(counters_path.read_text(encoding="utf-8"))
            counters[kind] = counters.get(kind, 0) + 1
            counters_path.write_text(canonical_json(counters), encoding="utf-8")
            return f"{singular}-{counters[kind]:04d}"

    def ensure_reference_domain(self) -> str:
        """Seed the bundled reference domain (id ``fairytale_forest``)."""
        doc_id = "fairytale_forest"
        if self.get("domains", doc_id) is None:
            doc = json.loads(REFERENCE_DOMAIN_PATH.read_text(encoding="utf-8"))
            self.put("domains", doc_id, doc)
        return doc_id
