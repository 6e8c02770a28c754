"""File-backed persistence for session snapshots.

One JSON document per session under the store root. Writes go through a
temporary file and an atomic rename, so a snapshot on disk is always
complete. Per-session locks serialize writers within a process;
distinct sessions never contend.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

from .errors import ConfigError, SnapshotFormatError, UnknownSessionError

__all__ = ["SessionStore"]

_ID_SAFE = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_")


class SessionStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create session store at '{self.root}': {exc}")
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        """Per-session mutex; the service holds it across load-mutate-save."""
        with self._locks_guard:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = threading.Lock()
                self._locks[session_id] = lock
            return lock

    def _path(self, session_id: str) -> Path:
        if not session_id or any(ch not in _ID_SAFE for ch in session_id):
            raise UnknownSessionError(f"unknown session '{session_id}'")
        return self.root / f"{session_id}.json"

    def save(self, snapshot: dict) -> None:
        """Atomic write: new file first, then rename over the old snapshot."""
        path = self._path(snapshot["id"])
        fd, tmp_name = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(snapshot, handle, ensure_ascii=False, indent=2)
                handle.write("\n")
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise

    def load(self, session_id: str) -> dict:
        path = self._path(session_id)
        if not path.is_file():
            raise UnknownSessionError(f"unknown session '{session_id}'")
        try:
            with path.open(encoding="utf-8") as handle:
                snapshot = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise SnapshotFormatError(f"snapshot '{path}' is unreadable: {exc}")
        if not isinstance(snapshot, dict):
            raise SnapshotFormatError(f"snapshot '{path}' is not a JSON object")
        return snapshot

    def exists(self, session_id: str) -> bool:
        try:
            return self._path(session_id).is_file()
        except UnknownSessionError:
            return False

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json") if not p.name.startswith("."))
