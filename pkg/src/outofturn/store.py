"""File-backed persistence: sites, templates, user memory, session logs.

Sessions persist as append-only event logs (one JSON object per line) plus
snapshots; recovery replays the log, which doubles as a consistency check of
the session state machine. Unknown ids and corrupted records raise distinct
errors so callers can tell them apart.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterator, Optional

from .errors import CorruptRecord, UnknownRecord


class Store:
    def __init__(self, data_dir: str | os.PathLike):
        self.root = Path(data_dir)
        for sub in ("sites", "templates", "users", "sessions", "traces"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- generic helpers -----------------------------------------------------

    def _write_json(self, path: Path, payload) -> None:
        # Atomic replace so readers never observe a torn write.
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _read_json(self, path: Path, kind: str, record_id: str):
        if not path.exists():
            raise UnknownRecord(f"no {kind} record {record_id!r}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptRecord(f"{kind} record {record_id!r} is corrupt: {exc.msg}") from exc

    # -- sites ---------------------------------------------------------------

    def save_site_doc(self, site_id: str, doc: dict) -> None:
        self._write_json(self.root / "sites" / f"{site_id}.site", doc)

    def load_site_doc(self, site_id: str) -> dict:
        return self._read_json(self.root / "sites" / f"{site_id}.site", "site", site_id)

    def list_sites(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "sites").glob("*.site"))

    # -- templates -----------------------------------------------------------

    def save_templates(self, site_id: str, docs: list[dict]) -> None:
        self._write_json(self.root / "templates" / f"{site_id}.json", docs)

    def load_templates(self, site_id: str) -> list[dict]:
        path = self.root / "templates" / f"{site_id}.json"
        if not path.exists():
            return []
        payload = self._read_json(path, "templates", site_id)
        if not isinstance(payload, list):
            raise CorruptRecord(f"templates record {site_id!r} is not a list")
        return payload

    # -- user memory -----------------------------------------------------------

    def save_user(self, user_id: str, doc: dict) -> None:
        self._write_json(self.root / "users" / f"{user_id}.json", doc)

    def load_user(self, user_id: str) -> Optional[dict]:
        path = self.root / "users" / f"{user_id}.json"
        if not path.exists():
            return None
        return self._read_json(path, "user", user_id)

    # -- session event logs -------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.log"

    def append_event(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"))
        with self._log_path(session_id).open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()

    def read_events(self, session_id: str) -> list[dict]:
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownRecord(f"no session record {session_id!r}")
        events = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorruptRecord(
                    f"session log {session_id!r} line {lineno} is corrupt: {exc.msg}"
                ) from exc
        return events

    def session_exists(self, session_id: str) -> bool:
        return self._log_path(session_id).exists()

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "sessions").glob("*.log"))

    def write_snapshot(self, session_id: str, doc: dict) -> None:
        self._write_json(self.root / "sessions" / f"{session_id}.snapshot.json", doc)

    def read_snapshot(self, session_id: str) -> Optional[dict]:
        path = self.root / "sessions" / f"{session_id}.snapshot.json"
        if not path.exists():
            return None
        return self._read_json(path, "snapshot", session_id)

    # -- exported traces ------------------------------------------------------------

    def save_trace(self, session_id: str, lines: list[dict]) -> None:
        path = self.root / "traces" / f"{session_id}.trace"
        text = "\n".join(json.dumps(line) for line in lines)
        path.write_text(text + "\n", encoding="utf-8")

    def iter_trace_files(self) -> Iterator[Path]:
        return iter(sorted((self.root / "traces").glob("*.trace")))
