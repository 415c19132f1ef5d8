"""Single-file, line-delimited persistence for one engine instance.

Line 1 is the store header (format marker + engine configuration); every
following line is one sealed event in canonical record form. A mutating
process takes an advisory lock on the file; read-only invocations do not.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path

from .core import LedgerError
from .engine import Engine, EngineConfig
from .events import ChainVerificationReport, CorruptLog, LedgerEvent, verify_records

STORE_FORMAT = "rcp-ledger/1"

try:
    import fcntl
except ImportError:  # pragma: no cover - non-POSIX fallback
    fcntl = None


@contextmanager
def store_lock(path: str | Path, exclusive: bool = True):
    """Advisory lock over the store; no-op where flock is unavailable."""
    lock_path = Path(str(path) + ".lock")
    handle = open(lock_path, "a+")
    try:
        if fcntl is not None:
            fcntl.flock(handle, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        yield
    finally:
        if fcntl is not None:
            fcntl.flock(handle, fcntl.LOCK_UN)
        handle.close()


def create_store(path: str | Path, config: EngineConfig | None = None) -> Engine:
    path = Path(path)
    if path.exists():
        raise LedgerError(f"store already exists at {path}")
    config = config or EngineConfig()
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": STORE_FORMAT, "config": config.to_payload()}
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    return open_store(path)


def read_store(path: str | Path) -> tuple[EngineConfig, list[str]]:
    """Header config plus raw event lines (undecoded, for verification)."""
    path = Path(path)
    if not path.exists():
        raise LedgerError(f"no store at {path}")
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise CorruptLog(f"store {path} is empty")
    try:
        header = json.loads(lines[0])
        if header.get("format") != STORE_FORMAT:
            raise CorruptLog(f"store {path} has unknown format")
        config = EngineConfig.from_payload(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptLog(f"unreadable store header: {exc}") from exc
    return config, lines[1:]


def open_store(path: str | Path) -> Engine:
    """Rebuild the engine from the log alone and bind appends to the file."""
    path = Path(path)
    config, lines = read_store(path)
    events = [LedgerEvent.from_record(line) for line in lines]
    engine = Engine.replay(events, config)

    def sink(event: LedgerEvent) -> None:
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(event.to_record() + "\n")

    engine.bind_sink(sink)
    return engine


def open_or_create(path: str | Path, config: EngineConfig | None = None) -> Engine:
    path = Path(path)
    if path.exists():
        return open_store(path)
    return create_store(path, config)


def verify_store(path: str | Path) -> ChainVerificationReport:
    _, lines = read_store(path)
    return verify_records(lines)


def default_store_path() -> str:
    return os.environ.get("RCP_STORE", "rcp.store")
