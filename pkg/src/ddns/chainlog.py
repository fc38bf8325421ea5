"""On-disk chain: an append-only block log plus a state snapshot.

Directory layout::

    blocks.jsonl   line 1: {"format": "ddns-blocklog", "version": 1, "genesis": {...}}
                   line n: one block per line, transactions in full
    state.json     {"format": "ddns-state", "version": 1, "height": h,
                    "block_hash": ..., "state_hash": ..., "state": {...}}
    chain.lock     advisory lock serializing writers across processes

Several processes may share a chain directory.  A writer takes the lock,
pulls blocks appended by others, then appends its own.  Readers never lock;
they only consume complete lines.
"""

from __future__ import annotations

import contextlib
import fcntl
import json
import logging
import os
import threading
from pathlib import Path
from typing import Iterator

from ._fs import atomic_write
from .errors import ChainCorrupted
from .ledger import Block, Genesis, Ledger, LedgerState

log = logging.getLogger(__name__)

LOG_FORMAT = "ddns-blocklog"
STATE_FORMAT = "ddns-state"
VERSION = 1


class ChainLog:
    def __init__(self, directory: str | os.PathLike[str]) -> None:
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / "blocks.jsonl"
        self.state_path = self.dir / "state.json"
        self.lock_path = self.dir / "chain.lock"
        self._offset = 0
        self._thread_lock = threading.RLock()
        self._lock_depth = 0
        self._lock_fh = None

    def exists(self) -> bool:
        return self.log_path.exists()

    def create(self, genesis: Genesis) -> bool:
        """Write the log header unless a log already exists. True if created."""
        header = {"format": LOG_FORMAT, "version": VERSION, "genesis": genesis.to_json()}
        with self.locked():
            if self.log_path.exists():
                return False
            atomic_write(self.log_path, (json.dumps(header, sort_keys=True) + "\n").encode())
            return True

    def read_genesis(self) -> Genesis:
        with self.log_path.open("rb") as fh:
            line = fh.readline()
        try:
            header = json.loads(line)
        except ValueError as exc:
            raise ChainCorrupted(f"unreadable block log header: {exc}") from exc
        if header.get("format") != LOG_FORMAT or header.get("version") != VERSION:
            raise ChainCorrupted(f"unsupported block log header in {self.log_path}")
        return Genesis.from_json(header["genesis"])

    @contextlib.contextmanager
    def locked(self) -> Iterator[None]:
        with self._thread_lock:
            if self._lock_depth == 0:
                self._lock_fh = open(self.lock_path, "a+")
                fcntl.flock(self._lock_fh, fcntl.LOCK_EX)
            self._lock_depth += 1
            try:
                yield
            finally:
                self._lock_depth -= 1
                if self._lock_depth == 0:
                    fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
                    self._lock_fh.close()
                    self._lock_fh = None

    def _iter_from(self, offset: int) -> Iterator[tuple[int, Block]]:
        with self.log_path.open("rb") as fh:
            fh.seek(offset)
            if offset == 0:
                header = fh.readline()
                if not header.endswith(b"\n"):
                    return
            while True:
                line = fh.readline()
                if not line.endswith(b"\n"):
                    # Partial line: a writer is mid-append.
                    return
                try:
                    block = Block.from_json(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise ChainCorrupted(f"unreadable block in {self.log_path}: {exc}") from exc
                yield fh.tell(), block

    def read_all(self) -> list[Block]:
        return [block for _, block in self._iter_from(0)]

    def read_new(self) -> Iterator[Block]:
        """Yield blocks appended since the last call, advancing the cursor."""
        for end, block in self._iter_from(self._offset):
            self._offset = end
            yield block

    def append(self, block: Block, state: LedgerState) -> None:
        line = (json.dumps(block.to_json(), sort_keys=True, separators=(",", ":")) + "\n").encode()
        with self.locked():
            with self.log_path.open("ab") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._offset = self.log_path.stat().st_size
            self.write_snapshot(block, state)

    def write_snapshot(self, block: Block | None, state: LedgerState) -> None:
        doc = {
            "format": STATE_FORMAT,
            "version": VERSION,
            "height": state.height,
            "block_hash": block.hash if block else None,
            "state_hash": state.state_hash(),
            "state": state.to_json(),
        }
        atomic_write(self.state_path, json.dumps(doc, sort_keys=True).encode())

    def read_snapshot(self) -> tuple[dict, LedgerState] | None:
        try:
            doc = json.loads(self.state_path.read_text())
        except (OSError, ValueError):
            return None
        if doc.get("format") != STATE_FORMAT or doc.get("version") != VERSION:
            return None
        state = LedgerState.from_json(doc["state"])
        if state.state_hash() != doc.get("state_hash"):
            log.warning("state snapshot hash mismatch; ignoring snapshot")
            return None
        return doc, state


def open_ledger(directory: str | os.PathLike[str], genesis: Genesis | None = None, *, use_snapshot: bool = True) -> Ledger:
    """Open (or create) a persistent ledger in ``directory``.

    An existing log's genesis wins over ``genesis``.  With ``use_snapshot``
    the stored state is adopted when it matches a block in the log; otherwise
    every block is re-executed from genesis.
    """
    chain = ChainLog(directory)
    if not chain.exists():
        chain.create(genesis or Genesis())
    stored = chain.read_genesis()
    if genesis is not None and genesis.hash != stored.hash:
        log.warning("chain in %s has a different genesis than configured; using the chain's", directory)
    ledger = Ledger(stored, chain=chain)
    blocks = list(chain.read_new())
    snap = chain.read_snapshot() if use_snapshot else None
    if snap is not None:
        doc, state = snap
        h = doc["height"]
        if 0 < h <= len(blocks) and blocks[h - 1].hash == doc["block_hash"]:
            ledger.restore(state, blocks[:h])
            ledger.replay_blocks(blocks[h:])
            return ledger
    ledger.replay_blocks(blocks)
    return ledger


def replay(directory: str | os.PathLike[str]) -> Ledger:
    """Re-execute the whole block log from genesis, ignoring any snapshot."""
    chain = ChainLog(directory)
    ledger = Ledger(chain.read_genesis())
    ledger.replay_blocks(chain.read_all())
    return ledger
