"""Content-addressed storage for record files.

Layout of a store directory::

    <root>/
      index.json               {"format": "ddns-store", "version": 1,
                                "objects": {<cid>: {"size": n, "name": str|null}}}
      objects/<xy>/<cid>       raw payload; <xy> = last two characters of cid

Every write goes to a temporary file first and is moved into place with
``os.replace``, so a crash never leaves a half-written object or index.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import requests

from ._fs import atomic_write
from .cid import compute_cid, is_sentinel, is_valid_cid
from .errors import (
    AuthFailure,
    InvalidCid,
    IntegrityMismatch,
    NetworkFailure,
    NotFound,
    PayloadTooLarge,
    QuotaExceeded,
    RemoteMismatch,
    SentinelCid,
    StorageFailure,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_PAYLOAD = 64 * 1024
INDEX_FORMAT = "ddns-store"
INDEX_VERSION = 1


@dataclass(frozen=True)
class StoredObject:
    cid: str
    data: bytes
    pinned_name: str | None = None


class ContentStore:
    """Local persistent content-addressed store.

    Reads may run concurrently; writes are serialized by an internal lock.
    """

    def __init__(self, root: str | os.PathLike[str], max_payload: int = DEFAULT_MAX_PAYLOAD) -> None:
        self.root = Path(root)
        self.max_payload = max_payload
        self._lock = threading.Lock()
        self._index: dict[str, dict] = {}
        try:
            (self.root / "objects").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(f"cannot create store at {self.root}: {exc}") from exc
        self._load_index()

    @property
    def index_path(self) -> Path:
        return self.root / "index.json"

    def _object_path(self, cid: str) -> Path:
        return self.root / "objects" / cid[-2:] / cid

    def _load_index(self) -> None:
        if not self.index_path.exists():
            return
        try:
            doc = json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"unreadable store index: {exc}") from exc
        if doc.get("format") != INDEX_FORMAT or doc.get("version") != INDEX_VERSION:
            raise StorageFailure(f"unsupported store index header in {self.index_path}")
        self._index = dict(doc.get("objects", {}))

    def _save_index(self) -> None:
        doc = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "objects": self._index}
        atomic_write(self.index_path, json.dumps(doc, sort_keys=True).encode("utf-8"))

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, cid: object) -> bool:
        return cid in self._index

    def cids(self) -> list[str]:
        return sorted(self._index)

    def put(self, payload: bytes, name: str | None = None) -> str:
        if len(payload) > self.max_payload:
            raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {self.max_payload}")
        cid = compute_cid(payload)
        with self._lock:
            entry = self._index.get(cid)
            if entry is not None and self._object_path(cid).exists():
                if name and entry.get("name") != name:
                    entry["name"] = name
                    self._save_index()
                return cid
            try:
                atomic_write(self._object_path(cid), payload)
                self._index[cid] = {"size": len(payload), "name": name}
                self._save_index()
            except OSError as exc:
                raise StorageFailure(f"cannot write {cid}: {exc}") from exc
        return cid

    def get(self, cid: str) -> bytes:
        if is_sentinel(cid):
            raise SentinelCid(f"{cid} is a reserved sentinel, not content")
        if not is_valid_cid(cid):
            raise InvalidCid(f"not a valid content id: {cid!r}")
        try:
            data = self._object_path(cid).read_bytes()
        except FileNotFoundError:
            raise NotFound(cid) from None
        except OSError as exc:
            raise StorageFailure(f"cannot read {cid}: {exc}") from exc
        if not data or compute_cid(data) != cid:
            raise IntegrityMismatch(f"stored bytes for {cid} do not hash to it")
        return data

    def stat(self, cid: str) -> StoredObject:
        data = self.get(cid)
        return StoredObject(cid, data, self._index.get(cid, {}).get("name"))

    def delete(self, cid: str) -> None:
        with self._lock:
            if cid not in self._index:
                raise NotFound(cid)
            self._object_path(cid).unlink(missing_ok=True)
            del self._index[cid]
            self._save_index()

    def fsck(self) -> list[str]:
        """Re-hash every indexed object; return the cids that fail."""
        bad = []
        for cid in self.cids():
            try:
                self.get(cid)
            except (NotFound, IntegrityMismatch, StorageFailure):
                bad.append(cid)
        return bad


@dataclass
class PinningClientConfig:
    endpoint_url: str
    api_key: str
    max_files: int = 500
    timeout: float = 10.0

    def __repr__(self) -> str:
        return f"PinningClientConfig(endpoint_url={self.endpoint_url!r}, max_files={self.max_files})"


class PinningClient:
    """Client for a Pinata-shaped pinning service.

    Uploads go to ``POST {endpoint}/pinning/pinFileToIPFS`` as multipart form
    data with the API key as a bearer token; the service answers with JSON
    holding the content id under ``"IpfsHash"``.  The returned id must match
    the locally computed one.
    """

    def __init__(
        self,
        config: PinningClientConfig,
        store: ContentStore | None = None,
        session: requests.Session | None = None,
    ) -> None:
        self.config = config
        self.store = store
        self.session = session or requests.Session()
        self.pinned: set[str] = set()

    def pin_remote(self, name: str, payload: bytes) -> str:
        cid = compute_cid(payload)
        if cid not in self.pinned and len(self.pinned) >= self.config.max_files:
            raise QuotaExceeded(f"pinning quota of {self.config.max_files} files reached")
        url = self.config.endpoint_url.rstrip("/") + "/pinning/pinFileToIPFS"
        try:
            resp = self.session.post(
                url,
                files={"file": (name, payload, "application/json")},
                data={"pinataMetadata": json.dumps({"name": name})},
                headers={"Authorization": f"Bearer {self.config.api_key}"},
                timeout=self.config.timeout,
            )
        except requests.RequestException as exc:
            raise NetworkFailure(f"pinning request failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"pinning service rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            raise QuotaExceeded("pinning service reports quota exhausted")
        if resp.status_code >= 400:
            raise NetworkFailure(f"pinning service returned HTTP {resp.status_code}")
        try:
            remote = resp.json()["IpfsHash"]
        except (ValueError, KeyError, TypeError) as exc:
            raise RemoteMismatch(f"pinning response lacks IpfsHash: {resp.text[:200]!r}") from exc
        if remote != cid:
            raise RemoteMismatch(f"service pinned {remote}, expected {cid}")
        self.pinned.add(cid)
        if self.store is not None:
            self.store.put(payload, name=name)
        log.info("pinned %s as %s", name, cid)
        return cid
