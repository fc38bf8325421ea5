"""Signing keys and addresses for ledger transactions (Ed25519)."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

ADDRESS_PREFIX = "ph"


def address_from_pubkey(pubkey: bytes) -> str:
    """Fixed-width address: prefix + 40 hex chars of sha256(pubkey)."""
    return ADDRESS_PREFIX + hashlib.sha256(pubkey).hexdigest()[:40]


def is_address(text: str) -> bool:
    if not isinstance(text, str) or len(text) != len(ADDRESS_PREFIX) + 40:
        return False
    if not text.startswith(ADDRESS_PREFIX):
        return False
    try:
        int(text[len(ADDRESS_PREFIX):], 16)
    except ValueError:
        return False
    return text == text.lower()


def verify(pubkey: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pubkey).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyPair:
    seed: bytes

    def __post_init__(self) -> None:
        if len(self.seed) != 32:
            raise ValueError("Ed25519 seed must be 32 bytes")

    def __repr__(self) -> str:
        return f"KeyPair(address={self.address!r})"

    @classmethod
    def generate(cls) -> KeyPair:
        return cls(os.urandom(32))

    @classmethod
    def from_passphrase(cls, text: str) -> KeyPair:
        """Deterministic key for tests and demos. Not for real funds."""
        return cls(hashlib.sha256(text.encode("utf-8")).digest())

    @cached_property
    def _private(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    @cached_property
    def public_key(self) -> bytes:
        return self._private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    @cached_property
    def address(self) -> str:
        return address_from_pubkey(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def save(self, path: str | os.PathLike[str]) -> None:
        path = Path(path)
        path.write_text(json.dumps({"seed": self.seed.hex(), "address": self.address}) + "\n")
        path.chmod(0o600)

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> KeyPair:
        doc = json.loads(Path(path).read_text())
        return cls(bytes.fromhex(doc["seed"]))
