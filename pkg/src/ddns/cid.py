"""Version-0 style content identifiers: base58btc over a sha2-256 multihash."""

from __future__ import annotations

import hashlib

from .errors import EmptyPayload

B58_ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
_B58_INDEX = {c: i for i, c in enumerate(B58_ALPHABET)}

SHA2_256 = 0x12
DIGEST_LEN = 32
CID_LEN = 46

# 64 zeros: binding of a freshly created asset. Not a content id.
SENTINEL_INITIAL = "0" * 64
# "Qm" + 44 zeros: binding of a deactivated asset. Shaped like a content id
# but '0' is outside the base58 alphabet, so it never validates as one.
SENTINEL_DEACTIVATED = "Qm" + "0" * 44


def b58encode(data: bytes) -> str:
    n = int.from_bytes(data, "big")
    out = []
    while n:
        n, rem = divmod(n, 58)
        out.append(B58_ALPHABET[rem])
    pad = len(data) - len(data.lstrip(b"\x00"))
    return "1" * pad + "".join(reversed(out))


def b58decode(text: str) -> bytes:
    n = 0
    for ch in text:
        try:
            n = n * 58 + _B58_INDEX[ch]
        except KeyError:
            raise ValueError(f"invalid base58 character {ch!r}") from None
    pad = len(text) - len(text.lstrip("1"))
    body = n.to_bytes((n.bit_length() + 7) // 8, "big") if n else b""
    return b"\x00" * pad + body


def multihash_sha256(payload: bytes) -> bytes:
    return bytes([SHA2_256, DIGEST_LEN]) + hashlib.sha256(payload).digest()


def compute_cid(payload: bytes) -> str:
    """Return the 46-character ``Qm...`` identifier of ``payload``."""
    if not payload:
        raise EmptyPayload("cannot address an empty payload")
    return b58encode(multihash_sha256(payload))


def is_initial_sentinel(text: str) -> bool:
    return text == SENTINEL_INITIAL


def is_deactivation_sentinel(text: str) -> bool:
    return text == SENTINEL_DEACTIVATED


def is_sentinel(text: str) -> bool:
    return text in (SENTINEL_INITIAL, SENTINEL_DEACTIVATED)


def is_valid_cid(text: str) -> bool:
    """True for syntactically valid content ids; sentinels are never valid."""
    if not isinstance(text, str) or len(text) != CID_LEN or not text.startswith("Qm"):
        return False
    try:
        raw = b58decode(text)
    except ValueError:
        return False
    return len(raw) == DIGEST_LEN + 2 and raw[0] == SHA2_256 and raw[1] == DIGEST_LEN
