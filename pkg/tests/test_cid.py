import hashlib

import base58
import pytest
from hypothesis import given, strategies as st

from ddns.cid import (
    SENTINEL_DEACTIVATED,
    SENTINEL_INITIAL,
    b58decode,
    b58encode,
    compute_cid,
    is_deactivation_sentinel,
    is_initial_sentinel,
    is_sentinel,
    is_valid_cid,
)
from ddns.errors import EmptyPayload


def reference(payload: bytes) -> str:
    return base58.b58encode(b"\x12\x20" + hashlib.sha256(payload).digest()).decode()


@pytest.mark.parametrize(
    "payload, cid",
    [
        (b'{"Type":"A","Address":"1.2.3.4"}', "QmR3HMw7AAVyQTRP2E9yMhSqt4LRXEakKzXcbc4nPFPZ3X"),
        (b'{"Type":"A","Address":"192.168.1.1"}', "QmQWq7g3huwNT2zpq1KrHDRwePahPvN1fEHWPe44S4XeLi"),
        (b"hello world", "QmaozNR7DZHQK1ZcU9p7QdrshMvXqWK6gpu5rmrkPdT3L4"),
    ],
)
def test_known_vectors(payload, cid):
    assert compute_cid(payload) == cid == reference(payload)


@given(st.binary(min_size=1, max_size=4096))
def test_cid_matches_reference_encoder(payload):
    cid = compute_cid(payload)
    assert cid == reference(payload)
    assert len(cid) == 46 and cid.startswith("Qm")
    assert is_valid_cid(cid)


@given(st.binary(max_size=64))
def test_base58_round_trip_and_agrees_with_reference(data):
    text = b58encode(data)
    assert text == base58.b58encode(data).decode()
    assert b58decode(text) == data


def test_empty_payload_has_no_cid():
    with pytest.raises(EmptyPayload):
        compute_cid(b"")


def test_sentinels_are_recognised_and_never_valid():
    assert is_initial_sentinel(SENTINEL_INITIAL) and is_sentinel(SENTINEL_INITIAL)
    assert is_deactivation_sentinel(SENTINEL_DEACTIVATED) and is_sentinel(SENTINEL_DEACTIVATED)
    assert len(SENTINEL_DEACTIVATED) == 46
    assert not is_valid_cid(SENTINEL_INITIAL)
    assert not is_valid_cid(SENTINEL_DEACTIVATED)


@pytest.mark.parametrize(
    "text",
    ["", "Qm", "Qm" + "1" * 44, "Zm" + reference(b"x")[2:], reference(b"x")[:-1], reference(b"x") + "a", "QmI" + "a" * 43],
)
def test_invalid_cids(text):
    assert not is_valid_cid(text)
