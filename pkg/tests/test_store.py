import json
import threading

import pytest

from ddns.cid import SENTINEL_DEACTIVATED, SENTINEL_INITIAL
from ddns.errors import (
    AuthFailure,
    EmptyPayload,
    IntegrityMismatch,
    InvalidCid,
    NetworkFailure,
    NotFound,
    PayloadTooLarge,
    QuotaExceeded,
    RemoteMismatch,
    SentinelCid,
    StorageFailure,
)
from ddns.store import ContentStore, PinningClient, PinningClientConfig

from fake_pinning import FakePinningService, reference_cid


def test_put_get_and_idempotence(store):
    cid = store.put(b"payload", name="WWW.XXX.DDNS")
    assert cid == reference_cid(b"payload")
    assert store.put(b"payload") == cid
    assert len(store) == 1 and cid in store
    assert store.get(cid) == b"payload"
    assert store.stat(cid).pinned_name == "WWW.XXX.DDNS"


def test_layout_on_disk(tmp_path):
    store = ContentStore(tmp_path / "s")
    cid = store.put(b"abc")
    assert (tmp_path / "s" / "objects" / cid[-2:] / cid).read_bytes() == b"abc"
    index = json.loads((tmp_path / "s" / "index.json").read_text())
    assert index["format"] == "ddns-store" and index["version"] == 1
    assert index["objects"][cid] == {"size": 3, "name": None}


def test_reopen_sees_existing_objects(tmp_path):
    cid = ContentStore(tmp_path / "s").put(b"persist me")
    again = ContentStore(tmp_path / "s")
    assert again.cids() == [cid]
    assert again.get(cid) == b"persist me"


def test_errors(store):
    with pytest.raises(EmptyPayload):
        store.put(b"")
    with pytest.raises(PayloadTooLarge):
        store.put(b"x" * (64 * 1024 + 1))
    with pytest.raises(SentinelCid):
        store.get(SENTINEL_DEACTIVATED)
    with pytest.raises(SentinelCid):
        store.get(SENTINEL_INITIAL)
    with pytest.raises(InvalidCid):
        store.get("QmNope")
    with pytest.raises(NotFound):
        store.get(reference_cid(b"never stored"))


def test_corruption_is_detected(tmp_path):
    store = ContentStore(tmp_path / "s")
    good, bad = store.put(b"good"), store.put(b"bad")
    (tmp_path / "s" / "objects" / bad[-2:] / bad).write_bytes(b"evil")
    with pytest.raises(IntegrityMismatch):
        store.get(bad)
    assert store.fsck() == [bad]
    (tmp_path / "s" / "objects" / good[-2:] / good).unlink()
    assert store.fsck() == sorted([good, bad])
    # A put of the original bytes repairs the missing object.
    store.put(b"good")
    assert store.get(good) == b"good"


def test_delete(store):
    cid = store.put(b"gone soon")
    store.delete(cid)
    assert cid not in store
    with pytest.raises(NotFound):
        store.get(cid)
    with pytest.raises(NotFound):
        store.delete(cid)


def test_unreadable_index(tmp_path):
    (tmp_path / "s").mkdir()
    (tmp_path / "s" / "index.json").write_text("{oops")
    with pytest.raises(StorageFailure):
        ContentStore(tmp_path / "s")


def test_concurrent_puts(store):
    payloads = [b"item-%d" % i for i in range(200)]
    threads = [threading.Thread(target=lambda chunk=payloads[i::8]: [store.put(p) for p in chunk]) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 200
    assert store.fsck() == []
    assert sorted(ContentStore(store.root).cids()) == sorted(reference_cid(p) for p in payloads)


# -- pinning ------------------------------------------------------------------


@pytest.fixture
def pinning_service():
    with FakePinningService(api_key="secret") as svc:
        yield svc


def client(svc, store=None, **kw) -> PinningClient:
    return PinningClient(PinningClientConfig(svc.url, kw.pop("api_key", "secret"), **kw), store)


def test_pin_remote_uploads_and_stores_locally(pinning_service, store):
    payload = b'{"Type":"A","Address":"1.2.3.4"}'
    cid = client(pinning_service, store).pin_remote("WWW.XXX.DDNS", payload)
    assert cid == reference_cid(payload)
    assert pinning_service.pins[cid] == payload
    assert pinning_service.names[cid] == "WWW.XXX.DDNS"
    assert store.get(cid) == payload


def test_pin_rejected_credentials(pinning_service):
    with pytest.raises(AuthFailure):
        client(pinning_service, api_key="wrong").pin_remote("n", b"x")


def test_pin_remote_mismatch(pinning_service, store):
    pinning_service.mode = "mismatch"
    with pytest.raises(RemoteMismatch):
        client(pinning_service, store).pin_remote("n", b"x")
    assert len(store) == 0


def test_service_side_quota_and_failures(pinning_service):
    pinning_service.mode = "quota"
    with pytest.raises(QuotaExceeded):
        client(pinning_service).pin_remote("n", b"x")
    pinning_service.mode = "broken"
    with pytest.raises(NetworkFailure):
        client(pinning_service).pin_remote("n", b"x")


def test_client_quota_of_500_files(pinning_service):
    c = client(pinning_service)
    for i in range(500):
        c.pin_remote(f"f{i}", b"file %d" % i)
    # Re-pinning something already pinned does not count against the quota.
    c.pin_remote("f0", b"file 0")
    requests_before = pinning_service.requests
    with pytest.raises(QuotaExceeded):
        c.pin_remote("f500", b"file 500")
    assert pinning_service.requests == requests_before


def test_unreachable_service():
    c = PinningClient(PinningClientConfig("http://127.0.0.1:9", "k", timeout=1))
    with pytest.raises(NetworkFailure):
        c.pin_remote("n", b"x")


def test_config_repr_hides_the_key():
    assert "supersecret" not in repr(PinningClientConfig("https://pin.example", "supersecret"))
