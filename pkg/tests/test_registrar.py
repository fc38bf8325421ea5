import json

import pytest

from ddns.errors import DuplicateAsset, NotOwner, QuotaExceeded, RemoteMismatch, UnknownAsset, ValidationFailure
from ddns.names import BindingState
from ddns.records import ARecord, Rcode, record_file
from ddns.registrar import RegistrarSession, rpc_envelope
from ddns.store import PinningClient, PinningClientConfig

from fake_pinning import FakePinningService, reference_cid


def test_workflow(session, ledger, store, resolver, other):
    session.register_tld("XXX.")
    session.add_subdomain("xxx", "www")
    with pytest.raises(UnknownAsset):
        session.add_subdomain("xxx", "a.b")  # b.xxx does not exist yet
    session.add_subdomain("xxx", "b")
    session.add_subdomain("xxx", "a.b")
    ledger.produce_block()
    assert {a.path for a in ledger.assets()} == {"XXX", "XXX/WWW", "XXX/B", "XXX/B/A"}

    cid, _ = session.set_record("a.b.xxx.ddns", record_file(ARecord("7.7.7.7")))
    assert cid == reference_cid(b'{"Type":"A","Address":"7.7.7.7"}')
    assert store.stat(cid).pinned_name == "A.B.XXX.DDNS"
    ledger.produce_block()
    assert resolver.resolve("a.b.xxx.ddns").answers[0].data == ARecord("7.7.7.7")

    session.transfer("www.xxx.ddns", other.address)
    ledger.produce_block()
    with pytest.raises(NotOwner):
        session.disable_subdomain("www.xxx.ddns")
    theirs = RegistrarSession(other, ledger, store)
    theirs.disable_subdomain("www.xxx.ddns")
    ledger.produce_block()
    assert ledger.get_binding("XXX/WWW").state is BindingState.DEACTIVATED
    assert resolver.resolve("www.xxx.ddns").rcode == Rcode.NXDOMAIN


def test_errors(session, ledger, other):
    session.register_tld("xxx")
    with pytest.raises(DuplicateAsset):
        session.register_tld("xxx")
    with pytest.raises(ValidationFailure):
        session.set_record("www.xxx.ddns", record_file(ARecord("1.1.1.1")), owner=other.address)
    with pytest.raises(ValidationFailure):
        session.add_subdomain("xxx", "bad-name")
    with pytest.raises(ValidationFailure):
        session.set_record("www.example.com", record_file(ARecord("1.1.1.1")))


def test_add_subdomain_for_another_owner(session, ledger, other):
    session.register_tld("xxx")
    session.add_subdomain("xxx", "shop", owner=other.address)
    ledger.produce_block()
    assert ledger.owner_of("XXX/SHOP") == other.address


def test_rpc_envelope():
    assert rpc_envelope(["abc"]) == {"result": ["abc"], "error": None, "id": "ddns"}
    json.dumps(rpc_envelope(None, {"code": 4}))


def test_set_record_through_pinning_service(owner, ledger, store):
    with FakePinningService(api_key="k") as svc:
        pinning = PinningClient(PinningClientConfig(svc.url, "k"), store)
        session = RegistrarSession(owner, ledger, store, pinning=pinning)
        session.register_tld("xxx")
        cid, _ = session.set_record("xxx.ddns", record_file(ARecord("1.2.3.4")))
        assert svc.names[cid] == "XXX.DDNS"
        assert cid in store

        svc.mode = "mismatch"
        with pytest.raises(RemoteMismatch):
            session.set_record("xxx.ddns", record_file(ARecord("4.3.2.1")))
        # Nothing was submitted for the failed upload.
        assert ledger.mempool_size() == 2


def test_pinning_quota_blocks_publication(owner, ledger, store):
    with FakePinningService(api_key="k") as svc:
        pinning = PinningClient(PinningClientConfig(svc.url, "k", max_files=1), store)
        session = RegistrarSession(owner, ledger, store, pinning=pinning)
        session.register_tld("xxx")
        session.set_record("xxx.ddns", record_file(ARecord("1.2.3.4")))
        with pytest.raises(QuotaExceeded):
            session.set_record("xxx.ddns", record_file(ARecord("4.3.2.1")))
