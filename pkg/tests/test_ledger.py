import dataclasses
import time
from decimal import Decimal
from fractions import Fraction

import pytest

from ddns.cid import compute_cid
from ddns.errors import (
    BadNonce,
    BadSignature,
    ChainCorrupted,
    DuplicateAsset,
    InsufficientFunds,
    NotOwner,
    UnknownAsset,
    ValidationFailure,
)
from ddns.keys import KeyPair, address_from_pubkey, is_address, verify
from ddns.ledger import (
    Block,
    BlockScheduler,
    Genesis,
    Ledger,
    LedgerParams,
    LedgerState,
    Tx,
    TxKind,
    capacity_tps,
    serialized_size,
)
from ddns.names import Binding, BindingState

CID = compute_cid(b"records")


def test_keys(tmp_path, owner):
    assert is_address(owner.address) and owner.address.startswith("ph") and len(owner.address) == 42
    assert address_from_pubkey(owner.public_key) == owner.address
    sig = owner.sign(b"msg")
    assert verify(owner.public_key, sig, b"msg")
    assert not verify(owner.public_key, sig, b"other")
    owner.save(tmp_path / "k.json")
    assert KeyPair.load(tmp_path / "k.json").address == owner.address
    assert (tmp_path / "k.json").stat().st_mode & 0o777 == 0o600
    assert KeyPair.generate().address != KeyPair.generate().address


def test_capacity():
    assert capacity_tps(LedgerParams()) == Fraction(4 * 1024 * 1024 // 546, 15)
    assert capacity_tps(LedgerParams(block_size_bytes=5460, block_interval_s=1)) == 10
    with pytest.raises(ValidationFailure):
        LedgerParams(block_interval_s=0)


def test_transaction_sizes_are_calibrated(ledger, owner):
    ledger.create_root_asset("XXX", owner.address, owner)
    ledger.create_sub_asset("XXX", "WWW", owner.address, owner)
    ledger.set_binding("XXX/WWW", Binding.active(CID), owner)
    assert [serialized_size(tx) for tx in ledger.mempool()][2] == 546


def test_register_and_bind_flow(ledger, owner, other):
    ledger.create_root_asset("XXX", owner.address, owner)
    ledger.create_sub_asset("XXX", "WWW", other.address, owner)
    with pytest.raises(UnknownAsset):
        ledger.get_asset("XXX")  # not confirmed yet
    block = ledger.produce_block()
    assert block.height == 1 and len(block.txs) == 2
    assert ledger.owner_of("XXX/WWW") == other.address
    assert ledger.get_binding("XXX/WWW") == Binding.initial()
    assert ledger.balance(owner.address) == Decimal("9.8")
    assert ledger.burned() == Decimal("0.2")

    ledger.set_binding("XXX/WWW", Binding.active(CID), other)
    ledger.produce_block()
    assert ledger.get_binding("XXX/WWW") == Binding.active(CID)
    assert ledger.balance(other.address) == Decimal("9.9")


def test_errors_at_submission(ledger, owner, other):
    ledger.create_root_asset("XXX", owner.address, owner)
    with pytest.raises(DuplicateAsset):
        ledger.create_root_asset("XXX", other.address, other)
    with pytest.raises(NotOwner):
        ledger.create_sub_asset("XXX", "WWW", other.address, other)
    with pytest.raises(UnknownAsset):
        ledger.set_binding("YYY", Binding.deactivated(), owner)
    with pytest.raises(ValidationFailure):
        ledger.set_binding("XXX", Binding.initial(), owner)
    with pytest.raises(ValidationFailure):
        ledger.create_root_asset("XXX/WWW", owner.address, owner)
    with pytest.raises(ValidationFailure):
        ledger.create_root_asset("NEW", "not-an-address", owner)
    assert ledger.mempool_size() == 1


def test_insufficient_funds(owner):
    ledger = Ledger(Genesis(LedgerParams(), {owner.address: Decimal("0.15")}))
    ledger.create_root_asset("AAA", owner.address, owner)
    with pytest.raises(InsufficientFunds):
        ledger.create_root_asset("BBB", owner.address, owner)
    # Transfers are free, so a broke owner can still hand assets over.
    ledger.transfer_ownership("AAA", KeyPair.from_passphrase("x").address, owner)
    ledger.produce_block()
    assert ledger.balance(owner.address) == Decimal("0.05")


def test_transfer_changes_who_may_mutate(ledger, owner, other):
    ledger.create_root_asset("XXX", owner.address, owner)
    ledger.transfer_ownership("XXX", other.address, owner)
    with pytest.raises(NotOwner):
        ledger.set_binding("XXX", Binding.deactivated(), owner)
    ledger.set_binding("XXX", Binding.deactivated(), other)
    ledger.produce_block()
    assert ledger.owner_of("XXX") == other.address
    assert ledger.get_binding("XXX").state is BindingState.DEACTIVATED


def _raw_tx(key, nonce, **kw):
    return Tx(kind=TxKind.CREATE_ROOT, path=kw.pop("path", "ROOT"), signer=key.address, pubkey=key.public_key.hex(),
              nonce=nonce, owner=key.address, fee=Decimal("0.1"), **kw).signed(key)


def test_signature_and_nonce_checks(ledger, owner, other):
    tx = _raw_tx(owner, 1)
    forged = dataclasses.replace(tx, path="OTHER")
    with pytest.raises(BadSignature):
        ledger.submit(forged)
    stolen = dataclasses.replace(tx, pubkey=other.public_key.hex())
    with pytest.raises(BadSignature):
        ledger.submit(stolen)
    with pytest.raises(BadNonce):
        ledger.submit(_raw_tx(owner, 2))
    ledger.submit(tx)
    with pytest.raises(BadNonce):
        ledger.submit(tx)  # replay
    ledger.produce_block()
    with pytest.raises(BadNonce):
        ledger.submit(tx)


def test_tx_json_round_trip(owner):
    tx = _raw_tx(owner, 1)
    assert Tx.from_json(tx.to_json()) == tx
    assert Tx.from_json(tx.to_json()).txid == tx.txid


def test_blocks_pack_fifo_and_respect_size(owner):
    params = LedgerParams(block_size_bytes=546 * 3 + 10)
    ledger = Ledger(Genesis(params, {owner.address: Decimal(100)}))
    ledger.create_root_asset("XXX", owner.address, owner)
    ledger.create_sub_asset("XXX", "WWW", owner.address, owner)
    ledger.produce_block()
    txids = [ledger.set_binding("XXX/WWW", Binding.active(compute_cid(b"%d" % i)), owner) for i in range(7)]
    packed = []
    while ledger.mempool_size():
        block = ledger.produce_block()
        assert block.total_bytes <= params.block_size_bytes
        packed.append([tx.txid for tx in block.txs])
    assert [len(b) for b in packed] == [3, 3, 1]
    assert sum(packed, []) == txids
    assert ledger.get_binding("XXX/WWW") == Binding.active(compute_cid(b"6"))


def test_state_json_round_trip(ledger, owner):
    ledger.create_root_asset("XXX", owner.address, owner)
    ledger.produce_block()
    state = ledger.state()
    again = LedgerState.from_json(state.to_json())
    assert again.state_hash() == state.state_hash()
    assert again.total_supply() == Decimal(20)
    assert again.burned == Decimal("0.1")


def test_apply_block_rejects_tampering(genesis, owner):
    a = Ledger(genesis)
    a.create_root_asset("XXX", owner.address, owner)
    good = a.produce_block()

    b = Ledger(genesis)
    with pytest.raises(ChainCorrupted):
        b.apply_block(dataclasses.replace(good, prev_hash="0" * 64))
    with pytest.raises(ChainCorrupted):
        b.apply_block(dataclasses.replace(good, height=2))
    with pytest.raises(ChainCorrupted):
        b.apply_block(dataclasses.replace(good, total_bytes=good.total_bytes + 1))
    forged = dataclasses.replace(good.txs[0], owner=KeyPair.from_passphrase("thief").address)
    with pytest.raises(ChainCorrupted):
        b.apply_block(dataclasses.replace(good, txs=(forged,)))
    b.apply_block(good)
    assert b.state_hash() == a.state_hash()
    assert Block.from_json(good.to_json()) == good


def test_listeners_see_blocks(ledger, owner):
    seen = []
    ledger.add_listener(seen.append)
    ledger.add_listener(lambda block: 1 / 0)  # a failing listener is contained
    ledger.create_root_asset("XXX", owner.address, owner)
    block = ledger.produce_block()
    assert seen == [block]


def test_scheduler_produces_blocks(ledger, owner):
    scheduler = BlockScheduler(ledger, interval=0.05)
    scheduler.start()
    try:
        ledger.create_root_asset("XXX", owner.address, owner)
        deadline = time.monotonic() + 5
        while ledger.height == 0 and time.monotonic() < deadline:
            time.sleep(0.02)
    finally:
        scheduler.stop()
        scheduler.join(2)
    assert ledger.height == 1
    assert ledger.owner_of("XXX") == owner.address
