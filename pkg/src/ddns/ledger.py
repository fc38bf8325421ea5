"""Simulated asset ledger for domain names.

Domain assets follow these rules: quantity 1, never reissuable, no expiry,
creation and modification each cost a fixed fee (burned), and every mutation
is signed by the current owner.  Transactions wait in a FIFO mempool and
become visible only when a block containing them is produced; blocks are
packed greedily up to ``block_size_bytes``.

State is a single-writer machine guarded by one lock.  Readers see confirmed
state only.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Any, Callable, Iterable

from .cid import SENTINEL_INITIAL
from .errors import (
    BadNonce,
    BadSignature,
    ChainCorrupted,
    DuplicateAsset,
    InsufficientFunds,
    LedgerError,
    NotOwner,
    UnknownAsset,
    ValidationFailure,
)
from .keys import KeyPair, address_from_pubkey, is_address, verify
from .names import AssetPath, Binding, BindingState, validate_asset_path

log = logging.getLogger(__name__)

TYPICAL_TX_BYTES = 546


def _canonical(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class LedgerParams:
    block_size_bytes: int = 4 * 1024 * 1024
    block_interval_s: float = 15
    creation_fee: Decimal = Decimal("0.1")
    modification_fee: Decimal = Decimal("0.1")
    avg_tx_size_bytes: int = TYPICAL_TX_BYTES

    def __post_init__(self) -> None:
        object.__setattr__(self, "creation_fee", Decimal(str(self.creation_fee)))
        object.__setattr__(self, "modification_fee", Decimal(str(self.modification_fee)))
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValidationFailure(f"ledger parameter {name} must be positive, got {value}")

    def to_json(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["creation_fee"] = str(self.creation_fee)
        doc["modification_fee"] = str(self.modification_fee)
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> LedgerParams:
        return cls(**doc)


def capacity_tps(params: LedgerParams) -> Fraction:
    """Whole transactions per block divided by the block interval."""
    per_block = params.block_size_bytes // params.avg_tx_size_bytes
    return Fraction(per_block) / Fraction(params.block_interval_s)


# -- transactions ----------------------------------------------------------


class TxKind(str, enum.Enum):
    CREATE_ROOT = "create_root"
    CREATE_SUB = "create_sub"
    SET_BINDING = "set_binding"
    TRANSFER = "transfer"


def _nonce_text(nonce: int) -> str:
    return format(nonce, "016x")


@dataclass(frozen=True)
class Tx:
    """A signed ledger mutation.

    ``path`` names the asset acted on; for ``CREATE_SUB`` it is the parent
    and ``segment`` the new child label.  Unused fields stay empty so every
    transaction has the same JSON shape.
    """

    kind: TxKind
    path: str
    signer: str
    pubkey: str
    nonce: int
    fee: Decimal = Decimal(0)
    segment: str = ""
    owner: str = ""
    binding: str = ""
    signature: str = ""

    def body(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "path": self.path,
            "segment": self.segment,
            "owner": self.owner,
            "binding": self.binding,
            "fee": str(self.fee),
            "signer": self.signer,
            "pubkey": self.pubkey,
            "nonce": _nonce_text(self.nonce),
            "pad": _PAD,
        }

    def signing_bytes(self) -> bytes:
        return _canonical(self.body())

    def to_json(self) -> dict[str, Any]:
        return {**self.body(), "signature": self.signature}

    def to_bytes(self) -> bytes:
        return _canonical(self.to_json())

    @property
    def txid(self) -> str:
        return _sha256_hex(self.signing_bytes())

    @property
    def target(self) -> str:
        """Asset path whose state this transaction changes."""
        if self.kind is TxKind.CREATE_SUB:
            return f"{self.path}/{self.segment}"
        return self.path

    def signed(self, keypair: KeyPair) -> Tx:
        return replace(self, signature=keypair.sign(self.signing_bytes()).hex())

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> Tx:
        return cls(
            kind=TxKind(doc["kind"]),
            path=doc["path"],
            signer=doc["signer"],
            pubkey=doc["pubkey"],
            nonce=int(doc["nonce"], 16),
            fee=Decimal(doc["fee"]),
            segment=doc["segment"],
            owner=doc["owner"],
            binding=doc["binding"],
            signature=doc["signature"],
        )


def serialized_size(tx: Tx) -> int:
    return len(tx.to_bytes())


# Padding is the same for every transaction and sized so a set-binding on a
# typical two-level path ("XXX/WWW") with a content id serializes to 546 bytes.
_PAD = ""


def _calibrate_pad() -> str:
    template = Tx(
        kind=TxKind.SET_BINDING,
        path="XXX/WWW",
        signer="ph" + "0" * 40,
        pubkey="0" * 64,
        nonce=1,
        fee=LedgerParams().modification_fee,
        binding="Qm" + "1" * 44,
        signature="0" * 128,
    )
    short = serialized_size(template)
    if short > TYPICAL_TX_BYTES:
        raise RuntimeError("transaction template already exceeds the calibrated size")
    return "0" * (TYPICAL_TX_BYTES - short)


_PAD = _calibrate_pad()


# -- state -----------------------------------------------------------------


@dataclass(frozen=True)
class AssetRecord:
    path: str
    owner: str
    binding: Binding
    created_at_height: int
    quantity: int = 1
    reissuable: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "owner": self.owner,
            "binding": self.binding.ledger_text,
            "created_at_height": self.created_at_height,
            "quantity": self.quantity,
            "reissuable": self.reissuable,
        }

    @classmethod
    def from_json(cls, path: str, doc: dict[str, Any]) -> AssetRecord:
        return cls(
            path=path,
            owner=doc["owner"],
            binding=Binding.from_ledger_text(doc["binding"]),
            created_at_height=doc["created_at_height"],
            quantity=doc["quantity"],
            reissuable=doc["reissuable"],
        )


@dataclass
class LedgerState:
    height: int = 0
    assets: dict[str, AssetRecord] = field(default_factory=dict)
    balances: dict[str, Decimal] = field(default_factory=dict)
    nonces: dict[str, int] = field(default_factory=dict)
    burned: Decimal = Decimal(0)

    def copy(self) -> LedgerState:
        return LedgerState(self.height, dict(self.assets), dict(self.balances), dict(self.nonces), self.burned)

    def total_supply(self) -> Decimal:
        return sum(self.balances.values(), Decimal(0)) + self.burned

    def to_json(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "assets": {p: a.to_json() for p, a in self.assets.items()},
            "balances": {a: str(b) for a, b in self.balances.items()},
            "nonces": dict(self.nonces),
            "burned": str(self.burned),
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> LedgerState:
        return cls(
            height=doc["height"],
            assets={p: AssetRecord.from_json(p, a) for p, a in doc["assets"].items()},
            balances={a: Decimal(b) for a, b in doc["balances"].items()},
            nonces=dict(doc["nonces"]),
            burned=Decimal(doc["burned"]),
        )

    def state_hash(self) -> str:
        return _sha256_hex(_canonical(self.to_json()))

    # Validation and application are one step so a check can never drift
    # from the mutation it guards.
    def apply(self, tx: Tx, params: LedgerParams, height: int, *, verified: set[str] | None = None) -> None:
        _check_signature(tx, verified)
        expected_nonce = self.nonces.get(tx.signer, 0) + 1
        if tx.nonce != expected_nonce:
            raise BadNonce(f"nonce {tx.nonce} from {tx.signer}, expected {expected_nonce}")

        if tx.kind is TxKind.CREATE_ROOT:
            path = _parse_path(tx.path)
            if not path.is_root:
                raise ValidationFailure(f"{tx.path} is not a root asset")
            self._check_new_asset(str(path))
            self._check_owner_address(tx.owner)
            self._check_fee(tx, params.creation_fee)
            self._charge(tx)
            self.assets[str(path)] = AssetRecord(str(path), tx.owner, Binding.initial(), height)
        elif tx.kind is TxKind.CREATE_SUB:
            parent = self._owned(tx.path, tx.signer)
            child = _parse_path(parent.path).child(tx.segment)
            if tx.segment != tx.segment.upper():
                raise ValidationFailure(f"segment {tx.segment!r} must be uppercase")
            validate_asset_path(child)
            self._check_new_asset(str(child))
            self._check_owner_address(tx.owner)
            self._check_fee(tx, params.creation_fee)
            self._charge(tx)
            self.assets[str(child)] = AssetRecord(str(child), tx.owner, Binding.initial(), height)
        elif tx.kind is TxKind.SET_BINDING:
            asset = self._owned(tx.path, tx.signer)
            if tx.binding == SENTINEL_INITIAL:
                raise ValidationFailure("an asset cannot be reset to its initial binding")
            binding = Binding.from_ledger_text(tx.binding)
            self._check_fee(tx, params.modification_fee)
            self._charge(tx)
            self.assets[asset.path] = replace(asset, binding=binding)
        elif tx.kind is TxKind.TRANSFER:
            asset = self._owned(tx.path, tx.signer)
            self._check_owner_address(tx.owner)
            self._check_fee(tx, Decimal(0))
            self._charge(tx)
            self.assets[asset.path] = replace(asset, owner=tx.owner)
        else:  # pragma: no cover - enum is closed
            raise ValidationFailure(f"unknown transaction kind {tx.kind}")

    def _owned(self, path: str, signer: str) -> AssetRecord:
        asset = self.assets.get(path)
        if asset is None:
            raise UnknownAsset(path)
        if asset.owner != signer:
            raise NotOwner(f"{signer} does not own {path}")
        return asset

    def _check_new_asset(self, path: str) -> None:
        if path in self.assets:
            raise DuplicateAsset(f"{path} already exists and cannot be reissued")

    @staticmethod
    def _check_owner_address(owner: str) -> None:
        if not is_address(owner):
            raise ValidationFailure(f"not an address: {owner!r}")

    def _check_fee(self, tx: Tx, fee: Decimal) -> None:
        if tx.fee != fee:
            raise ValidationFailure(f"{tx.kind.value} fee must be {fee}, got {tx.fee}")
        if self.balances.get(tx.signer, Decimal(0)) < fee:
            raise InsufficientFunds(f"{tx.signer} cannot pay fee {fee}")

    def _charge(self, tx: Tx) -> None:
        self.nonces[tx.signer] = tx.nonce
        if tx.fee:
            self.balances[tx.signer] = self.balances.get(tx.signer, Decimal(0)) - tx.fee
            self.burned += tx.fee


def _parse_path(text: str) -> AssetPath:
    return AssetPath.parse(text)


def _check_signature(tx: Tx, verified: set[str] | None) -> None:
    key = tx.txid + tx.signature
    if verified is not None and key in verified:
        return
    try:
        pubkey = bytes.fromhex(tx.pubkey)
        signature = bytes.fromhex(tx.signature)
    except ValueError:
        raise BadSignature("malformed key or signature") from None
    if address_from_pubkey(pubkey) != tx.signer:
        raise BadSignature(f"public key does not belong to {tx.signer}")
    if not verify(pubkey, signature, tx.signing_bytes()):
        raise BadSignature(f"bad signature on {tx.txid}")
    if verified is not None:
        if len(verified) > 200_000:
            verified.clear()
        verified.add(key)


# -- blocks ----------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: float
    prev_hash: str
    txs: tuple[Tx, ...]
    total_bytes: int

    @property
    def hash(self) -> str:
        header = {
            "height": self.height,
            "timestamp": self.timestamp,
            "prev_hash": self.prev_hash,
            "total_bytes": self.total_bytes,
            "txids": [tx.txid for tx in self.txs],
        }
        return _sha256_hex(_canonical(header))

    def to_json(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "timestamp": self.timestamp,
            "prev_hash": self.prev_hash,
            "total_bytes": self.total_bytes,
            "txs": [tx.to_json() for tx in self.txs],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> Block:
        return cls(
            height=doc["height"],
            timestamp=doc["timestamp"],
            prev_hash=doc["prev_hash"],
            txs=tuple(Tx.from_json(t) for t in doc["txs"]),
            total_bytes=doc["total_bytes"],
        )


@dataclass(frozen=True)
class Genesis:
    params: LedgerParams = field(default_factory=LedgerParams)
    balances: dict[str, Decimal] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"params": self.params.to_json(), "balances": {a: str(b) for a, b in sorted(self.balances.items())}}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> Genesis:
        return cls(
            params=LedgerParams.from_json(doc.get("params", {})),
            balances={a: Decimal(str(b)) for a, b in doc.get("balances", {}).items()},
        )

    @property
    def hash(self) -> str:
        return _sha256_hex(_canonical(self.to_json()))


# -- the ledger ------------------------------------------------------------

BlockListener = Callable[[Block], None]


class Ledger:
    """In-process ledger node.

    Args:
        genesis: parameters and initial balances.
        chain: optional :class:`~ddns.chainlog.ChainLog` persisting blocks.
        clock: timestamp source for produced blocks.
    """

    def __init__(self, genesis: Genesis | None = None, *, chain: Any = None, clock: Callable[[], float] = time.time):
        self.genesis = genesis or Genesis()
        self.params = self.genesis.params
        self.chain = chain
        self.clock = clock
        self._lock = threading.RLock()
        self._state = LedgerState(balances=dict(self.genesis.balances))
        self._pending = self._state.copy()
        self._mempool: deque[Tx] = deque()
        self._blocks: list[Block] = []
        self._listeners: list[BlockListener] = []
        self._verified: set[str] = set()

    # -- queries -------------------------------------------------------

    @property
    def height(self) -> int:
        return self._state.height

    @property
    def blocks(self) -> list[Block]:
        with self._lock:
            return list(self._blocks)

    @property
    def tip_hash(self) -> str:
        return self._blocks[-1].hash if self._blocks else self.genesis.hash

    def mempool_size(self) -> int:
        return len(self._mempool)

    def mempool(self) -> list[Tx]:
        with self._lock:
            return list(self._mempool)

    def state(self) -> LedgerState:
        with self._lock:
            return self._state.copy()

    def state_hash(self) -> str:
        with self._lock:
            return self._state.state_hash()

    def get_asset(self, path: AssetPath | str) -> AssetRecord:
        with self._lock:
            try:
                return self._state.assets[str(path)]
            except KeyError:
                raise UnknownAsset(str(path)) from None

    def get_binding(self, path: AssetPath | str) -> Binding:
        return self.get_asset(path).binding

    def owner_of(self, path: AssetPath | str) -> str:
        return self.get_asset(path).owner

    def balance(self, address: str) -> Decimal:
        with self._lock:
            return self._state.balances.get(address, Decimal(0))

    def burned(self) -> Decimal:
        return self._state.burned

    def assets(self) -> list[AssetRecord]:
        with self._lock:
            return sorted(self._state.assets.values(), key=lambda a: a.path)

    def add_listener(self, listener: BlockListener) -> None:
        self._listeners.append(listener)

    def remove_listener(self, listener: BlockListener) -> None:
        self._listeners.remove(listener)

    # -- submission ----------------------------------------------------

    def submit(self, tx: Tx) -> str:
        """Validate ``tx`` against confirmed state plus the mempool and queue it."""
        with self._lock:
            trial = self._pending.copy()
            trial.apply(tx, self.params, self._state.height + 1, verified=self._verified)
            self._pending = trial
            self._mempool.append(tx)
            return tx.txid

    def _build(self, kind: TxKind, path: str, signer: KeyPair, **fields: Any) -> Tx:
        with self._lock:
            nonce = self._pending.nonces.get(signer.address, 0) + 1
        tx = Tx(kind=kind, path=path, signer=signer.address, pubkey=signer.public_key.hex(), nonce=nonce, **fields)
        return tx.signed(signer)

    def _sign_and_submit(self, kind: TxKind, path: str, signer: KeyPair, **fields: Any) -> str:
        # Nonce read and submit under one lock so concurrent sessions
        # sharing a key cannot race each other.
        with self._lock:
            return self.submit(self._build(kind, path, signer, **fields))

    def create_root_asset(self, path: AssetPath | str, owner: str, signer: KeyPair) -> str:
        path = _coerce(path)
        if not path.is_root:
            raise ValidationFailure(f"{path} is not a root asset")
        return self._sign_and_submit(
            TxKind.CREATE_ROOT, str(path), signer, owner=owner, fee=self.params.creation_fee
        )

    def create_sub_asset(self, parent: AssetPath | str, segment: str, new_owner: str, signer: KeyPair) -> str:
        parent = _coerce(parent)
        validate_asset_path(parent.child(segment))
        return self._sign_and_submit(
            TxKind.CREATE_SUB,
            str(parent),
            signer,
            segment=segment.upper(),
            owner=new_owner,
            fee=self.params.creation_fee,
        )

    def set_binding(self, path: AssetPath | str, binding: Binding, signer: KeyPair) -> str:
        if binding.state is BindingState.INITIAL:
            raise ValidationFailure("an asset cannot be reset to its initial binding")
        return self._sign_and_submit(
            TxKind.SET_BINDING,
            str(_coerce(path)),
            signer,
            binding=binding.ledger_text,
            fee=self.params.modification_fee,
        )

    def transfer_ownership(self, path: AssetPath | str, new_owner: str, signer: KeyPair) -> str:
        return self._sign_and_submit(TxKind.TRANSFER, str(_coerce(path)), signer, owner=new_owner)

    # -- blocks --------------------------------------------------------

    def produce_block(self, now: float | None = None) -> Block:
        """Pack the mempool head into a block and apply it.

        Packing stops at the first transaction that would overflow the block,
        which keeps FIFO order and therefore the validity established at
        submission time.
        """
        if self.chain is not None:
            with self.chain.locked():
                self._sync_locked()
                block = self._produce(now)
                self.chain.append(block, self._state)
        else:
            block = self._produce(now)
        for listener in list(self._listeners):
            try:
                listener(block)
            except Exception:  # noqa: BLE001 - a listener must not break block production
                log.exception("block listener failed")
        return block

    def _produce(self, now: float | None) -> Block:
        with self._lock:
            limit = self.params.block_size_bytes
            packed: list[Tx] = []
            total = 0
            while self._mempool:
                size = serialized_size(self._mempool[0])
                if size > limit:
                    dropped = self._mempool.popleft()
                    log.warning("dropping oversized tx %s (%d bytes)", dropped.txid, size)
                    continue
                if total + size > limit:
                    break
                packed.append(self._mempool.popleft())
                total += size
            height = self._state.height + 1
            state = self._state.copy()
            included = []
            for tx in packed:
                try:
                    state.apply(tx, self.params, height, verified=self._verified)
                except LedgerError as exc:
                    log.warning("dropping tx %s at block %d: %s", tx.txid, height, exc)
                    total -= serialized_size(tx)
                    continue
                included.append(tx)
            timestamp = float(self.clock() if now is None else now)
            block = Block(height, timestamp, self.tip_hash, tuple(included), total)
            state.height = height
            self._commit(block, state)
            return block

    def _commit(self, block: Block, state: LedgerState) -> None:
        self._state = state
        self._blocks.append(block)
        self._rebuild_pending()

    def _rebuild_pending(self) -> None:
        pending = self._state.copy()
        keep: deque[Tx] = deque()
        for tx in self._mempool:
            try:
                pending.apply(tx, self.params, self._state.height + 1, verified=self._verified)
            except LedgerError as exc:
                log.warning("evicting tx %s from mempool: %s", tx.txid, exc)
                continue
            keep.append(tx)
        self._mempool = keep
        self._pending = pending

    def apply_block(self, block: Block) -> None:
        """Apply a block produced elsewhere (replay or another process)."""
        with self._lock:
            if block.height != self._state.height + 1:
                raise ChainCorrupted(f"block height {block.height} after {self._state.height}")
            if block.prev_hash != self.tip_hash:
                raise ChainCorrupted(f"block {block.height} does not extend the tip")
            if block.total_bytes != sum(serialized_size(tx) for tx in block.txs):
                raise ChainCorrupted(f"block {block.height} size field is wrong")
            if block.total_bytes > self.params.block_size_bytes:
                raise ChainCorrupted(f"block {block.height} exceeds the block size")
            state = self._state.copy()
            for tx in block.txs:
                try:
                    state.apply(tx, self.params, block.height, verified=self._verified)
                except LedgerError as exc:
                    raise ChainCorrupted(f"invalid tx {tx.txid} in block {block.height}: {exc}") from exc
            state.height = block.height
            self._commit(block, state)
        for listener in list(self._listeners):
            try:
                listener(block)
            except Exception:  # noqa: BLE001
                log.exception("block listener failed")

    def sync(self) -> int:
        """Pull blocks other processes appended to the chain log."""
        if self.chain is None:
            return 0
        return self._sync_locked()

    def _sync_locked(self) -> int:
        count = 0
        for block in self.chain.read_new():
            self.apply_block(block)
            count += 1
        return count

    def replay_blocks(self, blocks: Iterable[Block]) -> None:
        for block in blocks:
            self.apply_block(block)

    def restore(self, state: LedgerState, blocks: list[Block]) -> None:
        """Adopt a trusted snapshot (state after ``blocks``) without re-execution."""
        with self._lock:
            self._state = state
            self._blocks = list(blocks)
            self._rebuild_pending()


def _coerce(path: AssetPath | str) -> AssetPath:
    if isinstance(path, AssetPath):
        validate_asset_path(path)
        return path
    return AssetPath.parse(path)


class BlockScheduler(threading.Thread):
    """Produce a block every ``interval`` seconds until stopped.

    Each tick first pulls blocks appended by other processes.  Empty blocks
    are skipped unless ``produce_empty`` is set.
    """

    def __init__(self, ledger: Ledger, interval: float | None = None, *, produce_empty: bool = False) -> None:
        super().__init__(name="block-scheduler", daemon=True)
        self.ledger = ledger
        self.interval = ledger.params.block_interval_s if interval is None else interval
        self.produce_empty = produce_empty
        self._stop_event = threading.Event()

    def run(self) -> None:
        while not self._stop_event.wait(self.interval):
            try:
                self.ledger.sync()
                if self.produce_empty or self.ledger.mempool_size():
                    block = self.ledger.produce_block()
                    log.info("block %d: %d txs, %d bytes", block.height, len(block.txs), block.total_bytes)
            except Exception:  # noqa: BLE001 - keep ticking
                log.exception("block scheduler tick failed")

    def stop(self) -> None:
        self._stop_event.set()
