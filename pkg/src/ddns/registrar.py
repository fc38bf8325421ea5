"""Owner-side workflows: register a top-level name, add subdomains, publish records.

Each workflow encodes what it needs, stores it, and submits one signed ledger
transaction.  Nothing is visible to resolution until the block carrying the
transaction is produced; when a resolver is attached, it drops cached answers
for the affected names at that moment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import ValidationFailure
from .keys import KeyPair
from .ledger import Ledger
from .names import (
    DEFAULT_ROOT_SUFFIX,
    AssetPath,
    Binding,
    DomainName,
    domain_to_asset_path,
    parse_domain_name,
)
from .records import RecordFile, encode_record_file
from .resolver import Resolver
from .store import ContentStore, PinningClient


def rpc_envelope(result: Any, error: Any = None, id: str = "ddns") -> dict[str, Any]:
    """JSON-RPC style reply: ``{"result": ..., "error": ..., "id": ...}``."""
    return {"result": result, "error": error, "id": id}


@dataclass
class RegistrarSession:
    keypair: KeyPair
    ledger: Ledger
    store: ContentStore
    root_suffix: str = DEFAULT_ROOT_SUFFIX
    resolver: Resolver | None = None
    pinning: PinningClient | None = None

    def __post_init__(self) -> None:
        if self.resolver is not None:
            self.ledger.add_listener(self.resolver.on_block)

    @property
    def owner_address(self) -> str:
        return self.keypair.address

    def close(self) -> None:
        if self.resolver is not None:
            self.ledger.remove_listener(self.resolver.on_block)

    def _name(self, domain: DomainName | str) -> DomainName:
        return parse_domain_name(domain) if isinstance(domain, str) else domain

    def register_tld(self, tld: str) -> str:
        path = AssetPath(tld.strip(".").upper())
        return self.ledger.create_root_asset(path, self.owner_address, self.keypair)

    def add_subdomain(self, tld: str, sub: str, owner: str | None = None) -> str:
        """Create ``sub.tld`` (``sub`` may itself be dotted) for ``owner``.

        The parent asset must already exist and belong to this session.
        """
        name = parse_domain_name(f"{sub}.{tld}.{self.root_suffix}")
        path = domain_to_asset_path(name, self.root_suffix)
        assert path.parent is not None
        return self.ledger.create_sub_asset(path.parent, path.subpath[-1], owner or self.owner_address, self.keypair)

    def set_record(
        self, domain: DomainName | str, records: RecordFile, owner: str | None = None
    ) -> tuple[str, str]:
        """Publish ``records`` for ``domain``; returns ``(cid, txid)``."""
        if owner is not None and owner != self.owner_address:
            raise ValidationFailure("set_record does not transfer ownership; owner must be the session address")
        name = self._name(domain)
        path = domain_to_asset_path(name, self.root_suffix)
        payload = encode_record_file(records)
        if self.pinning is not None:
            cid = self.pinning.pin_remote(str(name).upper(), payload)
            if cid not in self.store:
                self.store.put(payload, name=str(name).upper())
        else:
            cid = self.store.put(payload, name=str(name).upper())
        return cid, self.ledger.set_binding(path, Binding.active(cid), self.keypair)

    def disable_subdomain(self, domain: DomainName | str) -> str:
        path = domain_to_asset_path(self._name(domain), self.root_suffix)
        return self.ledger.set_binding(path, Binding.deactivated(), self.keypair)

    def transfer(self, domain: DomainName | str, new_owner: str) -> str:
        path = domain_to_asset_path(self._name(domain), self.root_suffix)
        return self.ledger.transfer_ownership(path, new_owner, self.keypair)
