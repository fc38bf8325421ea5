"""Decentralized domain names: ledger-anchored bindings to content-addressed record files."""

__version__ = "0.1.0"

from .cid import SENTINEL_DEACTIVATED, SENTINEL_INITIAL, compute_cid, is_valid_cid
from .keys import KeyPair
from .ledger import Ledger, LedgerParams, capacity_tps
from .names import AssetPath, Binding, BindingState, DomainName, domain_to_asset_path, parse_domain_name
from .records import RecordFile, Rcode, RRType, ResolutionResult, decode_record_file, encode_record_file
from .registrar import RegistrarSession
from .resolver import Resolver, ResolverConfig
from .server import DnsServer
from .store import ContentStore, PinningClient, PinningClientConfig

__all__ = [
    "AssetPath", "Binding", "BindingState", "ContentStore", "DnsServer", "DomainName", "KeyPair",
    "Ledger", "LedgerParams", "PinningClient", "PinningClientConfig", "RRType", "Rcode", "RecordFile",
    "RegistrarSession", "ResolutionResult", "Resolver", "ResolverConfig", "SENTINEL_DEACTIVATED",
    "SENTINEL_INITIAL", "capacity_tps", "compute_cid", "decode_record_file", "domain_to_asset_path",
    "encode_record_file", "is_valid_cid", "parse_domain_name",
]
