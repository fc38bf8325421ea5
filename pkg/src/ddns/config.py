"""Daemon and CLI configuration, loaded from one JSON file.

Example::

    {
      "data_dir": "./ddns-data",
      "key_file": "owner.key",
      "ledger": {"block_interval_s": 15, "creation_fee": "0.1"},
      "genesis": {"balances": {"ph...": "100"}},
      "resolver": {"root_suffix": "ddns", "upstream": "1.1.1.1:53"},
      "server": {"bind": "127.0.0.1", "port": 5553},
      "pinning": {"endpoint_url": "https://api.pinata.cloud", "api_key": "..."}
    }

Every key is optional.  ``DDNS_PINNING_API_KEY`` supplies the pinning key
when the file leaves it out.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

from .errors import ConfigError, DdnsError
from .ledger import Genesis, LedgerParams
from .resolver import ResolverConfig
from .server import DEFAULT_PORT
from .store import PinningClientConfig

CONFIG_ENV = "DDNS_CONFIG"
PINNING_KEY_ENV = "DDNS_PINNING_API_KEY"


@dataclass
class ServerConfig:
    bind: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    max_inflight: int = 64


@dataclass
class Config:
    data_dir: Path = Path("ddns-data")
    store_dir: Path | None = None
    key_file: Path | None = None
    ledger: LedgerParams = field(default_factory=LedgerParams)
    balances: dict[str, Decimal] = field(default_factory=dict)
    resolver: ResolverConfig = field(default_factory=ResolverConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    pinning: PinningClientConfig | None = None

    @property
    def chain_dir(self) -> Path:
        return self.data_dir / "chain"

    @property
    def store_path(self) -> Path:
        return self.store_dir if self.store_dir is not None else self.data_dir / "store"

    @property
    def stats_path(self) -> Path:
        return self.data_dir / "stats.json"

    @property
    def genesis(self) -> Genesis:
        return Genesis(self.ledger, dict(self.balances))


def _section(cls, doc: dict[str, Any] | None, name: str):
    doc = doc or {}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**doc)
    except (TypeError, DdnsError) as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from exc


def config_from_dict(doc: dict[str, Any], base: Path = Path(".")) -> Config:
    allowed = {"data_dir", "store_dir", "key_file", "ledger", "genesis", "resolver", "server", "pinning"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def path(key: str) -> Path | None:
        value = doc.get(key)
        return None if value is None else base / Path(value).expanduser()

    pinning = None
    if doc.get("pinning"):
        pin = dict(doc["pinning"])
        pin.setdefault("api_key", os.environ.get(PINNING_KEY_ENV, ""))
        pinning = _section(PinningClientConfig, pin, "pinning")
    try:
        balances = {a: Decimal(str(b)) for a, b in (doc.get("genesis") or {}).get("balances", {}).items()}
    except ArithmeticError as exc:
        raise ConfigError(f"bad genesis balance: {exc}") from exc
    return Config(
        data_dir=path("data_dir") or base / "ddns-data",
        store_dir=path("store_dir"),
        key_file=path("key_file"),
        ledger=_section(LedgerParams, doc.get("ledger"), "ledger"),
        balances=balances,
        resolver=_section(ResolverConfig, doc.get("resolver"), "resolver"),
        server=_section(ServerConfig, doc.get("server"), "server"),
        pinning=pinning,
    )


def load_config(path: str | os.PathLike[str] | None = None) -> Config:
    """Load ``path``, else ``$DDNS_CONFIG``, else built-in defaults.

    Relative paths inside the file resolve against the file's directory.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return Config()
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_dict(doc, base=path.parent)
