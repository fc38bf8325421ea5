"""Name resolution: DDNS names from ledger + content store, others upstream.

For a name under the root suffix the resolver maps it to an asset path,
reads the confirmed binding and acts on it:

* initial binding   -> NOERROR, no answers (registered but unconfigured)
* deactivated       -> NXDOMAIN (as is an unknown asset)
* active(cid)       -> fetch the record file, answer records of the query
                       type, chasing CNAMEs (into DDNS or upstream)
* store/parse fault -> SERVFAIL

Everything else is forwarded over UDP.  Results are cached per
(name, qtype) in a bounded LRU for the minimum answer TTL, or the negative
TTL for NXDOMAIN/empty answers.  Resolution never raises.
"""

from __future__ import annotations

import enum
import logging
import random
import socket
import threading
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, replace
from typing import Callable, Protocol

from .errors import DdnsError, UnknownAsset, ValidationFailure, WireError
from .names import (
    DEFAULT_ROOT_SUFFIX,
    AssetPath,
    BindingState,
    DomainName,
    asset_path_to_domain,
    domain_to_asset_path,
    parse_domain_name,
)
from .records import (
    DEFAULT_TTL,
    Answer,
    CNAMERecord,
    ExtensionRecord,
    Rcode,
    RecordFile,
    ResolutionResult,
    RRType,
    decode_record_file,
)
from .wire import WireQuery, decode_message, encode_query, result_from_message

log = logging.getLogger(__name__)


class NameClass(enum.Enum):
    DDNS = "ddns"
    TRADITIONAL = "traditional"


def parse_hostport(text: str, default_port: int = 53) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit() or (host.count(":") and not host.startswith("[")):
        return text.strip("[]"), default_port
    return host.strip("[]"), int(port)


@dataclass
class ResolverConfig:
    root_suffix: str = DEFAULT_ROOT_SUFFIX
    upstream: str = "1.1.1.1:53"
    cache_capacity: int = 10_000
    negative_ttl: int = 30
    cname_chase_limit: int = 8
    record_ttl: int = DEFAULT_TTL
    upstream_timeout: float = 2.0
    upstream_retries: int = 1

    def __post_init__(self) -> None:
        if self.cname_chase_limit < 1:
            raise ValidationFailure("cname_chase_limit must be at least 1")
        if self.cache_capacity < 0 or self.negative_ttl < 0 or self.record_ttl < 0:
            raise ValidationFailure("cache sizes and TTLs must be non-negative")
        self.root_suffix = self.root_suffix.lower().strip(".")


@dataclass
class ResolverStats:
    queries: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    ledger_reads: int = 0
    store_fetches: int = 0
    upstream_forwards: int = 0
    servfails: int = 0
    nxdomains: int = 0

    def snapshot(self) -> dict[str, int]:
        return asdict(self)


def classify(name: DomainName, cfg: ResolverConfig) -> NameClass:
    return NameClass.DDNS if name.is_under(cfg.root_suffix) else NameClass.TRADITIONAL


class BindingSource(Protocol):
    def get_binding(self, path): ...


class BlobSource(Protocol):
    def get(self, cid: str) -> bytes: ...


Forwarder = Callable[[DomainName, int], ResolutionResult]


class UdpForwarder:
    """Forward one question to an upstream server over UDP.

    Each attempt waits ``timeout`` seconds; after ``retries`` extra attempts
    the result is SERVFAIL.
    """

    def __init__(self, upstream: str = "1.1.1.1:53", timeout: float = 2.0, retries: int = 1) -> None:
        self.address = parse_hostport(upstream)
        self.timeout = timeout
        self.retries = retries

    def __call__(self, name: DomainName, qtype: int) -> ResolutionResult:
        msg_id = random.getrandbits(16)
        query = encode_query(WireQuery(msg_id, name, qtype))
        family = socket.AF_INET6 if ":" in self.address[0] else socket.AF_INET
        for attempt in range(self.retries + 1):
            try:
                with socket.socket(family, socket.SOCK_DGRAM) as sock:
                    sock.settimeout(self.timeout)
                    sock.sendto(query, self.address)
                    deadline = time.monotonic() + self.timeout
                    while True:
                        sock.settimeout(max(deadline - time.monotonic(), 0.001))
                        data, _ = sock.recvfrom(65535)
                        try:
                            msg = decode_message(data)
                        except WireError:
                            continue
                        if msg.id == msg_id and msg.is_response:
                            return result_from_message(msg)
            except (socket.timeout, OSError) as exc:
                log.debug("upstream %s attempt %d failed: %s", self.address, attempt + 1, exc)
        return ResolutionResult.servfail()


@dataclass
class _CacheEntry:
    result: ResolutionResult
    inserted_at: float
    ttl: int


class TtlLruCache:
    def __init__(self, capacity: int, clock: Callable[[], float] = time.monotonic) -> None:
        self.capacity = capacity
        self.clock = clock
        self._data: OrderedDict[tuple[str, int], _CacheEntry] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._data)

    def get(self, key: tuple[str, int]) -> ResolutionResult | None:
        now = self.clock()
        with self._lock:
            entry = self._data.get(key)
            if entry is None:
                return None
            age = now - entry.inserted_at
            if age >= entry.ttl:
                del self._data[key]
                return None
            self._data.move_to_end(key)
        elapsed = int(age)
        if not elapsed:
            return entry.result
        answers = tuple(replace(a, ttl=max(a.ttl - elapsed, 0)) for a in entry.result.answers)
        return replace(entry.result, answers=answers)

    def put(self, key: tuple[str, int], result: ResolutionResult, ttl: int) -> None:
        if self.capacity <= 0 or ttl <= 0:
            return
        with self._lock:
            self._data[key] = _CacheEntry(result, self.clock(), ttl)
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def invalidate(self, name: str) -> int:
        with self._lock:
            doomed = [k for k in self._data if k[0] == name]
            for k in doomed:
                del self._data[k]
        return len(doomed)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


class Resolver:
    def __init__(
        self,
        ledger: BindingSource,
        store: BlobSource,
        config: ResolverConfig | None = None,
        *,
        forwarder: Forwarder | None = None,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self.ledger = ledger
        self.store = store
        self.config = config or ResolverConfig()
        self.forwarder = forwarder or UdpForwarder(
            self.config.upstream, self.config.upstream_timeout, self.config.upstream_retries
        )
        self.cache = TtlLruCache(self.config.cache_capacity, clock)
        self.stats = ResolverStats()
        self._stats_lock = threading.Lock()

    def _count(self, counter: str, n: int = 1) -> None:
        with self._stats_lock:
            setattr(self.stats, counter, getattr(self.stats, counter) + n)

    def classify(self, name: DomainName) -> NameClass:
        return classify(name, self.config)

    def resolve(self, name: DomainName | str, qtype: int = RRType.A) -> ResolutionResult:
        try:
            if isinstance(name, str):
                name = parse_domain_name(name, strict=False) if name.strip(".") else DomainName(())
            key = (str(name), int(qtype))
            self._count("queries")
            cached = self.cache.get(key)
            if cached is not None:
                self._count("cache_hits")
                return cached
            self._count("cache_misses")
            if self.classify(name) is NameClass.DDNS:
                result = self.resolve_ddns(name, qtype)
            else:
                result = self._forward(name, qtype)
        except Exception:  # noqa: BLE001 - resolution never raises to the wire
            log.exception("resolution of %s/%s failed", name, qtype)
            result = ResolutionResult.servfail()
            key = None
        if result.rcode == Rcode.SERVFAIL:
            self._count("servfails")
        elif result.rcode == Rcode.NXDOMAIN:
            self._count("nxdomains")
        if key is not None:
            self._store_in_cache(key, result)
        return result

    def _store_in_cache(self, key: tuple[str, int], result: ResolutionResult) -> None:
        if result.rcode == Rcode.NOERROR and result.answers:
            self.cache.put(key, result, result.min_ttl or 0)
        elif result.rcode == Rcode.NXDOMAIN or (result.rcode == Rcode.NOERROR and not result.answers):
            self.cache.put(key, result, self.config.negative_ttl)

    def invalidate(self, name: DomainName | str) -> int:
        if isinstance(name, str):
            name = parse_domain_name(name, strict=False)
        return self.cache.invalidate(str(name))

    def on_block(self, block) -> None:
        """Block listener: drop cached answers for every asset the block touched.

        Aliases cached under other names still age out by TTL.
        """
        for tx in block.txs:
            try:
                name = asset_path_to_domain(AssetPath.parse(tx.target), self.config.root_suffix)
            except ValidationFailure:
                continue
            self.cache.invalidate(str(name))

    def _forward(self, name: DomainName, qtype: int) -> ResolutionResult:
        self._count("upstream_forwards")
        return self.forwarder(name, qtype)

    def _load_records(self, name: DomainName) -> RecordFile | ResolutionResult:
        """Binding lookup and fetch. Returns a result when resolution ends here."""
        try:
            path = domain_to_asset_path(name, self.config.root_suffix)
        except ValidationFailure:
            # Not representable as an asset, so it cannot exist on the ledger.
            return ResolutionResult.nxdomain()
        self._count("ledger_reads")
        try:
            binding = self.ledger.get_binding(path)
        except UnknownAsset:
            return ResolutionResult.nxdomain()
        if binding.state is BindingState.INITIAL:
            return ResolutionResult(Rcode.NOERROR)
        if binding.state is BindingState.DEACTIVATED:
            return ResolutionResult.nxdomain()
        self._count("store_fetches")
        try:
            payload = self.store.get(binding.cid)
            return decode_record_file(payload, default_ttl=self.config.record_ttl)
        except DdnsError as exc:
            log.warning("cannot load records for %s (%s): %s", name, binding.cid, exc)
            return ResolutionResult.servfail()

    def resolve_ddns(self, name: DomainName, qtype: int) -> ResolutionResult:
        answers: list[Answer] = []
        chain: list[str] = []
        current = name
        while True:
            if self.classify(current) is NameClass.TRADITIONAL:
                upstream = self._forward(current, qtype)
                if upstream.rcode == Rcode.NXDOMAIN:
                    return ResolutionResult.nxdomain()
                return ResolutionResult(upstream.rcode, (*answers, *upstream.answers), tuple(chain))
            loaded = self._load_records(current)
            if isinstance(loaded, ResolutionResult):
                if loaded.rcode != Rcode.NOERROR:
                    return loaded
                return ResolutionResult(Rcode.NOERROR, tuple(answers), tuple(chain))
            owner = str(current)
            if qtype == RRType.ANY:
                matching = [r for r in loaded.records if not isinstance(r, ExtensionRecord)]
            else:
                matching = loaded.of_type(qtype)
            if matching:
                answers.extend(Answer(owner, r.rtype, loaded.ttl_for(r), r) for r in matching)
                return ResolutionResult(Rcode.NOERROR, tuple(answers), tuple(chain))
            cnames = loaded.of_type(RRType.CNAME)
            if not cnames:
                return ResolutionResult(Rcode.NOERROR, tuple(answers), tuple(chain))
            cname: CNAMERecord = cnames[0]
            if len(chain) >= self.config.cname_chase_limit:
                log.warning("CNAME chase limit reached resolving %s", name)
                return ResolutionResult.servfail()
            answers.append(Answer(owner, RRType.CNAME, loaded.ttl_for(cname), cname))
            chain.append(owner)
            try:
                current = parse_domain_name(cname.target, strict=False)
            except ValidationFailure:
                return ResolutionResult.servfail()
