"""``ddns`` command line.

Registrar commands submit one transaction and then produce the block that
confirms it, so each invocation leaves the chain in a settled state.  All
commands print JSON on stdout (``resolve`` prints dig-style text unless
``--json``); diagnostics go to stderr.

Exit codes:
    0 ok; 1 internal error; 2 usage; 3 config; 4 validation; 5 record file;
    6 not owner; 7 duplicate asset; 8 unknown asset; 9 insufficient funds;
    10 content store; 11 pinning service; 12 bind failure; 13 other ledger
    error; 14 network.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import socket
import sys
import threading
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from ._fs import atomic_write
from .chainlog import open_ledger
from .config import Config, load_config
from .errors import (
    BindFailure,
    ConfigError,
    DdnsError,
    DuplicateAsset,
    InsufficientFunds,
    LedgerError,
    NotOwner,
    PinningError,
    RecordFileError,
    StoreError,
    UnknownAsset,
    ValidationFailure,
    WireError,
)
from .keys import KeyPair
from .ledger import BlockScheduler, Genesis, Ledger, LedgerParams, capacity_tps, serialized_size
from .names import Binding, domain_to_asset_path, parse_domain_name
from .records import (
    AAAARecord,
    ARecord,
    CNAMERecord,
    MXRecord,
    RawRecord,
    ResolutionResult,
    TLSARecord,
    decode_record_file,
    parse_rrtype,
    rcode_name,
    rrtype_name,
)
from .registrar import RegistrarSession, rpc_envelope
from .resolver import Resolver, UdpForwarder, parse_hostport
from .server import DnsServer
from .store import ContentStore, PinningClient

log = logging.getLogger("ddns")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 3
EXIT_VALIDATION = 4
EXIT_RECORD = 5
EXIT_NOT_OWNER = 6
EXIT_DUPLICATE = 7
EXIT_UNKNOWN = 8
EXIT_FUNDS = 9
EXIT_STORE = 10
EXIT_PINNING = 11
EXIT_BIND = 12
EXIT_LEDGER = 13
EXIT_NETWORK = 14

# Most specific first.
_EXIT_CODES: list[tuple[type[BaseException], int]] = [
    (ConfigError, EXIT_CONFIG),
    (RecordFileError, EXIT_RECORD),
    (NotOwner, EXIT_NOT_OWNER),
    (DuplicateAsset, EXIT_DUPLICATE),
    (UnknownAsset, EXIT_UNKNOWN),
    (InsufficientFunds, EXIT_FUNDS),
    (ValidationFailure, EXIT_VALIDATION),
    (PinningError, EXIT_PINNING),
    (StoreError, EXIT_STORE),
    (BindFailure, EXIT_BIND),
    (LedgerError, EXIT_LEDGER),
    (WireError, EXIT_NETWORK),
]

RPC_ID = "ddns-cli"


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_INTERNAL


def _emit(doc: Any) -> None:
    sys.stdout.write(json.dumps(doc, default=str) + "\n")
    sys.stdout.flush()


# -- shared setup ----------------------------------------------------------


def _config(args: argparse.Namespace) -> Config:
    cfg = load_config(args.config)
    if args.data_dir:
        cfg.data_dir = Path(args.data_dir)
    if args.key_file:
        cfg.key_file = Path(args.key_file)
    if args.root_suffix:
        cfg.resolver.root_suffix = args.root_suffix.lower().strip(".")
    if args.upstream:
        cfg.resolver.upstream = args.upstream
    if getattr(args, "port", None) is not None:
        cfg.server.port = args.port
    if getattr(args, "bind", None):
        cfg.server.bind = args.bind
    return cfg


def _keypair(cfg: Config) -> KeyPair:
    if cfg.key_file is None:
        raise ConfigError("no key file: pass --key-file or set key_file in the config")
    try:
        return KeyPair.load(cfg.key_file)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load key file {cfg.key_file}: {exc}") from exc


def _ledger(cfg: Config) -> Ledger:
    return open_ledger(cfg.chain_dir, cfg.genesis)


def _session(cfg: Config) -> RegistrarSession:
    pinning = None
    store = ContentStore(cfg.store_path)
    if cfg.pinning is not None:
        pinning = PinningClient(cfg.pinning, store)
    return RegistrarSession(
        _keypair(cfg), _ledger(cfg), store, root_suffix=cfg.resolver.root_suffix, pinning=pinning
    )


def _confirm(session: RegistrarSession, txid: str, **extra: Any) -> int:
    block = session.ledger.produce_block()
    if txid not in {tx.txid for tx in block.txs}:
        raise LedgerError(f"transaction {txid} was not included in block {block.height}")
    _emit({**rpc_envelope([txid], id=RPC_ID), "block": block.height, **extra})
    return EXIT_OK


# -- commands --------------------------------------------------------------


def cmd_keygen(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if cfg.key_file is None:
        raise ConfigError("keygen needs --key-file")
    if cfg.key_file.exists() and not args.force:
        raise ConfigError(f"{cfg.key_file} exists; pass --force to overwrite")
    key = KeyPair.generate()
    key.save(cfg.key_file)
    _emit(rpc_envelope({"address": key.address, "key_file": str(cfg.key_file)}, id=RPC_ID))
    return EXIT_OK


def cmd_init(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ledger = _ledger(cfg)
    ContentStore(cfg.store_path)
    _emit(
        rpc_envelope(
            {"chain": str(cfg.chain_dir), "height": ledger.height, "genesis": ledger.genesis.hash}, id=RPC_ID
        )
    )
    return EXIT_OK


def cmd_register_tld(args: argparse.Namespace) -> int:
    session = _session(_config(args))
    return _confirm(session, session.register_tld(args.tld))


def cmd_add_subdomain(args: argparse.Namespace) -> int:
    session = _session(_config(args))
    return _confirm(session, session.add_subdomain(args.tld, args.sub, args.owner))


def cmd_set_record(args: argparse.Namespace) -> int:
    session = _session(_config(args))
    raw = sys.stdin.buffer.read() if args.file == "-" else Path(args.file).read_bytes()
    records = decode_record_file(raw)
    cid, txid = session.set_record(args.domain, records)
    return _confirm(session, txid, cid=cid)


def cmd_disable(args: argparse.Namespace) -> int:
    session = _session(_config(args))
    return _confirm(session, session.disable_subdomain(args.domain))


def cmd_transfer(args: argparse.Namespace) -> int:
    session = _session(_config(args))
    return _confirm(session, session.transfer(args.domain, args.new_owner))


def cmd_asset(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ledger = _ledger(cfg)
    path = domain_to_asset_path(parse_domain_name(args.domain), cfg.resolver.root_suffix)
    asset = ledger.get_asset(path)
    _emit(rpc_envelope({"path": str(path), **asset.to_json()}, id=RPC_ID))
    return EXIT_OK


def format_rdata(data: Any) -> str:
    if isinstance(data, (ARecord, AAAARecord)):
        return data.address
    if isinstance(data, CNAMERecord):
        return data.target.rstrip(".") + "."
    if isinstance(data, MXRecord):
        return f"{data.priority} {data.mail_server.rstrip('.')}."
    if isinstance(data, TLSARecord):
        return f"{data.usage} {data.selector} {data.matching_type} {data.cert_data}"
    if isinstance(data, RawRecord):
        return f"\\# {len(data.rdata)} {data.rdata.hex()}"
    return str(data)


def format_dig(name: str, qtype: int, result: ResolutionResult) -> str:
    lines = [
        f";; ->>HEADER<<- status: {rcode_name(result.rcode)}, answers: {len(result.answers)}",
        ";; QUESTION SECTION:",
        f";{name.rstrip('.')}.\tIN\t{rrtype_name(qtype)}",
    ]
    if result.answers:
        lines += ["", ";; ANSWER SECTION:"]
        for a in result.answers:
            lines.append(f"{a.name.rstrip('.')}.\t{a.ttl}\tIN\t{rrtype_name(a.rtype)}\t{format_rdata(a.data)}")
    return "\n".join(lines)


def result_to_json(result: ResolutionResult) -> dict[str, Any]:
    return {
        "rcode": rcode_name(result.rcode),
        "answers": [
            {"name": a.name, "type": rrtype_name(a.rtype), "ttl": a.ttl, "data": format_rdata(a.data)}
            for a in result.answers
        ],
        "cname_chain": list(result.cname_chain),
    }


def cmd_resolve(args: argparse.Namespace) -> int:
    cfg = _config(args)
    name = parse_domain_name(args.name, strict=False)
    qtype = parse_rrtype(args.qtype)
    if args.via_server:
        forwarder = UdpForwarder(args.via_server, timeout=args.timeout, retries=1)
        host, port = parse_hostport(args.via_server)
        try:
            socket.getaddrinfo(host, port)
        except OSError as exc:
            raise ConfigError(f"bad --via-server {args.via_server}: {exc}") from exc
        result = forwarder(name, qtype)
    else:
        resolver = Resolver(_ledger(cfg), ContentStore(cfg.store_path), cfg.resolver)
        result = resolver.resolve(name, qtype)
    if args.json:
        _emit(result_to_json(result))
    else:
        print(format_dig(str(name), qtype, result))
    return EXIT_OK


def run_bench(params: LedgerParams, blocks: int = 2, extra: int = 500) -> dict[str, Any]:
    """Flood a fresh in-memory ledger with calibrated set-binding transactions."""
    from .cid import compute_cid

    key = KeyPair.from_passphrase("ddns-bench")
    per_block = params.block_size_bytes // params.avg_tx_size_bytes
    count = per_block * blocks + extra
    budget = params.creation_fee * 2 + params.modification_fee * count
    ledger = Ledger(Genesis(params, {key.address: budget}))
    ledger.create_root_asset("XXX", key.address, key)
    ledger.create_sub_asset("XXX", "WWW", key.address, key)
    ledger.produce_block()

    t0 = time.perf_counter()
    for i in range(count):
        ledger.set_binding("XXX/WWW", Binding.active(compute_cid(b"bench-%d" % i)), key)
    t_submit = time.perf_counter() - t0
    sizes = {serialized_size(tx) for tx in ledger.mempool()}
    t0 = time.perf_counter()
    produced = [ledger.produce_block(now=float(i * params.block_interval_s)) for i in range(blocks)]
    t_pack = time.perf_counter() - t0
    packed = [len(b.txs) for b in produced]
    cap = capacity_tps(params)
    return {
        "capacity_tps": int(cap),
        "capacity_tps_exact": str(cap),
        "tx_size_bytes": sorted(sizes),
        "txs_submitted": count,
        "txs_per_block": packed,
        "block_bytes": [b.total_bytes for b in produced],
        "measured_tps": round(sum(packed) / (blocks * float(params.block_interval_s)), 3),
        "mempool_left": ledger.mempool_size(),
        "wall_seconds": {"submit": round(t_submit, 3), "pack": round(t_pack, 3)},
    }


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args)
    _emit(rpc_envelope(run_bench(cfg.ledger, args.blocks, args.extra), id=RPC_ID))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        doc = json.loads(cfg.stats_path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no stats at {cfg.stats_path}; is the server running?") from None
    _emit(rpc_envelope(doc, id=RPC_ID))
    return EXIT_OK


def _write_stats(cfg: Config, server: DnsServer, resolver: Resolver, ledger: Ledger) -> None:
    doc = {
        "address": "%s:%d" % server.address,
        "updated_at": time.time(),
        "height": ledger.height,
        **resolver.stats.snapshot(),
        "cache_entries": len(resolver.cache),
    }
    atomic_write(cfg.stats_path, json.dumps(doc).encode())


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ledger = _ledger(cfg)
    store = ContentStore(cfg.store_path)
    resolver = Resolver(ledger, store, cfg.resolver)
    ledger.add_listener(resolver.on_block)
    server = DnsServer(resolver, cfg.server.bind, cfg.server.port, max_inflight=cfg.server.max_inflight)
    interval = args.block_interval if args.block_interval is not None else cfg.ledger.block_interval_s
    scheduler = BlockScheduler(ledger, interval)
    stop = threading.Event()

    def on_signal(signum, _frame) -> None:
        log.info("signal %d: shutting down", signum)
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    scheduler.start()
    server.start()
    log.info("ddns serving %s:%d (upstream %s)", *server.address, cfg.resolver.upstream)
    try:
        while not stop.wait(1.0):
            _write_stats(cfg, server, resolver, ledger)
    finally:
        server.shutdown()
        scheduler.stop()
        _write_stats(cfg, server, resolver, ledger)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: $DDNS_CONFIG)")
    common.add_argument("--data-dir", help="chain/store directory (overrides config)")
    common.add_argument("--key-file", help="owner key file")
    common.add_argument("--root-suffix", help="DDNS root suffix (default ddns)")
    common.add_argument("--upstream", help="upstream resolver host:port (default 1.1.1.1:53)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="ddns", description="Decentralized domain name service node and tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("serve", cmd_serve, "run the DNS proxy daemon")
    p.add_argument("--port", type=int, help="UDP port (default 5553)")
    p.add_argument("--bind", help="bind address (default 127.0.0.1)")
    p.add_argument("--block-interval", type=float, help="seconds between scheduler ticks")

    p = add("keygen", cmd_keygen, "create an owner key file")
    p.add_argument("--force", action="store_true")

    add("init", cmd_init, "create the chain and store directories")

    p = add("register-tld", cmd_register_tld, "register a top-level domain asset")
    p.add_argument("tld")

    p = add("add-subdomain", cmd_add_subdomain, "create SUB.TLD")
    p.add_argument("tld")
    p.add_argument("sub")
    p.add_argument("--owner", help="address receiving the new asset (default: key owner)")

    p = add("set-record", cmd_set_record, "publish a JSON record file for a domain")
    p.add_argument("domain")
    p.add_argument("file", help="record file path, or - for stdin")

    p = add("disable", cmd_disable, "deactivate a domain")
    p.add_argument("domain")

    p = add("transfer", cmd_transfer, "transfer a domain to another address")
    p.add_argument("domain")
    p.add_argument("new_owner")

    p = add("asset", cmd_asset, "show the ledger record of a domain")
    p.add_argument("domain")

    p = add("resolve", cmd_resolve, "resolve a name")
    p.add_argument("name")
    p.add_argument("qtype", nargs="?", default="A")
    p.add_argument("--via-server", help="query a running server at host:port instead")
    p.add_argument("--timeout", type=float, default=2.0)
    p.add_argument("--json", action="store_true", help="print JSON instead of dig-style text")

    p = add("bench", cmd_bench, "measure block packing throughput")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--extra", type=int, default=500, help="transactions beyond full blocks")

    add("stats", cmd_stats, "print counters of a running server")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose or args.command == "serve" else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DdnsError as exc:
        code = exit_code_for(exc)
        print(f"ddns: {type(exc).__name__}: {exc}", file=sys.stderr)
        _emit(rpc_envelope(None, {"code": code, "type": type(exc).__name__, "message": str(exc)}, id=RPC_ID))
        return code
    except OSError as exc:
        print(f"ddns: {exc}", file=sys.stderr)
        _emit(rpc_envelope(None, {"code": EXIT_INTERNAL, "type": type(exc).__name__, "message": str(exc)}, id=RPC_ID))
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
