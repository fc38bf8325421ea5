from __future__ import annotations

import socket
from decimal import Decimal

import dns.message
import dns.query
import pytest

from ddns.keys import KeyPair
from ddns.ledger import Genesis, Ledger, LedgerParams
from ddns.records import ResolutionResult
from ddns.registrar import RegistrarSession
from ddns.resolver import Resolver, ResolverConfig
from ddns.store import ContentStore

_criteria: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number] = (text, report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, outcome, duration = _criteria[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number:>2}: {text} ({duration:.2f}s)")


def no_upstream(name, qtype):
    """Forwarder for tests that must never leave the machine."""
    return ResolutionResult.servfail()


@pytest.fixture
def owner() -> KeyPair:
    return KeyPair.from_passphrase("test owner")


@pytest.fixture
def other() -> KeyPair:
    return KeyPair.from_passphrase("someone else")


@pytest.fixture
def genesis(owner, other) -> Genesis:
    return Genesis(LedgerParams(), {owner.address: Decimal("10"), other.address: Decimal("10")})


@pytest.fixture
def ledger(genesis) -> Ledger:
    return Ledger(genesis)


@pytest.fixture
def store(tmp_path) -> ContentStore:
    return ContentStore(tmp_path / "store")


@pytest.fixture
def resolver(ledger, store) -> Resolver:
    return Resolver(ledger, store, ResolverConfig(), forwarder=no_upstream)


@pytest.fixture
def session(owner, ledger, store, resolver) -> RegistrarSession:
    s = RegistrarSession(owner, ledger, store, resolver=resolver)
    yield s
    s.close()


def dig(address: tuple[str, int], name: str, rdtype: str = "A", timeout: float = 2.0) -> dns.message.Message:
    """Query ``address`` with an independent DNS client."""
    return dns.query.udp(dns.message.make_query(name, rdtype), address[0], port=address[1], timeout=timeout)


def port_free(port: int) -> bool:
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        try:
            s.bind(("127.0.0.1", port))
        except OSError:
            return False
    return True
