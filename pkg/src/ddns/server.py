"""UDP front end exposing a :class:`~ddns.resolver.Resolver` on the wire."""

from __future__ import annotations

import logging
import socket
import threading
from concurrent.futures import ThreadPoolExecutor

from .errors import BindFailure, UnsupportedOpcode, WireError
from .records import Rcode, ResolutionResult, rcode_name, rrtype_name
from .resolver import Resolver
from .wire import MAX_DATAGRAM, decode_query, encode_response, error_response

log = logging.getLogger(__name__)

DEFAULT_PORT = 5553


class DnsServer:
    """Answer DNS queries over UDP.

    Datagrams are handled on a thread pool of ``max_inflight`` workers, so
    replies may leave out of order; ids pair them with their queries.
    Malformed datagrams get FORMERR when their id is readable and are dropped
    otherwise.
    """

    def __init__(
        self,
        resolver: Resolver,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        *,
        max_inflight: int = 64,
    ) -> None:
        self.resolver = resolver
        self.max_inflight = max_inflight
        family = socket.AF_INET6 if ":" in host else socket.AF_INET
        self.sock = socket.socket(family, socket.SOCK_DGRAM)
        try:
            self.sock.bind((host, port))
        except OSError as exc:
            self.sock.close()
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._address = self.sock.getsockname()[:2]
        self.sock.settimeout(0.2)
        self._stop = threading.Event()
        self._slots = threading.BoundedSemaphore(max_inflight)
        self._pool: ThreadPoolExecutor | None = None
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._address

    def handle(self, data: bytes) -> bytes | None:
        """Turn one query datagram into its reply (``None`` means drop)."""
        try:
            query = decode_query(data)
        except UnsupportedOpcode as exc:
            return error_response(exc.msg_id, Rcode.NOTIMP)
        except WireError as exc:
            if exc.msg_id is None:
                return None
            log.debug("malformed query id=%s: %s", exc.msg_id, exc)
            return error_response(exc.msg_id, Rcode.FORMERR)
        try:
            result = self.resolver.resolve(query.qname, query.qtype)
        except Exception:  # noqa: BLE001 - never take the server down
            log.exception("resolver crashed on %s", query.qname)
            result = ResolutionResult.servfail()
        log.info(
            "query %s %s -> %s (%d answers)",
            query.qname or ".",
            rrtype_name(query.qtype),
            rcode_name(result.rcode),
            len(result.answers),
        )
        return encode_response(query, result)

    def _work(self, data: bytes, addr) -> None:
        try:
            reply = self.handle(data)
            if reply is not None:
                self.sock.sendto(reply, addr)
        except OSError as exc:
            log.warning("cannot reply to %s: %s", addr, exc)
        finally:
            self._slots.release()

    def serve_forever(self) -> None:
        self._pool = ThreadPoolExecutor(max_workers=self.max_inflight, thread_name_prefix="dns")
        log.info("listening on %s:%d", *self.address)
        try:
            while not self._stop.is_set():
                try:
                    data, addr = self.sock.recvfrom(MAX_DATAGRAM + 1)
                except socket.timeout:
                    continue
                except OSError:
                    if self._stop.is_set():
                        break
                    raise
                self._slots.acquire()
                self._pool.submit(self._work, data, addr)
        finally:
            # Drain queries already accepted before closing the socket.
            self._pool.shutdown(wait=True)
            self.sock.close()

    def start(self) -> DnsServer:
        self._thread = threading.Thread(target=self.serve_forever, name="dns-server", daemon=True)
        self._thread.start()
        return self

    def shutdown(self, timeout: float | None = 5.0) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)

    def __enter__(self) -> DnsServer:
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.shutdown()
