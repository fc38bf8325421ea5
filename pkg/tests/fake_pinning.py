"""In-process stand-in for a Pinata-shaped pinning service.

Content ids are computed here with the ``base58`` package, independently of
the code under test.
"""

from __future__ import annotations

import hashlib
import json
import threading
from email.parser import BytesParser
from email.policy import HTTP
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import base58


def reference_cid(payload: bytes) -> str:
    return base58.b58encode(b"\x12\x20" + hashlib.sha256(payload).digest()).decode()


def parse_multipart(content_type: str, body: bytes) -> dict[str, tuple[str | None, bytes]]:
    msg = BytesParser(policy=HTTP).parsebytes(b"Content-Type: " + content_type.encode() + b"\r\n\r\n" + body)
    parts = {}
    for part in msg.iter_parts():
        parts[part.get_param("name", header="content-disposition")] = (part.get_filename(), part.get_payload(decode=True))
    return parts


class FakePinningService:
    """Serve ``POST /pinning/pinFileToIPFS`` on an ephemeral port.

    ``mode`` switches fault behaviour: ``"ok"``, ``"mismatch"`` (answers a
    wrong hash), ``"quota"`` (HTTP 429) or ``"broken"`` (HTTP 500).
    """

    def __init__(self, api_key: str = "test-key") -> None:
        self.api_key = api_key
        self.mode = "ok"
        self.pins: dict[str, bytes] = {}
        self.names: dict[str, str] = {}
        self.requests = 0
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _reply(self, status: int, doc: dict) -> None:
                body = json.dumps(doc).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                service.requests += 1
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                if self.path != "/pinning/pinFileToIPFS":
                    return self._reply(404, {"error": "not found"})
                if self.headers.get("Authorization") != f"Bearer {service.api_key}":
                    return self._reply(401, {"error": "unauthorized"})
                if service.mode == "quota":
                    return self._reply(429, {"error": "quota"})
                if service.mode == "broken":
                    return self._reply(500, {"error": "boom"})
                parts = parse_multipart(self.headers["Content-Type"], body)
                _filename, payload = parts["file"]
                meta = json.loads(parts["pinataMetadata"][1])
                cid = reference_cid(payload)
                service.pins[cid] = payload
                service.names[cid] = meta["name"]
                if service.mode == "mismatch":
                    cid = reference_cid(payload + b"tampered")
                return self._reply(200, {"IpfsHash": cid, "PinSize": len(payload), "Timestamp": "now"})

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = "http://127.0.0.1:%d" % self.httpd.server_address[1]
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self) -> FakePinningService:
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
