"""Thin HTTP/1.1 listener over the service router.

Parsing and response writing only; every route decision lives in
Service.route, which the in-process transport shares.
"""

from __future__ import annotations

import json
import mimetypes
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .codec import canonical_json
from .service import ApiRequest, Service


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "da2fa"

    # Set by make_server:
    service: Service = None
    playground_dir: Optional[Path] = None
    quiet = True

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _handle(self, method: str) -> None:
        parsed = urllib.parse.urlsplit(self.path)
        if method == "GET" and parsed.path.startswith("/playground"):
            self._serve_static(parsed.path)
            return
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode())
            except json.JSONDecodeError:
                self._write(400, {"error": "bad_json"})
                return
        request = ApiRequest(
            method=method,
            path=parsed.path,
            query=dict(urllib.parse.parse_qsl(parsed.query)),
            headers={k.lower(): v for k, v in self.headers.items()},
            body=body,
        )
        response = self.service.route(request)
        headers = {}
        if response.set_cookie:
            headers["Set-Cookie"] = response.set_cookie
        if response.location:
            headers["Location"] = response.location
        self._write(response.status, response.body, headers)

    def _write(self, status: int, body: dict, headers: dict | None = None) -> None:
        payload = canonical_json(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(payload)

    def _serve_static(self, path: str) -> None:
        root = self.playground_dir
        rel = path[len("/playground"):].lstrip("/") or "index.html"
        if root is None:
            self._write(404, {"error": "playground_not_built"})
            return
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._write(404, {"error": "not_found"})
            return
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")


def make_server(service: Service, host: str = "127.0.0.1", port: int = 0,
                playground_dir: str | Path | None = None,
                ) -> tuple[ThreadingHTTPServer, str]:
    """Bind a threading server; port 0 picks an ephemeral port.

    Returns (server, base_url). Call server.serve_forever() or start_in_thread.
    """
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "playground_dir": Path(playground_dir) if playground_dir else None,
    })
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    base_url = f"http://{server.server_address[0]}:{server.server_address[1]}"
    return server, base_url


def start_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
