"""Read-only SPARQL protocol service over a frozen store.

Routes: ``/sparql`` (GET ``?query=`` or POST with ``application/sparql-query``
or form-encoded ``query=``), ``/graph`` (N-Triples dump) and ``/health``.
There is no authentication or TLS; the default bind address is loopback.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from .sparql import FORMATS, QueryError, QueryTimeout, evaluate, parse_query, serialize_results

log = logging.getLogger(__name__)

NTRIPLES = "application/n-triples"


@dataclass(frozen=True)
class EndpointConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    max_query_bytes: int = 64 * 1024
    default_format: str = "sparql-json"
    request_timeout: float = 10.0  # seconds
    workers: int = 8

    def __post_init__(self):
        if self.max_query_bytes <= 0:
            raise ValueError("max_query_bytes must be positive")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive")
        if self.workers <= 0:
            raise ValueError("workers must be positive")
        if self.default_format not in FORMATS:
            raise ValueError(f"default_format must be one of {sorted(FORMATS)}")

    @staticmethod
    def parse_bind(bind: str) -> tuple:
        host, sep, port = bind.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError(f"bind address must look like HOST:PORT, got {bind!r}")
        return host.strip("[]") or "127.0.0.1", int(port)


@dataclass
class Response:
    status: int
    headers: dict = field(default_factory=dict)
    body: bytes = b""


def _text(status: int, message: str, **headers) -> Response:
    body = (message.rstrip("\n") + "\n").encode("utf-8")
    return Response(status, {"Content-Type": "text/plain; charset=utf-8", **headers}, body)


def negotiate(accept: Optional[str], default: str) -> str:
    """Pick a result format from an Accept header; unknown or absent → default."""
    if not accept:
        return default
    wanted = {"sparql-json": -1.0, "csv": -1.0}
    for part in accept.split(","):
        media, *params = [p.strip() for p in part.split(";")]
        q = 1.0
        for param in params:
            name, _, value = param.partition("=")
            if name.strip() == "q":
                try:
                    q = float(value)
                except ValueError:
                    q = 0.0
        media = media.lower()
        if media in ("application/sparql-results+json", "application/json"):
            wanted["sparql-json"] = max(wanted["sparql-json"], q)
        elif media in ("text/csv",):
            wanted["csv"] = max(wanted["csv"], q)
    best = max(wanted.values())
    if best <= 0:
        return default
    if wanted[default] == best:
        return default
    return max(wanted, key=lambda k: wanted[k])


class Endpoint:
    """Request handling independent of any socket; :meth:`handle` is pure w.r.t. the store."""

    def __init__(self, store, config: EndpointConfig = EndpointConfig()):
        if not store.frozen:
            store.freeze()
        self.store = store
        self.config = config
        self._dump = store.dump().encode("utf-8")
        self._slots = threading.BoundedSemaphore(config.workers)

    def handle(self, method: str, target: str, headers: Optional[dict] = None, body: bytes = b"") -> Response:
        headers = {k.lower(): v for k, v in (headers or {}).items()}
        parts = urlsplit(target)
        path = parts.path
        if path == "/health":
            if method not in ("GET", "HEAD"):
                return _text(405, "method not allowed", Allow="GET, HEAD")
            return self._maybe_head(method, _text(200, "ok"))
        if path == "/graph":
            if method not in ("GET", "HEAD"):
                return _text(405, "method not allowed", Allow="GET, HEAD")
            return self._maybe_head(method, Response(200, {"Content-Type": NTRIPLES}, self._dump))
        if path != "/sparql":
            return _text(404, f"not found: {path}")

        if method == "GET":
            queries = parse_qs(parts.query, keep_blank_values=True).get("query")
        elif method == "POST":
            if len(body) > 3 * self.config.max_query_bytes:
                return _text(413, f"query exceeds {self.config.max_query_bytes} bytes")
            ctype = headers.get("content-type", "").split(";")[0].strip().lower()
            if ctype == "application/sparql-query":
                try:
                    queries = [body.decode("utf-8")]
                except UnicodeDecodeError:
                    return _text(400, "query body is not valid UTF-8")
            elif ctype == "application/x-www-form-urlencoded":
                try:
                    queries = parse_qs(body.decode("ascii"), keep_blank_values=True).get("query")
                except UnicodeDecodeError:
                    return _text(400, "form body is not valid URL-encoded ASCII")
            else:
                return _text(415, f"unsupported content type {ctype or '(none)'}; "
                                  "use application/sparql-query or application/x-www-form-urlencoded")
        else:
            return _text(405, "method not allowed", Allow="GET, POST")

        if not queries:
            return _text(400, "missing 'query' parameter")
        if len(queries) > 1:
            return _text(400, "exactly one 'query' parameter is allowed")
        query = queries[0]
        if len(query.encode("utf-8")) > self.config.max_query_bytes:
            return _text(413, f"query exceeds {self.config.max_query_bytes} bytes")
        fmt = negotiate(headers.get("accept"), self.config.default_format)
        return self._run(query, fmt)

    def _maybe_head(self, method: str, response: Response) -> Response:
        if method == "HEAD":
            response.headers["Content-Length"] = str(len(response.body))
            response.body = b""
        return response

    def _run(self, query: str, fmt: str) -> Response:
        try:
            ast = parse_query(query)
        except QueryError as exc:
            return _text(400, f"query error: {exc}")
        retry = str(max(1, int(self.config.request_timeout)))
        if not self._slots.acquire(timeout=self.config.request_timeout):
            return _text(503, "all workers are busy", **{"Retry-After": retry})
        try:
            table = evaluate(ast, self.store, timeout=self.config.request_timeout)
        except QueryTimeout:
            return _text(503, "query evaluation timed out", **{"Retry-After": retry})
        finally:
            self._slots.release()
        content_type = FORMATS[fmt] + "; charset=utf-8"
        return Response(200, {"Content-Type": content_type}, serialize_results(table, fmt))


def _handler_class(endpoint: Endpoint):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "roc-kb"

        def _dispatch(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length > 3 * endpoint.config.max_query_bytes + 1024:
                # refuse to read an oversized body; drop the connection afterwards
                self.close_connection = True
                self._send(_text(413, f"query exceeds {endpoint.config.max_query_bytes} bytes"))
                return
            body = self.rfile.read(length) if length else b""
            response = endpoint.handle(self.command, self.path, dict(self.headers.items()), body)
            self._send(response)

        def _send(self, response: Response):
            self.send_response(response.status)
            for name, value in response.headers.items():
                self.send_header(name, value)
            if "Content-Length" not in response.headers:
                self.send_header("Content-Length", str(len(response.body)))
            self.end_headers()
            if response.body:
                self.wfile.write(response.body)

        do_GET = do_POST = do_HEAD = do_PUT = do_DELETE = do_PATCH = _dispatch

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(endpoint: Endpoint) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((endpoint.config.host, endpoint.config.port), _handler_class(endpoint))
    server.daemon_threads = True
    return server


def serve(store, config: EndpointConfig = EndpointConfig()):
    server = make_server(Endpoint(store, config))
    host, port = server.server_address[:2]
    log.info("serving SPARQL on http://%s:%s/sparql", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
