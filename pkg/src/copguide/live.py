"""Live guidance over TCP.

A client streams fused CoP samples as text lines ``t,x,y`` (an optional
fourth field ``valid`` of 0/1 is accepted). For every sample the engine
ticks once and any resulting commands are written back as 8-byte frames.
A line that cannot be used gets ``ERR parse <line>`` (or ``ERR order
<line>`` for a timestamp that does not advance); three bad lines in a row
close the session.
"""
from __future__ import annotations

import logging
import math
import socketserver
import threading

from .copstream import CoPSample
from .feedback import FeedbackConfig, FeedbackEngine, encode_command
from .refpath import ReferencePath

log = logging.getLogger(__name__)

MAX_CONSECUTIVE_ERRORS = 3


def parse_sample_line(line: str) -> CoPSample:
    parts = line.strip().split(",")
    if len(parts) not in (3, 4):
        raise ValueError(f"expected 3 or 4 fields, got {len(parts)}")
    t, x, y = (float(p) for p in parts[:3])
    valid = True
    if len(parts) == 4:
        if parts[3].strip() not in ("0", "1"):
            raise ValueError("valid flag must be 0 or 1")
        valid = parts[3].strip() == "1"
    if not math.isfinite(t) or (valid and not (math.isfinite(x) and math.isfinite(y))):
        raise ValueError("non-finite field")
    return CoPSample(t, x, y, valid)


class GuidanceSession:
    """Protocol state for one connection, independent of the transport."""

    def __init__(self, path: ReferencePath, config: FeedbackConfig):
        self.engine = FeedbackEngine(path, config)
        self.lineno = 0
        self.errors_in_row = 0
        self.closed = False

    def feed(self, line: str) -> bytes:
        """Handle one input line and return the bytes to send back."""
        self.lineno += 1
        try:
            sample = parse_sample_line(line)
        except ValueError:
            return self._reject("parse")
        try:
            commands = self.engine.step(sample)
        except ValueError:
            return self._reject("order")
        self.errors_in_row = 0
        return b"".join(encode_command(c) for c in commands)

    def _reject(self, kind: str) -> bytes:
        self.errors_in_row += 1
        if self.errors_in_row >= MAX_CONSECUTIVE_ERRORS:
            self.closed = True
        return f"ERR {kind} {self.lineno}\n".encode()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: GuidanceServer = self.server
        session = GuidanceSession(server.path, server.config)
        for raw in self.rfile:
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                line = "\x00"
            if not line.strip():
                continue
            out = session.feed(line)
            if out:
                self.wfile.write(out)
                self.wfile.flush()
            if session.closed:
                log.warning("closing session from %s: protocol violation", self.client_address)
                with server.lock:
                    server.violations += 1
                break


class GuidanceServer(socketserver.ThreadingTCPServer):
    """One engine per connection; nothing shared between sessions."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, path: ReferencePath, config: FeedbackConfig | None = None):
        self.path = path
        self.config = config or FeedbackConfig()
        self.violations = 0
        self.lock = threading.Lock()
        super().__init__(address, _Handler)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def serve_live(
    listen: str, path: ReferencePath, config: FeedbackConfig | None = None, once=False, ready=None
) -> int:
    """Serve guidance sessions on ``host:port``.

    With ``once`` the server handles a single connection and returns; the
    return value is the number of sessions closed for protocol violations.
    ``ready`` is called with the bound ``(host, port)`` before serving.
    Raises OSError when the address cannot be bound.
    """
    server = GuidanceServer(parse_address(listen), path, config)
    # non-daemon handler threads are joined by server_close()
    server.daemon_threads = not once
    log.info("listening on %s:%d", *server.server_address[:2])
    if ready is not None:
        ready(server.server_address[:2])
    try:
        if once:
            server.handle_request()
        else:
            server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return server.violations
