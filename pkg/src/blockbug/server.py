"""Protocol transports: standard streams and a single-client WebSocket.

Both speak the line format of :mod:`blockbug.protocol`. The WebSocket server
is a deliberately small hand-rolled RFC 6455 subset — text frames, ping/pong,
close, no extensions, no fragmentation — because the debugger serves exactly
one local client and the dependency would outweigh the feature. The same
socket also serves the UI's static files over plain HTTP GET.

Concurrency model: one selectors loop owns the session; sockets are handled
inside that loop, so no locking anywhere. A second WebSocket client while one
is connected is rejected with 409.
"""

from __future__ import annotations

import base64
import hashlib
import selectors
import socket
import sys
from pathlib import Path

from . import protocol
from .errors import ProtocolError
from .session import Session

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


class _Dispatcher:
    """Seq bookkeeping shared by both transports."""

    def __init__(self, session: Session):
        self.session = session
        self.event_seq = 0

    def lines_for(self, line: str) -> list[str]:
        """One request line in, response + event lines out."""
        try:
            msg = protocol.decode(line)
        except ProtocolError as exc:
            return [protocol.encode(protocol.error_response(0, "?", exc))]
        if msg["kind"] != "request":
            exc = ProtocolError("only requests may be sent to the server")
            return [protocol.encode(
                protocol.error_response(msg["seq"], msg["command"], exc))]
        result, events = self.session.handle(msg["command"], msg["payload"])
        out = [protocol.encode(
            protocol.response(msg["seq"], msg["command"], result))]
        for name, payload in events:
            self.event_seq += 1
            out.append(protocol.encode(
                protocol.event(self.event_seq, name, payload)))
        return out


def serve_stdio(session: Session, in_stream=None, out_stream=None) -> None:
    """Line-delimited JSON over standard streams until EOF."""
    in_stream = in_stream if in_stream is not None else sys.stdin
    out_stream = out_stream if out_stream is not None else sys.stdout
    dispatcher = _Dispatcher(session)
    for line in in_stream:
        if not line.strip():
            continue
        for out in dispatcher.lines_for(line):
            out_stream.write(out + "\n")
        out_stream.flush()


# ---------------------------------------------------------------------------
# WebSocket framing


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed")
        buf += chunk
    return buf


def ws_read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """-> (opcode, payload). Raises ConnectionError on a dead socket."""
    head = _recv_exact(sock, 2)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = int.from_bytes(_recv_exact(sock, 2), "big")
    elif length == 127:
        length = int.from_bytes(_recv_exact(sock, 8), "big")
    mask = _recv_exact(sock, 4) if masked else b""
    payload = _recv_exact(sock, length) if length else b""
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + n.to_bytes(2, "big")
    else:
        head += bytes([127]) + n.to_bytes(8, "big")
    return head + payload


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _http_response(status: str, body: bytes = b"",
                   content_type: str = "text/plain; charset=utf-8",
                   extra: str = "") -> bytes:
    return (f"HTTP/1.1 {status}\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            f"{extra}"
            f"Connection: close\r\n\r\n").encode() + body


class DebugServer:
    """Single-client WebSocket debug server with static file hosting."""

    def __init__(self, port: int = 7323, host: str = "127.0.0.1",
                 seed: int = 0, project_path: str | None = None,
                 static_dir: str | Path | None = None):
        self.host = host
        self.port = port
        self.seed = seed
        self.project_path = project_path
        self.static_dir = Path(static_dir) if static_dir else None
        self.session = Session(seed=seed)
        if project_path:
            self.session.handle("load_project", {"path": project_path})
        self.dispatcher = _Dispatcher(self.session)
        self.listener: socket.socket | None = None
        self.client: socket.socket | None = None
        self._sel = selectors.DefaultSelector()

    def start(self) -> int:
        self.listener = socket.create_server((self.host, self.port))
        self.port = self.listener.getsockname()[1]
        self._sel.register(self.listener, selectors.EVENT_READ, "listen")
        return self.port

    def close(self) -> None:
        for sock in (self.client, self.listener):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        self.client = None
        self.listener = None

    # -- connection handling ----------------------------------------------------

    def _read_http_head(self, conn: socket.socket) -> tuple[str, dict[str, str]]:
        conn.settimeout(5.0)
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = conn.recv(4096)
            if not chunk:
                raise ConnectionError("peer closed during HTTP head")
            data += chunk
            if len(data) > 64 * 1024:
                raise ConnectionError("oversized HTTP head")
        head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
        lines = head.split("\r\n")
        headers = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        return lines[0], headers

    def _accept(self) -> None:
        conn, _ = self.listener.accept()
        try:
            request_line, headers = self._read_http_head(conn)
        except (ConnectionError, OSError, socket.timeout):
            conn.close()
            return
        parts = request_line.split()
        path = parts[1] if len(parts) > 1 else "/"
        if headers.get("upgrade", "").lower() == "websocket":
            self._accept_websocket(conn, headers)
        elif parts and parts[0] == "GET":
            conn.sendall(self._static_response(path))
            conn.close()
        else:
            conn.sendall(_http_response("405 Method Not Allowed"))
            conn.close()

    def _accept_websocket(self, conn: socket.socket, headers: dict) -> None:
        if self.client is not None:
            conn.sendall(_http_response(
                "409 Conflict", b"a debugger client is already connected"))
            conn.close()
            return
        key = headers.get("sec-websocket-key")
        if not key:
            conn.sendall(_http_response("400 Bad Request",
                                        b"missing Sec-WebSocket-Key"))
            conn.close()
            return
        conn.sendall((
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n\r\n").encode())
        conn.settimeout(None)
        self.client = conn
        self._sel.register(conn, selectors.EVENT_READ, "client")

    def _drop_client(self) -> None:
        if self.client is None:
            return
        try:
            self._sel.unregister(self.client)
        except (KeyError, ValueError):
            pass
        try:
            self.client.close()
        except OSError:
            pass
        self.client = None

    def _client_message(self) -> bool:
        """Handle one frame; False when the client went away."""
        try:
            opcode, payload = ws_read_frame(self.client)
        except (ConnectionError, OSError):
            return False
        if opcode == 0x8:  # close
            try:
                self.client.sendall(ws_frame(payload, opcode=0x8))
            except OSError:
                pass
            return False
        if opcode == 0x9:  # ping
            self.client.sendall(ws_frame(payload, opcode=0xA))
            return True
        if opcode != 0x1:
            return True
        for line in self.dispatcher.lines_for(payload.decode("utf-8")):
            self.client.sendall(ws_frame(line.encode("utf-8")))
        return True

    def _static_response(self, path: str) -> bytes:
        if self.static_dir is None:
            return _http_response("404 Not Found", b"no static directory")
        name = path.split("?", 1)[0]
        if name.endswith("/"):
            name += "index.html"
        target = (self.static_dir / name.lstrip("/")).resolve()
        root = self.static_dir.resolve()
        if not target.is_relative_to(root) or not target.is_file():
            return _http_response("404 Not Found", b"not found")
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return _http_response("200 OK", target.read_bytes(), ctype)

    def serve_forever(self, once: bool = False) -> None:
        """Accept and serve; with ``once`` return after the first WebSocket
        client disconnects (used by tests and scripted demos)."""
        had_client = False
        while True:
            if self.listener is None:
                return
            try:
                ready = self._sel.select(timeout=0.5)
            except OSError:
                return
            for key, _ in ready:
                if key.data == "listen":
                    self._accept()
                    had_client = had_client or self.client is not None
                elif key.data == "client":
                    if not self._client_message():
                        self._drop_client()
                        if once and had_client:
                            return
