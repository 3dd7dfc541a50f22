"""Snapshot-broadcast mesh server over raw TCP and WebSocket.

Both transports carry the same message bytes. Raw TCP wraps each message in
a Frame; WebSocket sends one binary frame per message and relies on WS
framing. Delivery is latest-wins: a slow client skips stale snapshots and
always converges to the newest published mesh. The publisher never blocks
on client I/O; the only shared state is an atomically swapped snapshot
buffer guarded by a condition variable, and no lock is held during writes.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
import socket
import struct
import threading
from typing import Optional, Union

from .mesh import TriangleMesh
from .protocol import FrameDecoder, decode_mesh, encode_frame, encode_mesh

logger = logging.getLogger(__name__)

DEFAULT_TCP_PORT = 9400
DEFAULT_WS_PORT = 9401
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def resolve_bind_host(explicit: Optional[str] = None) -> str:
    if explicit is not None:
        return explicit
    return os.environ.get("LIMRSF_BIND", "127.0.0.1")


def _ws_binary_frame(payload: bytes) -> bytes:
    n = len(payload)
    if n < 126:
        head = struct.pack("!BB", 0x82, n)
    elif n < 1 << 16:
        head = struct.pack("!BBH", 0x82, 126, n)
    else:
        head = struct.pack("!BBQ", 0x82, 127, n)
    return head + payload


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-read")
        buf.extend(chunk)
    return bytes(buf)


class _Client:
    def __init__(self, conn: socket.socket, websocket: bool):
        self.conn = conn
        self.websocket = websocket
        self.send_lock = threading.Lock()  # snapshot writer vs pong replies
        self.closed = False  # set by the reader on EOF/close, wakes the writer


class MeshStreamServer:
    """Serves the latest published mesh snapshot to every connected client."""

    def __init__(
        self,
        host: Optional[str] = None,
        tcp_port: int = DEFAULT_TCP_PORT,
        ws_port: int = DEFAULT_WS_PORT,
        initial_mesh: Optional[TriangleMesh] = None,
    ):
        self._host = resolve_bind_host(host)
        self._tcp_port = tcp_port
        self._ws_port = ws_port
        self._cond = threading.Condition()
        self._seq = 0
        self._payload: Optional[bytes] = None
        self._stopped = False
        self._clients: set[_Client] = set()
        self._threads: list[threading.Thread] = []
        self._tcp_listener: Optional[socket.socket] = None
        self._ws_listener: Optional[socket.socket] = None
        if initial_mesh is not None:
            self.publish(initial_mesh)

    # -- lifecycle -----------------------------------------------------

    def start(self) -> None:
        self._tcp_listener = self._listen(self._tcp_port)
        self._ws_listener = self._listen(self._ws_port)
        for listener, websocket in ((self._tcp_listener, False), (self._ws_listener, True)):
            t = threading.Thread(
                target=self._accept_loop, args=(listener, websocket), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _listen(self, port: int) -> socket.socket:
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((self._host, port))
        s.listen(64)
        return s

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            clients = list(self._clients)
            self._cond.notify_all()
        for listener in (self._tcp_listener, self._ws_listener):
            if listener is not None:
                try:
                    # close() alone does not wake a blocked accept()
                    listener.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                listener.close()
        for client in clients:
            try:
                client.conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            client.conn.close()
        for t in self._threads:
            t.join(timeout=5.0)

    def __enter__(self) -> "MeshStreamServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def tcp_address(self) -> tuple[str, int]:
        assert self._tcp_listener is not None, "server not started"
        return self._tcp_listener.getsockname()[:2]

    @property
    def ws_address(self) -> tuple[str, int]:
        assert self._ws_listener is not None, "server not started"
        return self._ws_listener.getsockname()[:2]

    # -- publishing ----------------------------------------------------

    def publish(self, mesh: Union[TriangleMesh, bytes]) -> int:
        """Swap in a new snapshot and wake every writer. Never blocks on I/O."""
        payload = mesh if isinstance(mesh, bytes) else encode_mesh(mesh)
        with self._cond:
            self._payload = payload
            self._seq += 1
            self._cond.notify_all()
            return self._seq

    @property
    def snapshot_count(self) -> int:
        with self._cond:
            return self._seq

    @property
    def client_count(self) -> int:
        with self._cond:
            return len(self._clients)

    # -- per-connection machinery ---------------------------------------

    def _accept_loop(self, listener: socket.socket, websocket: bool) -> None:
        while True:
            try:
                conn, addr = listener.accept()
            except OSError:
                return  # listener closed by stop()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(
                target=self._client_main, args=(conn, addr, websocket), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _client_main(self, conn: socket.socket, addr, websocket: bool) -> None:
        client = _Client(conn, websocket)
        try:
            if websocket:
                self._ws_handshake(conn)
            with self._cond:
                if self._stopped:
                    return
                self._clients.add(client)
            read_loop = self._ws_read_loop if websocket else self._drain_loop
            reader = threading.Thread(target=read_loop, args=(client,), daemon=True)
            reader.start()
            self._write_loop(client)
        except (OSError, ConnectionError, ValueError) as exc:
            logger.debug("client %s dropped: %s", addr, exc)
        finally:
            with self._cond:
                self._clients.discard(client)
            try:
                # close alone leaves a blocked reader pinning the socket: no FIN
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()

    def _write_loop(self, client: _Client) -> None:
        sent_seq = 0
        while True:
            with self._cond:
                while self._seq == sent_seq and not self._stopped and not client.closed:
                    self._cond.wait()
                if self._stopped or client.closed:
                    return
                seq, payload = self._seq, self._payload
            assert payload is not None
            data = _ws_binary_frame(payload) if client.websocket else encode_frame(payload)
            with client.send_lock:
                client.conn.sendall(data)
            sent_seq = seq

    # -- WebSocket plumbing ---------------------------------------------

    def _ws_handshake(self, conn: socket.socket) -> None:
        request = bytearray()
        while b"\r\n\r\n" not in request:
            chunk = conn.recv(4096)
            if not chunk:
                raise ConnectionError("peer closed during WebSocket handshake")
            request.extend(chunk)
            if len(request) > 1 << 16:
                raise ValueError("oversized WebSocket handshake request")
        key = None
        for line in bytes(request).split(b"\r\n")[1:]:
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"sec-websocket-key":
                key = value.strip().decode("ascii")
        if key is None:
            raise ValueError("handshake missing Sec-WebSocket-Key")
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
        ).decode("ascii")
        conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("ascii")
        )

    def _ws_read_loop(self, client: _Client) -> None:
        """Drain client frames: answer ping, honor close, ignore the rest."""
        conn = client.conn
        try:
            while True:
                b0, b1 = _recv_exact(conn, 2)
                opcode = b0 & 0x0F
                length = b1 & 0x7F
                if length == 126:
                    (length,) = struct.unpack("!H", _recv_exact(conn, 2))
                elif length == 127:
                    (length,) = struct.unpack("!Q", _recv_exact(conn, 8))
                mask = _recv_exact(conn, 4) if b1 & 0x80 else None
                payload = _recv_exact(conn, length) if length else b""
                if mask:
                    payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
                if opcode == 0x8:  # close
                    with client.send_lock:
                        conn.sendall(struct.pack("!BB", 0x88, 0))
                    break
                if opcode == 0x9:  # ping
                    with client.send_lock:
                        conn.sendall(struct.pack("!BB", 0x8A, len(payload)) + payload)
        except (OSError, ConnectionError):
            pass
        finally:
            self._mark_closed(client)

    def _drain_loop(self, client: _Client) -> None:
        """Discard anything a raw TCP client sends; its job is to spot EOF."""
        try:
            while client.conn.recv(4096):
                pass
        except OSError:
            pass
        finally:
            self._mark_closed(client)

    def _mark_closed(self, client: _Client) -> None:
        try:
            client.conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        with self._cond:
            client.closed = True
            self._cond.notify_all()


def watch_and_republish(
    path,
    server: MeshStreamServer,
    stop: threading.Event,
    interval: float = 0.5,
) -> None:
    """Poll a mesh PLY file and publish it whenever its stat signature changes.

    A half-written or malformed file logs a warning and is retried on the
    next change; the previous snapshot keeps serving meanwhile. The file's
    state at call time counts as already published.
    """
    from . import ply  # local import: stream stays usable without file plumbing

    try:
        st = os.stat(path)
        last = (st.st_mtime_ns, st.st_size)
    except OSError:
        last = None
    while not stop.wait(interval):
        try:
            st = os.stat(path)
        except OSError:
            continue
        signature = (st.st_mtime_ns, st.st_size)
        if signature == last:
            continue
        try:
            server.publish(ply.load_mesh(path))
            last = signature
        except Exception as exc:
            logger.warning("republish of %s failed, will retry: %s", path, exc)


def fetch_once(address: Union[str, tuple[str, int]], timeout: float = 10.0) -> TriangleMesh:
    """Connect to a raw-TCP endpoint, read one framed snapshot, decode it."""
    if isinstance(address, str):
        host, _, port = address.rpartition(":")
        address = (host or "127.0.0.1", int(port))
    decoder = FrameDecoder()
    with socket.create_connection(address, timeout=timeout) as conn:
        while True:
            chunk = conn.recv(65536)
            if not chunk:
                raise ConnectionError(
                    f"connection closed after {decoder.pending_bytes} buffered bytes "
                    "without a complete frame"
                )
            payloads = decoder.feed(chunk)
            if payloads:
                return decode_mesh(payloads[0]).to_mesh()
