"""Frame transports: in-memory queues and real sockets.

Both paths serialize every frame with the same codec, so protocol
behavior cannot depend on the transport.  Endpoints expose blocking
send/recv of whole frames; a recording wrapper captures per-message
transcript entries for leakage audits and protocol forensics.
"""

from __future__ import annotations

import queue
import socket
import struct
from dataclasses import dataclass

from .framing import (HEADER_LEN, MAGIC, Frame, MsgType, decode_frame,
                      encode_frame)


class TransportError(RuntimeError):
    """Endpoint closed or stream corrupted."""


_CLOSED = object()


class MemoryEndpoint:
    """One end of an in-process bidirectional frame channel."""

    def __init__(self, rx: queue.Queue, tx: queue.Queue):
        self._rx = rx
        self._tx = tx

    def send(self, frame: Frame) -> None:
        self._tx.put(encode_frame(frame))

    def recv(self, timeout: float | None = 30.0) -> Frame:
        try:
            data = self._rx.get(timeout=timeout)
        except queue.Empty:
            raise TransportError("recv timed out") from None
        if data is _CLOSED:
            raise TransportError("endpoint closed")
        frame, used = decode_frame(data)
        if used != len(data):
            raise TransportError("trailing bytes in frame")
        return frame

    def close(self) -> None:
        self._tx.put(_CLOSED)


def memory_pair() -> tuple[MemoryEndpoint, MemoryEndpoint]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return (MemoryEndpoint(rx=b_to_a, tx=a_to_b),
            MemoryEndpoint(rx=a_to_b, tx=b_to_a))


class SocketEndpoint:
    """Frame channel over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise TransportError("connection closed mid-frame"
                                     if buf else "connection closed")
            buf.extend(chunk)
        return bytes(buf)

    def send(self, frame: Frame) -> None:
        try:
            self._sock.sendall(encode_frame(frame))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def recv(self, timeout: float | None = 30.0) -> Frame:
        self._sock.settimeout(timeout)
        try:
            header = self._read_exact(HEADER_LEN)
            if header[:4] != MAGIC:
                raise TransportError(f"bad magic {header[:4]!r}")
            (length,) = struct.unpack(">I", header[5:])
            payload = self._read_exact(length)
        except socket.timeout:
            raise TransportError("recv timed out") from None
        frame, _ = decode_frame(header + payload)
        return frame

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def socket_pair() -> tuple[SocketEndpoint, SocketEndpoint]:
    """Connected local socket pair speaking the frame protocol."""
    a, b = socket.socketpair()
    return SocketEndpoint(a), SocketEndpoint(b)


def listen_once(host: str = "127.0.0.1", port: int = 0
                ) -> tuple[socket.socket, int]:
    """Bind a TCP listener; returns (listening socket, bound port)."""
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    return srv, srv.getsockname()[1]


def accept_endpoint(srv: socket.socket, timeout: float = 30.0) -> SocketEndpoint:
    srv.settimeout(timeout)
    try:
        conn, _ = srv.accept()
    except socket.timeout:
        raise TransportError("accept timed out") from None
    finally:
        srv.close()
    return SocketEndpoint(conn)


def connect_endpoint(host: str, port: int, timeout: float = 30.0
                     ) -> SocketEndpoint:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"connect failed: {exc}") from None
    sock.settimeout(None)
    return SocketEndpoint(sock)


@dataclass(frozen=True)
class TranscriptEntry:
    """One classical message as seen by one party."""

    direction: str  # "send" or "recv"
    msg_type: str
    payload_len: int
    detail: int | None = None  # parity bits answered, request items, tag bits

    def to_dict(self) -> dict:
        return {"direction": self.direction, "msg_type": self.msg_type,
                "payload_len": self.payload_len, "detail": self.detail}


def _detail_of(frame: Frame) -> int | None:
    if frame.msg_type == MsgType.PARITY_ANSWER:
        return struct.unpack_from(">I", frame.payload, 0)[0]
    if frame.msg_type == MsgType.PARITY_REQUEST:
        return struct.unpack_from(">I", frame.payload, 0)[0]
    if frame.msg_type == MsgType.TAG_EXCHANGE:
        return frame.payload[0]
    return None


class RecordingEndpoint:
    """Wraps an endpoint, appending TranscriptEntry per message."""

    def __init__(self, inner, log: list):
        self._inner = inner
        self.log = log

    def send(self, frame: Frame) -> None:
        self.log.append(TranscriptEntry("send", frame.msg_type.name,
                                        len(frame.payload), _detail_of(frame)))
        self._inner.send(frame)

    def recv(self, timeout: float | None = 30.0) -> Frame:
        frame = self._inner.recv(timeout=timeout)
        self.log.append(TranscriptEntry("recv", frame.msg_type.name,
                                        len(frame.payload), _detail_of(frame)))
        return frame

    def close(self) -> None:
        self._inner.close()
