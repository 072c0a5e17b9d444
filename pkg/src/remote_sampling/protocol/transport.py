"""Transports carrying framed messages between the leader and custodians.

Both transports move the same encoded frames, so a run produces the same
byte transcript whichever one is used.
"""
from __future__ import annotations

import socket
import threading
from collections import deque

from .messages import Message, decode, read_frame


class TransportError(RuntimeError):
    pass


class InMemoryTransport:
    """Custodians live in the leader's process and answer synchronously.

    With ``wire=True`` every message is encoded to its frame and decoded on
    the other side, exactly as over a socket.  ``wire=False`` hands message
    objects across directly; the metered bits are the same, only the frame
    bytes are not materialized (``send``/``recv`` return ``None`` for them).
    """

    def __init__(self, custodians, wire: bool = True):
        self.custodians = list(custodians)
        self.wire = wire
        self.queues = [deque() for _ in self.custodians]
        for c, q in zip(self.custodians, self.queues):
            hello = c.hello()
            q.append(hello.encode() if wire else hello)

    @property
    def size(self) -> int:
        return len(self.custodians)

    def send(self, msg: Message) -> bytes | None:
        i = msg.custodian
        if self.wire:
            frame = msg.encode()
            q = self.queues[i]
            for reply in self.custodians[i].handle(decode(frame)):
                q.append(reply.encode())
            return frame
        self.queues[i].extend(self.custodians[i].handle(msg))
        return None

    def recv(self, i: int) -> tuple[Message, bytes | None]:
        if not self.queues[i]:
            raise TransportError(f"custodian {i} has nothing to say")
        item = self.queues[i].popleft()
        if self.wire:
            return decode(item), item
        return item, None

    def close(self):
        pass


def _recv_exact(sock: socket.socket):
    def recv(n: int) -> bytes:
        chunks = []
        while n:
            chunk = sock.recv(n)
            if not chunk:
                raise EOFError("socket closed mid-frame")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    return recv


def serve_custodian(sock: socket.socket, custodian) -> None:
    """Run one custodian over a connected stream socket until it outputs."""
    recv = _recv_exact(sock)
    try:
        sock.sendall(custodian.hello().encode())
        while not custodian.finished:
            try:
                frame = read_frame(recv)
            except EOFError:
                break
            for reply in custodian.handle(decode(frame)):
                sock.sendall(reply.encode())
    finally:
        sock.close()


class SocketTransport:
    """Length-prefixed frames over stream sockets, one per custodian.

    ``SocketTransport.local(custodians)`` serves each custodian from a thread
    on one end of a socket pair; ``SocketTransport(sockets)`` uses
    already-connected sockets (e.g. TCP connections to remote custodians).
    """

    def __init__(self, sockets, threads=()):
        self.sockets = list(sockets)
        self.threads = list(threads)
        self._recv = [_recv_exact(s) for s in self.sockets]

    @classmethod
    def local(cls, custodians) -> SocketTransport:
        ours, threads = [], []
        for c in custodians:
            a, b = socket.socketpair()
            th = threading.Thread(target=serve_custodian, args=(b, c), daemon=True)
            th.start()
            ours.append(a)
            threads.append(th)
        return cls(ours, threads)

    @property
    def size(self) -> int:
        return len(self.sockets)

    def send(self, msg: Message) -> bytes:
        frame = msg.encode()
        self.sockets[msg.custodian].sendall(frame)
        return frame

    def recv(self, i: int) -> tuple[Message, bytes]:
        try:
            frame = read_frame(self._recv[i])
        except EOFError as exc:
            raise TransportError(f"custodian {i} hung up") from exc
        return decode(frame), frame

    def close(self):
        for s in self.sockets:
            try:
                s.close()
            except OSError:
                pass
        for th in self.threads:
            th.join(timeout=5)
