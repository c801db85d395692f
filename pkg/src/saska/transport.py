"""Reliable ordered frame transports.

Two realizations of the same duck-typed channel interface (send_frame /
recv_frame / close):

* StreamChannel - a TCP stream carrying the protocol frames verbatim, used
  by the CLI peers.
* MemoryChannel - an in-process pair whose traffic runs through an optional
  adversary callback.  The callback sees each in-flight frame in global
  send order and decides what actually reaches the queues, which is exactly
  the Dolev-Yao attacker: overhear, intercept, modify, drop, inject.

The adversary callback is invoked under a lock, one frame at a time, and is
handed only the events recorded so far - it cannot look ahead at frames not
yet transmitted.
"""

from __future__ import annotations

import queue
import socket
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

from .errors import ChannelClosed, MalformedMessage, Timeout
from .protocol import HEADER_LEN, MAX_BODY


def check_frame(frame: bytes):
    """Validate the outer framing: header present, length consistent, body
    within the 65535-octet limit."""
    if len(frame) < HEADER_LEN:
        raise MalformedMessage(f"frame of {len(frame)} octets is shorter than the header")
    body_len = int.from_bytes(frame[1:5], "big")
    if body_len > MAX_BODY:
        raise MalformedMessage(f"declared body length {body_len} exceeds {MAX_BODY}")
    if len(frame) - HEADER_LEN != body_len:
        raise MalformedMessage(f"frame length {len(frame)} does not match header")


class Direction(Enum):
    A_TO_B = "a->b"
    B_TO_A = "b->a"

    @property
    def reverse(self) -> "Direction":
        return Direction.B_TO_A if self is Direction.A_TO_B else Direction.A_TO_B


# Adversary actions.  A callback returns one action or a list of them;
# actions apply in order.

@dataclass(frozen=True)
class Deliver:
    """Pass the observed frame through unchanged."""


@dataclass(frozen=True)
class Replace:
    """Deliver this frame instead of the observed one."""

    frame: bytes


@dataclass(frozen=True)
class Drop:
    """Deliver nothing."""


@dataclass(frozen=True)
class Inject:
    """Additionally deliver a forged frame travelling in `direction`."""

    frame: bytes
    direction: Direction


Action = Union[Deliver, Replace, Drop, Inject]
AdversaryCallback = Callable[[bytes, Direction, tuple], Union[Action, Sequence[Action]]]


@dataclass(frozen=True)
class TranscriptEvent:
    """One observed frame plus everything the adversary did with it."""

    seq: int
    direction: Direction
    frame: bytes
    actions: tuple
    delivered: tuple  # of (Direction, bytes) actually enqueued


class Transcript:
    """Ordered log of every interposed frame; deterministic given seeds."""

    def __init__(self):
        self._events: list[TranscriptEvent] = []

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, idx):
        return self._events[idx]

    @property
    def events(self) -> tuple:
        return tuple(self._events)


class MemoryChannel:
    """One endpoint of an in-process interposed pair."""

    def __init__(self, router: "_Router", direction: Direction, default_timeout: float):
        self._router = router
        self._direction = direction  # direction of frames we send
        self._rx: queue.Queue = queue.Queue()
        self.default_timeout = default_timeout
        self._closed = False

    def send_frame(self, frame: bytes):
        if self._closed:
            raise ChannelClosed("send on closed channel")
        check_frame(frame)
        self._router.dispatch(self._direction, frame)

    def recv_frame(self, timeout: float | None = None) -> bytes:
        if self._closed:
            raise ChannelClosed("recv on closed channel")
        effective = self.default_timeout if timeout is None else timeout
        try:
            if effective <= 0:
                return self._rx.get_nowait()
            return self._rx.get(timeout=effective)
        except queue.Empty:
            raise Timeout(f"no frame within {effective} s") from None

    def close(self):
        self._closed = True


class _Router:
    def __init__(self, adversary: AdversaryCallback | None):
        self.adversary = adversary
        self.transcript = Transcript()
        self._lock = threading.Lock()
        self._seq = 0
        self.endpoints: dict[Direction, MemoryChannel] = {}

    def _enqueue(self, direction: Direction, frame: bytes):
        check_frame(frame)
        # frames travelling A->B land in B's receive queue
        dest = Direction.B_TO_A if direction is Direction.A_TO_B else Direction.A_TO_B
        self.endpoints[dest]._rx.put(frame)

    def dispatch(self, direction: Direction, frame: bytes):
        with self._lock:
            self._seq += 1
            seq = self._seq
            if self.adversary is None:
                actions: tuple = (Deliver(),)
            else:
                result = self.adversary(frame, direction, self.transcript.events)
                actions = tuple(result) if isinstance(result, (list, tuple)) else (result,)
            delivered = []
            for action in actions:
                if isinstance(action, Deliver):
                    self._enqueue(direction, frame)
                    delivered.append((direction, frame))
                elif isinstance(action, Replace):
                    self._enqueue(direction, action.frame)
                    delivered.append((direction, action.frame))
                elif isinstance(action, Drop):
                    pass
                elif isinstance(action, Inject):
                    self._enqueue(action.direction, action.frame)
                    delivered.append((action.direction, action.frame))
                else:
                    raise TypeError(f"not an adversary action: {action!r}")
            self.transcript._events.append(
                TranscriptEvent(seq, direction, frame, actions, tuple(delivered))
            )


def make_interposed_pair(
    adversary: AdversaryCallback | None = None,
    default_timeout: float = 1.0,
) -> tuple[MemoryChannel, MemoryChannel, Transcript]:
    """Build two channel endpoints whose traffic passes through `adversary`.

    A None callback is the identity adversary: every frame is delivered
    intact and in order.  Returns (endpoint A, endpoint B, transcript).
    """
    router = _Router(adversary)
    chan_a = MemoryChannel(router, Direction.A_TO_B, default_timeout)
    chan_b = MemoryChannel(router, Direction.B_TO_A, default_timeout)
    router.endpoints[Direction.A_TO_B] = chan_a
    router.endpoints[Direction.B_TO_A] = chan_b
    return chan_a, chan_b, router.transcript


# --- stream sockets --------------------------------------------------------

class StreamChannel:
    """Duplex frame channel over a connected stream socket."""

    def __init__(self, sock: socket.socket, read_timeout: float = 30.0):
        self._sock = sock
        self.read_timeout = read_timeout

    def send_frame(self, frame: bytes):
        check_frame(frame)
        try:
            self._sock.sendall(frame)
        except (BrokenPipeError, ConnectionResetError, OSError) as exc:
            raise ChannelClosed(str(exc)) from exc

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except socket.timeout:
                raise Timeout(f"no frame within {self._sock.gettimeout()} s") from None
            except OSError as exc:
                raise ChannelClosed(str(exc)) from exc
            if not chunk:
                raise ChannelClosed("peer closed the stream")
            buf.extend(chunk)
        return bytes(buf)

    def recv_frame(self, timeout: float | None = None) -> bytes:
        self._sock.settimeout(self.read_timeout if timeout is None else timeout)
        header = self._read_exact(HEADER_LEN)
        body_len = int.from_bytes(header[1:5], "big")
        if body_len > MAX_BODY:
            raise MalformedMessage(f"declared body length {body_len} exceeds {MAX_BODY}")
        return header + self._read_exact(body_len)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


def connect_stream(address: str, port: int, timeout: float = 10.0) -> StreamChannel:
    """Connect to a listening peer.  Raises Timeout on connect expiry;
    ConnectionRefusedError propagates when nothing is listening."""
    try:
        sock = socket.create_connection((address, port), timeout=timeout)
    except socket.timeout:
        raise Timeout(f"connect to {address}:{port} timed out after {timeout} s") from None
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return StreamChannel(sock)


class StreamListener:
    """Listening socket that accepts one pairing peer at a time."""

    def __init__(self, port: int, host: str = "", backlog: int = 1):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(backlog)

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def accept(self, timeout: float | None = None) -> StreamChannel:
        self._sock.settimeout(timeout)
        try:
            conn, _addr = self._sock.accept()
        except socket.timeout:
            raise Timeout(f"no peer connected within {timeout} s") from None
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return StreamChannel(conn)

    def close(self):
        self._sock.close()
