"""Score wire protocol: length-prefixed frames over a byte stream.

Layout (all little-endian):

    u32  frame length (header + payload, excluding this prefix)
    4s   magic "SCR1"
    u8   msg_type: 0x01 request / 0x81 response / 0xFF error
    u8   flags: bit0 = complex payload
    u16  reserved (zero)
    u32  height
    u32  width
    f64  sigma
    ...  payload: f32 values, row-major; complex interleaves (re, im).
         Error frames carry a UTF-8 message instead.

The transport is either a spawned subprocess's stdio or a TCP connection;
one request is in flight per connection.
"""

from __future__ import annotations

import socket
import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .core import TransportError

MAGIC = b"SCR1"
MSG_REQUEST = 0x01
MSG_RESPONSE = 0x81
MSG_ERROR = 0xFF
FLAG_COMPLEX = 0x01

_HEADER = struct.Struct("<4sBBHIId")
HEADER_SIZE = _HEADER.size  # 24 bytes

#: Upper bound on a sane frame; larger declared lengths are treated as a
#: corrupted stream rather than honored (they would block the reader).
MAX_FRAME_BYTES = 1 << 28


@dataclass(frozen=True)
class Frame:
    msg_type: int
    flags: int
    height: int
    width: int
    sigma: float
    payload: bytes

    @property
    def is_complex(self) -> bool:
        return bool(self.flags & FLAG_COMPLEX)

    def error_message(self) -> str:
        return self.payload.decode("utf-8", errors="replace")


def pack_frame(
    msg_type: int, flags: int, height: int, width: int, sigma: float, payload: bytes
) -> bytes:
    """Serialize one frame, length prefix included."""
    header = _HEADER.pack(MAGIC, msg_type, flags, 0, height, width, sigma)
    body = header + payload
    return struct.pack("<I", len(body)) + body


def parse_frame(body: bytes) -> Frame:
    """Parse a frame body (without the length prefix)."""
    if len(body) < HEADER_SIZE:
        raise TransportError(f"frame body too short: {len(body)} bytes")
    magic, msg_type, flags, _reserved, height, width, sigma = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise TransportError(f"bad frame magic {magic!r}")
    return Frame(msg_type, flags, height, width, sigma, body[HEADER_SIZE:])


def encode_image(arr: np.ndarray, is_complex: bool) -> bytes:
    """Row-major f32 payload; complex interleaves (re, im) per pixel."""
    if is_complex:
        a = np.asarray(arr, dtype=np.complex128)
        inter = np.empty(a.shape + (2,), dtype=np.float32)
        inter[..., 0] = a.real
        inter[..., 1] = a.imag
        return inter.tobytes()
    return np.asarray(arr, dtype=np.float32).tobytes()


def decode_image(payload: bytes, height: int, width: int, is_complex: bool) -> np.ndarray:
    per_pixel = 8 if is_complex else 4
    expected = height * width * per_pixel
    if len(payload) != expected:
        raise TransportError(
            f"payload length {len(payload)} does not match {height}x{width} "
            f"({'complex' if is_complex else 'real'}, expected {expected})"
        )
    flat = np.frombuffer(payload, dtype=np.float32)
    if is_complex:
        pairs = flat.reshape(height, width, 2).astype(np.float64)
        return pairs[..., 0] + 1j * pairs[..., 1]
    return flat.reshape(height, width).astype(np.float64)


def read_exact(read, n: int) -> bytes:
    """Pull exactly n bytes from a read(k) callable or fail."""
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = read(remaining)
        if not chunk:
            raise TransportError("byte stream closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(read) -> Frame:
    """Read one length-prefixed frame from a read(k) callable."""
    (length,) = struct.unpack("<I", read_exact(read, 4))
    if length < HEADER_SIZE or length > MAX_FRAME_BYTES:
        raise TransportError(f"implausible declared frame length {length}")
    return parse_frame(read_exact(read, length))


class _StdioTransport:
    """Endpoint spawned as a subprocess; frames travel over its stdin/stdout."""

    def __init__(self, command: list[str]):
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise TransportError(f"failed to spawn {command[0]!r}: {exc}") from exc

    def send(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"write to score endpoint failed: {exc}") from exc

    def read(self, n: int) -> bytes:
        return self.proc.stdout.read(n)

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class _TcpTransport:
    def __init__(self, host: str, port: int):
        try:
            self.sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def read(self, n: int) -> bytes:
        try:
            return self.sock.recv(n)
        except OSError as exc:
            raise TransportError(f"recv failed: {exc}") from exc

    def close(self) -> None:
        self.sock.close()


class ScoreClient:
    """Blocking request/response client; one request in flight per connection."""

    def __init__(self, transport):
        self._transport = transport

    @classmethod
    def spawn(cls, command: list[str]) -> "ScoreClient":
        return cls(_StdioTransport(command))

    @classmethod
    def connect(cls, host: str, port: int) -> "ScoreClient":
        return cls(_TcpTransport(host, port))

    @classmethod
    def from_endpoint(cls, endpoint: str) -> "ScoreClient":
        """"host:port" connects over TCP; anything else is a command line to spawn."""
        host, sep, port = endpoint.rpartition(":")
        if sep and host and port.isdigit():
            return cls.connect(host, int(port))
        return cls.spawn(endpoint.split())

    def request(self, arr: np.ndarray, sigma: float, is_complex: bool) -> np.ndarray:
        h, w = arr.shape
        flags = FLAG_COMPLEX if is_complex else 0
        self._transport.send(
            pack_frame(MSG_REQUEST, flags, h, w, float(sigma), encode_image(arr, is_complex))
        )
        frame = read_frame(self._transport.read)
        if frame.msg_type == MSG_ERROR:
            raise TransportError(f"score endpoint error: {frame.error_message()}")
        if frame.msg_type != MSG_RESPONSE:
            raise TransportError(f"unexpected msg_type 0x{frame.msg_type:02x}")
        if (frame.height, frame.width) != (h, w):
            raise TransportError(
                f"response dims {frame.height}x{frame.width} do not echo request {h}x{w}"
            )
        return decode_image(frame.payload, h, w, is_complex)

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
