"""TCP offload emulation: a classification server speaking a raw-byte
protocol, a measuring client, and a round-trip benchmark.

Request framing is a 4-byte big-endian payload length followed by the payload
(the length prefix lets one server accept any image size); the response is the
predicted class as 2 big-endian bytes. A zero length header is malformed and
closes the connection. The server can inject a fixed-plus-jitter delay before
replying to emulate network and server-compute regimes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .trace import Trace, load_trace

logger = logging.getLogger(__name__)

HEADER_SIZE = 4
RESPONSE_SIZE = 2
MAX_CLASS = 0xFFFF


class OffloadError(Exception):
    """Client-side failure, annotated with the server address."""


def encode_request(payload: bytes) -> bytes:
    if len(payload) < 1:
        raise ValueError("payload must contain at least one byte")
    return struct.pack(">I", len(payload)) + payload


def encode_response(class_index: int) -> bytes:
    if not 0 <= class_index <= MAX_CLASS:
        raise ValueError(f"class index {class_index} does not fit in two bytes")
    return struct.pack(">H", class_index)


def decode_response(data: bytes) -> int:
    if len(data) != RESPONSE_SIZE:
        raise ValueError(f"response must be {RESPONSE_SIZE} bytes, got {len(data)}")
    return struct.unpack(">H", data)[0]


class Predictor:
    """Maps an offloaded payload to a class index; total over valid payloads."""

    def predict(self, payload: bytes) -> int:
        raise NotImplementedError


class ConstantPredictor(Predictor):
    def __init__(self, class_index: int):
        if not 0 <= class_index <= MAX_CLASS:
            raise ValueError("class index must fit in two bytes")
        self.class_index = class_index

    def predict(self, payload: bytes) -> int:
        return self.class_index


class LookupPredictor(Predictor):
    """SHA-256 hex digest of the payload -> class index, with a fallback
    class (and a logged warning) for unknown payloads."""

    def __init__(self, table: dict[str, int], fallback: int = 0):
        self.table = {k.lower(): int(v) for k, v in table.items()}
        self.fallback = fallback

    @classmethod
    def from_file(cls, path: str | Path, fallback: int = 0) -> "LookupPredictor":
        table = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(table, fallback)

    @staticmethod
    def digest(payload: bytes) -> str:
        return hashlib.sha256(payload).hexdigest()

    def predict(self, payload: bytes) -> int:
        key = self.digest(payload)
        if key not in self.table:
            logger.warning("unknown payload digest %s, answering fallback class %d",
                           key[:16], self.fallback)
            return self.fallback
        return self.table[key]


class TracePredictor(Predictor):
    """Interprets the first 8 payload bytes as a big-endian sample id and
    answers that sample's server label from a loaded trace. Bytes past the id
    stand in for image content and are ignored."""

    def __init__(self, trace: Trace, fallback: int = 0):
        self.labels = {int(sid): int(lbl)
                       for sid, lbl in zip(trace.ids, trace.server_labels)}
        self.fallback = fallback

    @classmethod
    def from_file(cls, path: str | Path, fallback: int = 0) -> "TracePredictor":
        return cls(load_trace(path), fallback)

    @staticmethod
    def encode_sample_id(sample_id: int, pad_to: int = 8) -> bytes:
        raw = struct.pack(">Q", sample_id)
        return raw + b"\x00" * max(0, pad_to - len(raw))

    def predict(self, payload: bytes) -> int:
        if len(payload) < 8:
            logger.warning("payload too short for a sample id, answering fallback")
            return self.fallback
        sid = struct.unpack(">Q", payload[:8])[0]
        if sid not in self.labels:
            logger.warning("unknown sample id %d, answering fallback class %d",
                           sid, self.fallback)
            return self.fallback
        return self.labels[sid]


@dataclass
class DelayModel:
    """Server-side reply delay: fixed milliseconds plus uniform jitter in
    [0, jitter_ms], drawn from a seeded stream."""

    fixed_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0
    _rng: random.Random = field(init=False, repr=False)
    _lock: threading.Lock = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.fixed_ms < 0 or self.jitter_ms < 0:
            raise ValueError("delays must be >= 0")
        self._rng = random.Random(self.seed)
        self._lock = threading.Lock()

    def sample_ms(self) -> float:
        if self.jitter_ms == 0.0:
            return self.fixed_ms
        with self._lock:
            return self.fixed_ms + self._rng.uniform(0.0, self.jitter_ms)


def _precise_sleep(seconds: float) -> None:
    """Sleep with sub-millisecond accuracy: coarse sleep, then spin out the
    remainder so injected delays are honored as a hard lower bound without
    scheduler overshoot distorting the measurements."""
    deadline = time.perf_counter() + seconds
    coarse = seconds - 0.0015
    if coarse > 0:
        time.sleep(coarse)
    while time.perf_counter() < deadline:
        pass


def _recv_exactly(conn: socket.socket, count: int) -> bytes | None:
    """Read exactly count bytes; None on clean EOF at a message boundary."""
    chunks = []
    remaining = count
    while remaining > 0:
        data = conn.recv(remaining)
        if not data:
            return None
        chunks.append(data)
        remaining -= len(data)
    return b"".join(chunks)


class WireServer:
    """Threaded request/response server. Each connection may carry any number
    of sequential requests; a malformed request closes only that connection."""

    def __init__(self, bind_address: tuple[str, int], predictor: Predictor,
                 delay: DelayModel | None = None, read_timeout_s: float = 30.0):
        self.predictor = predictor
        self.delay = delay or DelayModel()
        self.read_timeout_s = read_timeout_s
        self._stop = threading.Event()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind(bind_address)
        except OSError as exc:
            self._listener.close()
            raise OffloadError(f"cannot bind {bind_address[0]}:{bind_address[1]}: {exc}") from exc
        self._listener.listen(16)
        self.address: tuple[str, int] = self._listener.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self) -> "WireServer":
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        self._listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, peer = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._serve_connection, args=(conn, peer),
                             daemon=True).start()

    def _serve_connection(self, conn: socket.socket, peer) -> None:
        try:
            conn.settimeout(self.read_timeout_s)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            while not self._stop.is_set():
                header = _recv_exactly(conn, HEADER_SIZE)
                if header is None:
                    return
                (length,) = struct.unpack(">I", header)
                if length == 0:
                    logger.warning("zero-length request from %s, closing connection", peer)
                    return
                payload = _recv_exactly(conn, length)
                if payload is None:
                    logger.warning("connection from %s ended mid-payload", peer)
                    return
                class_index = self.predictor.predict(payload) & MAX_CLASS
                delay_ms = self.delay.sample_ms()
                if delay_ms > 0:
                    _precise_sleep(delay_ms / 1000.0)
                conn.sendall(encode_response(class_index))
        except (OSError, socket.timeout) as exc:
            logger.warning("connection from %s failed: %s", peer, exc)
        except Exception:
            logger.exception("handler error for %s", peer)
        finally:
            conn.close()

    def stop(self) -> None:
        self._stop.set()
        self._listener.close()
        if self._accept_thread.is_alive():
            self._accept_thread.join(timeout=2.0)

    def __enter__(self) -> "WireServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address '{text}' must be host:port")
    return host or "127.0.0.1", int(port)


def serve(bind_address: tuple[str, int] | str, predictor: Predictor,
          delay: DelayModel | None = None) -> WireServer:
    """Start a server; returns the running handle (stop() or use as a
    context manager). Bind port 0 for an ephemeral port."""
    if isinstance(bind_address, str):
        bind_address = parse_address(bind_address)
    return WireServer(bind_address, predictor, delay).start()


class OffloadClient:
    """Persistent connection issuing sequential offload requests."""

    def __init__(self, address: tuple[str, int] | str, timeout_s: float = 10.0):
        if isinstance(address, str):
            address = parse_address(address)
        self.address = address
        try:
            self._sock = socket.create_connection(address, timeout=timeout_s)
        except OSError as exc:
            raise OffloadError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def request(self, payload: bytes) -> tuple[int, float]:
        """Send one payload; returns (class index, round-trip ms) measured
        from the first byte sent until the full response arrived."""
        message = encode_request(payload)
        try:
            start = time.perf_counter()
            self._sock.sendall(message)
            data = _recv_exactly(self._sock, RESPONSE_SIZE)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
        except OSError as exc:
            raise OffloadError(
                f"offload to {self.address[0]}:{self.address[1]} failed: {exc}") from exc
        if data is None:
            raise OffloadError(
                f"server {self.address[0]}:{self.address[1]} closed before replying")
        return decode_response(data), elapsed_ms

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "OffloadClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def offload(address: tuple[str, int] | str, payload: bytes,
            timeout_s: float = 10.0) -> tuple[int, float]:
    """One-shot offload on a fresh connection."""
    with OffloadClient(address, timeout_s) as client:
        return client.request(payload)


@dataclass(frozen=True)
class BenchStats:
    mean_rtt_ms: float
    stddev_ms: float
    min_ms: float
    max_ms: float
    p50_ms: float
    p99_ms: float
    count: int
    rtts_ms: tuple[float, ...]


def bench(address: tuple[str, int] | str, payload_size_bytes: int,
          repetitions: int, seed: int = 0) -> BenchStats:
    """Round-trip statistics over repeated offloads of random payloads of a
    given size, reusing one connection."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if payload_size_bytes < 1:
        raise ValueError("payload size must be >= 1 byte")
    rng = np.random.default_rng(seed)
    rtts: list[float] = []
    with OffloadClient(address) as client:
        for i in range(repetitions):
            payload = rng.integers(0, 256, size=payload_size_bytes, dtype=np.uint8).tobytes()
            try:
                _, rtt = client.request(payload)
            except OffloadError as exc:
                raise OffloadError(f"{exc} (after {len(rtts)} completed requests)") from exc
            rtts.append(rtt)
    arr = np.array(rtts)
    return BenchStats(
        mean_rtt_ms=float(arr.mean()),
        stddev_ms=float(arr.std()),
        min_ms=float(arr.min()),
        max_ms=float(arr.max()),
        p50_ms=float(np.percentile(arr, 50)),
        p99_ms=float(np.percentile(arr, 99)),
        count=len(rtts),
        rtts_ms=tuple(rtts),
    )
