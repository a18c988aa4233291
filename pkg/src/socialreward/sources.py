"""Frame sources: trace files, text streams, and a TCP listener.

Each TCP connection becomes one source, read on its own thread; the
consumer pulls through :func:`socialreward.stream.merge_streams`, which is
the only synchronization point.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
from typing import IO, Iterator, List, Optional, Tuple

from .stream import ChannelRegistry, Diagnostic, FrameParser, PerceptorFrame

log = logging.getLogger(__name__)

_CLOSED = object()


def text_source(stream: IO, registry: ChannelRegistry, name: str, diagnostics: Optional[List[Diagnostic]] = None) -> Iterator[PerceptorFrame]:
    parser = FrameParser(registry, source=name)
    try:
        yield from parser.feed(stream)
    finally:
        if diagnostics is not None:
            diagnostics.extend(parser.diagnostics)


def file_source(path, registry: ChannelRegistry, diagnostics: Optional[List[Diagnostic]] = None) -> Iterator[PerceptorFrame]:
    with open(path, "rb") as fh:
        yield from text_source(fh, registry, str(path), diagnostics)


def parse_address(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ValueError(f"expected host:port, got {text!r}")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ValueError(f"bad port in {text!r}") from None


class TcpListener:
    """Accept ``connections`` perceptor connections and expose one frame
    iterator per connection, in accept order."""

    def __init__(self, address: str, registry: ChannelRegistry, connections: int, diagnostics: Optional[List[Diagnostic]] = None):
        if connections < 1:
            raise ValueError("need at least one connection")
        self.registry = registry
        self.diagnostics = diagnostics if diagnostics is not None else []
        self._queues = [queue.Queue() for _ in range(connections)]
        self._lock = threading.Lock()
        host, port = parse_address(address)
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept, daemon=True)
        self._accept_thread.start()

    def _accept(self) -> None:
        try:
            for i, q in enumerate(self._queues):
                conn, peer = self._sock.accept()
                log.info("perceptor connection %d from %s:%s", i, *peer[:2])
                threading.Thread(target=self._read, args=(conn, q, f"tcp[{i}]"), daemon=True).start()
        finally:
            self._sock.close()

    def _read(self, conn: socket.socket, q: queue.Queue, name: str) -> None:
        parser = FrameParser(self.registry, source=name)
        try:
            with conn, conn.makefile("rb") as fh:
                for frame in parser.feed(fh):
                    q.put(frame)
        except OSError as exc:
            log.warning("%s: connection error: %s", name, exc)
        finally:
            with self._lock:
                self.diagnostics.extend(parser.diagnostics)
            q.put(_CLOSED)

    def _iterate(self, q: queue.Queue) -> Iterator[PerceptorFrame]:
        while True:
            item = q.get()
            if item is _CLOSED:
                return
            yield item

    def sources(self) -> List[Iterator[PerceptorFrame]]:
        return [self._iterate(q) for q in self._queues]
