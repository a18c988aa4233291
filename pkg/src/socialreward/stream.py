"""Perceptor frames and the pipe-delimited wire format.

One frame per line::

    <t_ms>|<channel>|<FER|SER|PRESENCE>|<payload>

FER/SER payloads are comma-separated decimal reals in the channel's own
label order; PRESENCE payloads are ``faces=<uint>`` and/or ``voice=<0|1>``.
"""

from __future__ import annotations

import heapq
import logging
import re
from dataclasses import dataclass, field
from itertools import groupby
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .core import EmotionTaxonomy, EmotionVector, Modality
from .errors import (
    BadVector,
    ConfigError,
    FrameError,
    MalformedLine,
    NonMonotonicTimestamp,
    UnknownChannel,
    UnknownLabel,
)

log = logging.getLogger(__name__)

DROP = "DROP"
TRACE_SUFFIX = ".srft"

_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_UINT = re.compile(r"\d+\Z")
_CHANNEL = re.compile(r"[A-Za-z0-9_.:-]+\Z")
_MAX_T = 2**63 - 1


@dataclass(frozen=True)
class PerceptorFrame:
    t: int
    channel: str
    modality: Modality
    raw: Optional[EmotionVector] = None
    face_count: Optional[int] = None
    voice_active: Optional[bool] = None

    @property
    def present(self) -> bool:
        return bool(self.face_count) or bool(self.voice_active)


@dataclass(frozen=True)
class ChannelSpec:
    """One perceptor channel: its modality and how its labels map onto the taxonomy.

    ``labels`` is the order of values in the channel's payload. ``mapping``
    sends each of those labels to a taxonomy label or to ``DROP``.
    """

    modality: Modality
    labels: Tuple[str, ...] = ()
    mapping: Mapping[str, str] = field(default_factory=dict)


class ChannelRegistry:
    def __init__(self, taxonomy: EmotionTaxonomy, channels: Mapping[str, ChannelSpec]):
        self.taxonomy = taxonomy
        self.channels: Dict[str, ChannelSpec] = {}
        # per channel: taxonomy index (or None for DROP) for each payload position
        self._routes: Dict[str, Tuple[Optional[int], ...]] = {}
        self._missing: Dict[str, Tuple[str, ...]] = {}
        for name, spec in channels.items():
            if not _CHANNEL.match(name):
                raise ConfigError(f"invalid channel id {name!r}")
            spec = self._complete(spec)
            self.channels[name] = spec
            if spec.modality is Modality.PRESENCE:
                continue
            routes = []
            missing = []
            for label in spec.labels:
                target = spec.mapping.get(label)
                if target is None:
                    missing.append(label)
                    routes.append(None)
                elif target == DROP:
                    routes.append(None)
                elif target in taxonomy:
                    routes.append(taxonomy.index(target))
                else:
                    raise ConfigError(
                        f"channel {name!r} maps {label!r} to {target!r}, which is not in the taxonomy"
                    )
            self._routes[name] = tuple(routes)
            self._missing[name] = tuple(missing)

    def __eq__(self, other):
        if not isinstance(other, ChannelRegistry):
            return NotImplemented
        return self.taxonomy == other.taxonomy and self.channels == other.channels

    __hash__ = None

    def _complete(self, spec: ChannelSpec) -> ChannelSpec:
        modality = Modality(spec.modality)
        if modality is Modality.PRESENCE:
            return ChannelSpec(modality)
        labels = tuple(spec.labels) or self.taxonomy.labels
        mapping = dict(spec.mapping) if spec.mapping else {}
        if not spec.mapping:
            mapping = {label: label for label in labels if label in self.taxonomy}
        return ChannelSpec(modality, labels, mapping)

    @classmethod
    def identity(cls, taxonomy: EmotionTaxonomy, channels: Mapping[str, Union[Modality, str]]):
        return cls(taxonomy, {name: ChannelSpec(Modality(m)) for name, m in channels.items()})

    def __contains__(self, channel: str) -> bool:
        return channel in self.channels

    def modality(self, channel: str) -> Modality:
        return self.channels[channel].modality

    def arity(self, channel: str) -> int:
        return len(self.channels[channel].labels)

    def map_values(self, channel: str, values: Sequence[float]) -> EmotionVector:
        if self._missing[channel]:
            raise UnknownLabel(
                f"channel {channel!r} has no mapping for label(s) {', '.join(self._missing[channel])}"
            )
        out = [0.0] * self.taxonomy.k
        for value, target in zip(values, self._routes[channel]):
            if target is not None:
                out[target] += value
        return tuple(out)

    def is_identity(self, channel: str) -> bool:
        spec = self.channels[channel]
        return spec.labels == self.taxonomy.labels and all(
            spec.mapping.get(label) == label for label in spec.labels
        )


@dataclass(frozen=True)
class Diagnostic:
    """A rejected line or frame. ``kind`` is the exception class name."""

    kind: str
    message: str
    line_no: Optional[int] = None
    source: Optional[str] = None

    def __str__(self) -> str:
        where = ""
        if self.source is not None:
            where = f"{self.source}:"
        if self.line_no is not None:
            where += f"{self.line_no}:"
        return f"{where} {self.kind}: {self.message}".strip()


def _decode(line: Union[str, bytes]) -> str:
    if isinstance(line, (bytes, bytearray)):
        try:
            line = bytes(line).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(f"line is not valid UTF-8: {exc.reason}") from None
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def _parse_real(text: str) -> float:
    if not _DECIMAL.match(text):
        raise MalformedLine(f"unparsable number {text[:40]!r}")
    return float(text)


def _parse_presence(payload: str) -> Tuple[Optional[int], Optional[bool]]:
    faces: Optional[int] = None
    voice: Optional[bool] = None
    if not payload:
        raise MalformedLine("empty presence payload")
    for item in payload.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise MalformedLine(f"presence item {item[:40]!r} is not key=value")
        if key == "faces":
            if faces is not None or not _UINT.match(value):
                raise MalformedLine(f"bad faces value {value[:40]!r}")
            faces = int(value)
        elif key == "voice":
            if voice is not None or value not in ("0", "1"):
                raise MalformedLine(f"bad voice value {value[:40]!r}")
            voice = value == "1"
        else:
            raise MalformedLine(f"unknown presence key {key[:40]!r}")
    return faces, voice


def parse_frame(
    line: Union[str, bytes],
    registry: ChannelRegistry,
    last_t: Optional[Dict[str, int]] = None,
) -> PerceptorFrame:
    """Parse and validate one wire-format line.

    When ``last_t`` is given it tracks the last accepted timestamp per channel
    and is updated only on success.
    """
    text = _decode(line)
    parts = text.split("|")
    if len(parts) != 4:
        raise MalformedLine(f"expected 4 '|'-separated fields, got {len(parts)}")
    t_text, channel, modality_text, payload = parts
    if not _UINT.match(t_text):
        raise MalformedLine(f"timestamp {t_text[:40]!r} is not a nonnegative integer")
    t = int(t_text)
    if t > _MAX_T:
        raise MalformedLine("timestamp out of range")
    try:
        modality = Modality(modality_text)
    except ValueError:
        raise MalformedLine(f"unknown modality {modality_text[:40]!r}") from None
    if channel not in registry:
        raise UnknownChannel(f"channel {channel[:60]!r} is not registered")
    if registry.modality(channel) is not modality:
        raise MalformedLine(
            f"channel {channel!r} is registered as {registry.modality(channel).value}, line says {modality.value}"
        )

    if modality is Modality.PRESENCE:
        faces, voice = _parse_presence(payload)
        frame = PerceptorFrame(t, channel, modality, face_count=faces, voice_active=voice)
    else:
        fields = payload.split(",")
        if len(fields) != registry.arity(channel):
            raise MalformedLine(
                f"expected {registry.arity(channel)} values for channel {channel!r}, got {len(fields)}"
            )
        values = [_parse_real(f) for f in fields]
        for v in values:
            if v != v or v in (float("inf"), float("-inf")):
                raise BadVector("non-finite value in vector")
            if v < 0:
                raise BadVector(f"negative value {v!r} in vector")
        raw = registry.map_values(channel, values)
        if not any(raw):
            raise BadVector("vector is all-zero after label mapping")
        frame = PerceptorFrame(t, channel, modality, raw=raw)

    if last_t is not None:
        prev = last_t.get(channel)
        if prev is not None and t < prev:
            raise NonMonotonicTimestamp(f"t={t} precedes t={prev} on channel {channel!r}")
        last_t[channel] = t
    return frame


def format_real(value: float) -> str:
    """Shortest decimal form that round-trips to the same double."""
    return repr(float(value))


def format_frame(frame: PerceptorFrame) -> str:
    head = f"{frame.t}|{frame.channel}|{frame.modality.value}|"
    if frame.modality is Modality.PRESENCE:
        items = []
        if frame.face_count is not None:
            items.append(f"faces={frame.face_count}")
        if frame.voice_active is not None:
            items.append(f"voice={int(frame.voice_active)}")
        return head + ",".join(items)
    return head + ",".join(format_real(v) for v in frame.raw)


class FrameParser:
    """Stateful line parser: tracks per-channel monotonicity and collects diagnostics."""

    def __init__(self, registry: ChannelRegistry, source: Optional[str] = None):
        self.registry = registry
        self.source = source
        self.last_t: Dict[str, int] = {}
        self.diagnostics: List[Diagnostic] = []
        self.line_no = 0

    def parse(self, line: Union[str, bytes]) -> Optional[PerceptorFrame]:
        """Return the frame, or None after recording exactly one diagnostic."""
        self.line_no += 1
        try:
            return parse_frame(line, self.registry, self.last_t)
        except FrameError as exc:
            diag = Diagnostic(type(exc).__name__, str(exc), self.line_no, self.source)
            self.diagnostics.append(diag)
            log.warning("%s", diag)
            return None

    def feed(self, lines: Iterable[Union[str, bytes]]) -> Iterator[PerceptorFrame]:
        for line in lines:
            if _is_blank(line):
                self.line_no += 1
                continue
            frame = self.parse(line)
            if frame is not None:
                yield frame


def _is_blank(line: Union[str, bytes]) -> bool:
    if isinstance(line, (bytes, bytearray)):
        return not bytes(line).strip(b"\r\n")
    return not line.strip("\r\n")


def frame_sort_key(frame: PerceptorFrame) -> Tuple[int, str]:
    return frame.t, frame.channel


def _tie_sorted(
    source: Iterable[PerceptorFrame],
    index: int,
    diagnostics: Optional[List[Diagnostic]],
) -> Iterator[Tuple[int, str, int, int, PerceptorFrame]]:
    """Yield merge keys for one source, ordering equal-t runs by channel."""
    last = None
    seq = 0

    def checked():
        nonlocal last
        for frame in source:
            if last is not None and frame.t < last:
                diag = Diagnostic(
                    "NonMonotonicTimestamp",
                    f"source {index} went back from t={last} to t={frame.t}; frame skipped",
                    source=f"source[{index}]",
                )
                log.warning("%s", diag)
                if diagnostics is not None:
                    diagnostics.append(diag)
                continue
            last = frame.t
            yield frame

    for _, run in groupby(checked(), key=lambda f: f.t):
        for frame in sorted(run, key=lambda f: f.channel):
            yield frame.t, frame.channel, index, seq, frame
            seq += 1


def merge_streams(
    sources: Sequence[Iterable[PerceptorFrame]],
    diagnostics: Optional[List[Diagnostic]] = None,
) -> Iterator[PerceptorFrame]:
    """Merge time-ordered sources into one stream ordered by (t, channel, source index).

    Sources are consumed lazily, so blocking iterators (sockets, queues) work:
    a frame is released only once every open source has shown its next key.
    Frames that go back in time within a source are skipped with a diagnostic.
    """
    keyed = [_tie_sorted(src, i, diagnostics) for i, src in enumerate(sources)]
    for *_, frame in heapq.merge(*keyed):
        yield frame


def read_trace(path, registry: ChannelRegistry) -> Tuple[List[PerceptorFrame], List[Diagnostic]]:
    """Load a trace file and return its frames in canonical (t, channel) order."""
    parser = FrameParser(registry, source=str(path))
    with open(path, "rb") as fh:
        frames = list(parser.feed(fh))
    frames.sort(key=frame_sort_key)
    return frames, parser.diagnostics


def write_trace(path, frames: Iterable[PerceptorFrame]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame in frames:
            fh.write(format_frame(frame) + "\n")
