"""Scripted synthetic perceptor traces for tests and demos."""

from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from .core import EmotionTaxonomy, Modality
from .errors import InvalidSpec
from .stream import PerceptorFrame, frame_sort_key


@dataclass(frozen=True)
class Segment:
    """A stretch of scripted behaviour.

    ``rates`` gives the emission rate (Hz) of each channel active in this
    segment. ``emotion`` is the raw profile emitted by FER channels; SER
    channels use ``ser_emotion`` when set. ``noise`` adds uniform
    nonnegative jitter of that amplitude to every component.
    ``faces`` and ``voice`` are per-frame detection probabilities.
    """

    duration_ms: int
    rates: Mapping[str, float]
    emotion: Sequence[float]
    ser_emotion: Optional[Sequence[float]] = None
    faces: float = 1.0
    voice: float = 1.0
    noise: float = 0.0


@dataclass(frozen=True)
class TraceSpec:
    channels: Mapping[str, Modality]
    segments: Sequence[Segment]
    start_ms: int = 0
    jitter_ms: int = 0
    taxonomy: EmotionTaxonomy = field(default_factory=EmotionTaxonomy)

    @property
    def duration_ms(self) -> int:
        return sum(s.duration_ms for s in self.segments)


def _validate(spec: TraceSpec) -> None:
    k = spec.taxonomy.k
    if spec.start_ms < 0 or spec.jitter_ms < 0:
        raise InvalidSpec("start_ms and jitter_ms must be nonnegative")
    if not spec.segments:
        raise InvalidSpec("trace needs at least one segment")
    for i, seg in enumerate(spec.segments):
        if seg.duration_ms <= 0:
            raise InvalidSpec(f"segment {i}: duration must be > 0")
        for profile in (seg.emotion, seg.ser_emotion):
            if profile is None:
                continue
            if len(profile) != k:
                raise InvalidSpec(f"segment {i}: profile needs {k} values")
            if any(not math.isfinite(v) or v < 0 for v in profile) or not any(profile):
                raise InvalidSpec(f"segment {i}: profile must be nonnegative with positive sum")
        if not (0.0 <= seg.faces <= 1.0 and 0.0 <= seg.voice <= 1.0):
            raise InvalidSpec(f"segment {i}: detection probabilities must lie in [0, 1]")
        if seg.noise < 0 or not math.isfinite(seg.noise):
            raise InvalidSpec(f"segment {i}: noise must be nonnegative")
        for channel, rate in seg.rates.items():
            if channel not in spec.channels:
                raise InvalidSpec(f"segment {i}: unknown channel {channel!r}")
            if not (rate > 0 and math.isfinite(rate)):
                raise InvalidSpec(f"segment {i}: rate for {channel!r} must be > 0")


def synth_trace(spec: TraceSpec, seed: int) -> List[PerceptorFrame]:
    """Generate a deterministic trace for ``spec`` and ``seed``.

    Frames come back sorted by (t, channel); per-channel timestamps never
    decrease.
    """
    _validate(spec)
    rng = random.Random(seed)
    frames: List[PerceptorFrame] = []
    last_t: Dict[str, int] = {}
    seg_start = spec.start_ms
    for seg in spec.segments:
        seg_end = seg_start + seg.duration_ms
        for channel in sorted(seg.rates):
            modality = Modality(spec.channels[channel])
            period = 1000.0 / seg.rates[channel]
            i = 0
            while True:
                t = seg_start + int(math.floor(i * period))
                if t >= seg_end:
                    break
                i += 1
                if spec.jitter_ms:
                    t = min(t + rng.randint(0, spec.jitter_ms), seg_end - 1)
                t = max(t, last_t.get(channel, t))
                last_t[channel] = t
                if modality is Modality.PRESENCE:
                    faces = 1 if rng.random() < seg.faces else 0
                    voice = rng.random() < seg.voice
                    frames.append(PerceptorFrame(t, channel, modality, face_count=faces, voice_active=voice))
                    continue
                profile = seg.emotion
                if modality is Modality.SER and seg.ser_emotion is not None:
                    profile = seg.ser_emotion
                raw = tuple(float(v) + seg.noise * rng.random() for v in profile)
                frames.append(PerceptorFrame(t, channel, modality, raw=raw))
        seg_start = seg_end
    frames.sort(key=frame_sort_key)
    return frames


DEMO_CHANNELS = {
    "fer_rmn": Modality.FER,
    "ser_erus": Modality.SER,
    "presence_cam": Modality.PRESENCE,
}


def emotion_clip(
    label: str,
    taxonomy: EmotionTaxonomy = EmotionTaxonomy(),
    duration_ms: int = 10_000,
    fer_hz: float = 10.0,
    ser_hz: float = 1.0,
    presence_hz: float = 5.0,
    noise: float = 0.0,
) -> TraceSpec:
    """A single-segment clip where every perceptor sees one pure emotion."""
    return TraceSpec(
        channels=DEMO_CHANNELS,
        segments=[
            Segment(
                duration_ms=duration_ms,
                rates={"fer_rmn": fer_hz, "ser_erus": ser_hz, "presence_cam": presence_hz},
                emotion=taxonomy.one_hot(label),
                noise=noise,
            )
        ],
        taxonomy=taxonomy,
    )


def builtin_scenario(name: str, taxonomy: EmotionTaxonomy = EmotionTaxonomy()) -> TraceSpec:
    """Named scenarios: ``<emotion>`` for one pure 10 s clip, or ``demo`` (happy then angry)."""
    if name == "demo":
        happy = emotion_clip("happiness", taxonomy).segments[0]
        angry = emotion_clip("anger", taxonomy).segments[0]
        return TraceSpec(channels=DEMO_CHANNELS, segments=[happy, angry], taxonomy=taxonomy)
    aliases = {"happy": "happiness", "angry": "anger", "sad": "sadness"}
    label = aliases.get(name, name)
    if label not in taxonomy:
        raise InvalidSpec(f"unknown scenario {name!r}")
    return emotion_clip(label, taxonomy)


def _kv(text: str):
    for item in text.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition(":")
        if not sep:
            raise InvalidSpec(f"{item!r} is not key:value")
        yield key.strip(), value.strip()


def _profile(text: str, taxonomy: EmotionTaxonomy) -> List[float]:
    out = [0.0] * taxonomy.k
    for label, value in _kv(text):
        if label not in taxonomy:
            raise InvalidSpec(f"unknown emotion {label!r}")
        out[taxonomy.index(label)] = float(value)
    return out


def parse_scenario(text: str, taxonomy: EmotionTaxonomy = EmotionTaxonomy()) -> TraceSpec:
    """Read a scenario written as INI::

        [trace]
        channels = fer_rmn:FER, ser_erus:SER, presence_cam:PRESENCE
        jitter_ms = 0

        [segment:happy]
        duration_ms = 10000
        rates = fer_rmn:10, ser_erus:1, presence_cam:5
        emotion = happiness:1
        noise = 0.1

    Segments play in file order.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00defaults")
    parser.optionxform = str
    try:
        parser.read_string(text)
        if not parser.has_section("trace"):
            raise InvalidSpec("scenario needs a [trace] section")
        trace = parser["trace"]
        channels = {name: Modality(m.upper()) for name, m in _kv(trace.get("channels", ""))}
        segments = []
        for section in parser.sections():
            if section == "trace":
                continue
            if not section.startswith("segment"):
                raise InvalidSpec(f"unknown section [{section}]")
            seg = parser[section]
            segments.append(
                Segment(
                    duration_ms=int(seg["duration_ms"]),
                    rates={name: float(rate) for name, rate in _kv(seg["rates"])},
                    emotion=_profile(seg["emotion"], taxonomy),
                    ser_emotion=_profile(seg["ser_emotion"], taxonomy) if "ser_emotion" in seg else None,
                    faces=float(seg.get("faces", "1")),
                    voice=float(seg.get("voice", "1")),
                    noise=float(seg.get("noise", "0")),
                )
            )
        return TraceSpec(
            channels=channels,
            segments=segments,
            start_ms=int(trace.get("start_ms", "0")),
            jitter_ms=int(trace.get("jitter_ms", "0")),
            taxonomy=taxonomy,
        )
    except (configparser.Error, KeyError, ValueError) as exc:
        raise InvalidSpec(f"bad scenario: {exc}") from None
