"""Tick-driven fusion of the merged frame stream into reward samples.

Tick ``i`` fires at ``epoch + i * tick_period``. A tick at time ``T`` sees
every frame with ``t <= T``; frames are ingested in stream order, and all
ticks strictly before a frame's timestamp are emitted before that frame is
buffered.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Tuple

from .core import (
    EmotionTaxonomy,
    EmotionVector,
    FusionConfig,
    Modality,
    ModalitySnapshot,
    RewardSample,
    average_modality,
    normalize_unit,
    reward,
)
from .errors import SocialRewardError
from .stream import ChannelRegistry, Diagnostic, PerceptorFrame, format_real

log = logging.getLogger(__name__)

REWARD_SUFFIX = ".srfr"


def presence_fraction(
    history: Dict[str, Iterable[Tuple[int, bool]]], tick_time: int, window: int
) -> float:
    """Fraction of the integer milliseconds in ``(tick_time - window, tick_time]``
    during which any presence channel holds a positive observation.

    An observation made at ``t`` holds until the channel's next observation,
    and never for longer than ``window`` ms.
    """
    lo = tick_time - window + 1
    hi = tick_time + 1
    intervals = []
    for obs in history.values():
        obs = list(obs)
        for j, (t, present) in enumerate(obs):
            if not present:
                continue
            end = t + window
            if j + 1 < len(obs):
                end = min(end, obs[j + 1][0])
            start, end = max(t, lo), min(end, hi)
            if start < end:
                intervals.append((start, end))
    if not intervals:
        return 0.0
    intervals.sort()
    covered = 0
    cur_start, cur_end = intervals[0]
    for start, end in intervals[1:]:
        if start > cur_end:
            covered += cur_end - cur_start
            cur_start, cur_end = start, end
        elif end > cur_end:
            cur_end = end
    covered += cur_end - cur_start
    return covered / window


class FusionEngine:
    """Owns the windowed state; feed it frames with :meth:`ingest` and
    advance time with :meth:`tick`."""

    def __init__(
        self,
        cfg: FusionConfig,
        registry: ChannelRegistry,
        taxonomy: Optional[EmotionTaxonomy] = None,
        epoch: Optional[int] = None,
    ):
        self.cfg = cfg
        self.registry = registry
        self.taxonomy = taxonomy or registry.taxonomy
        if self.taxonomy.k != cfg.k:
            raise SocialRewardError(
                f"config weights have {cfg.k} entries, taxonomy has {self.taxonomy.k}"
            )
        self.epoch = epoch
        self._next_index = 0
        self.last_tick: Optional[int] = None
        self.last_frame_t: Optional[int] = None
        # newest normalized estimate per channel
        self._latest: Dict[Modality, Dict[str, Tuple[int, EmotionVector]]] = {
            Modality.FER: {},
            Modality.SER: {},
        }
        self._presence: Dict[str, Deque[Tuple[int, bool]]] = {}
        self.diagnostics: List[Diagnostic] = []

    @property
    def next_tick_time(self) -> Optional[int]:
        if self.epoch is None:
            return None
        return self.epoch + self._next_index * self.cfg.tick_period

    def ingest(self, frame: PerceptorFrame) -> List[RewardSample]:
        """Buffer ``frame`` after emitting every tick that precedes it."""
        if self.epoch is None:
            self.epoch = frame.t
        if self.last_tick is not None and frame.t <= self.last_tick:
            diag = Diagnostic(
                "LateFrame",
                f"frame at t={frame.t} on {frame.channel!r} arrived after tick {self.last_tick}",
            )
            log.warning("%s", diag)
            self.diagnostics.append(diag)
            return []
        samples = self.tick(frame.t - 1)
        if frame.modality is Modality.PRESENCE:
            self._presence.setdefault(frame.channel, deque()).append((frame.t, frame.present))
        else:
            self._latest[frame.modality][frame.channel] = (frame.t, normalize_unit(frame.raw))
        if self.last_frame_t is None or frame.t > self.last_frame_t:
            self.last_frame_t = frame.t
        return samples

    def tick(self, now: int) -> List[RewardSample]:
        """Emit one sample per tick boundary at or before ``now``."""
        if self.epoch is None:
            return []
        out = []
        while True:
            tick_time = self.epoch + self._next_index * self.cfg.tick_period
            if tick_time > now:
                break
            out.append(self._sample(tick_time))
            self.last_tick = tick_time
            self._next_index += 1
        return out

    def finish(self, until: Optional[int] = None) -> List[RewardSample]:
        """Flush ticks: those before ``until`` when given, else through the last frame."""
        if until is not None:
            if self.epoch is None:
                self.epoch = 0
            return self.tick(until - 1)
        if self.last_frame_t is None:
            return []
        return self.tick(self.last_frame_t)

    def _modality_vector(self, modality: Modality, tick_time: int, window: int) -> Optional[EmotionVector]:
        latest = self._latest[modality]
        for channel in [c for c, (t, _) in latest.items() if t <= tick_time - window]:
            del latest[channel]
        ids = tuple(sorted(latest))
        snapshot = ModalitySnapshot(modality, tuple(latest[c][1] for c in ids), ids)
        return average_modality(snapshot)

    def _sample(self, tick_time: int) -> RewardSample:
        cfg = self.cfg
        x_fer = self._modality_vector(Modality.FER, tick_time, cfg.fer_window)
        x_ser = self._modality_vector(Modality.SER, tick_time, cfg.ser_window)
        horizon = tick_time - 2 * cfg.presence_window
        for channel in list(self._presence):
            buf = self._presence[channel]
            while buf and buf[0][0] <= horizon:
                buf.popleft()
            if not buf:
                del self._presence[channel]
        presence = presence_fraction(self._presence, tick_time, cfg.presence_window)
        r_total, r_fer, r_ser, r_presence = reward(x_fer, x_ser, presence, cfg)
        return RewardSample(tick_time, r_total, r_fer, r_ser, r_presence, presence, x_fer, x_ser)


def run(
    frames: Iterable[PerceptorFrame],
    cfg: FusionConfig,
    registry: ChannelRegistry,
    taxonomy: Optional[EmotionTaxonomy] = None,
    epoch: Optional[int] = None,
    until: Optional[int] = None,
    engine: Optional[FusionEngine] = None,
) -> Iterator[RewardSample]:
    """Drive a fresh engine over an ordered frame stream, yielding samples lazily."""
    engine = engine or FusionEngine(cfg, registry, taxonomy, epoch=epoch)
    for frame in frames:
        yield from engine.ingest(frame)
    yield from engine.finish(until)


def format_sample(sample: RewardSample) -> str:
    return "|".join(
        [
            str(sample.tick_time),
            format_real(sample.r_total),
            format_real(sample.r_fer),
            format_real(sample.r_ser),
            format_real(sample.r_presence),
            format_real(sample.presence),
        ]
    )


def parse_sample(line: str) -> RewardSample:
    parts = line.rstrip("\r\n").split("|")
    if len(parts) != 6:
        raise SocialRewardError(f"reward record needs 6 fields, got {len(parts)}")
    try:
        tick = int(parts[0])
        r_total, r_fer, r_ser, r_presence, presence = (float(p) for p in parts[1:])
    except ValueError as exc:
        raise SocialRewardError(f"bad reward record: {exc}") from None
    return RewardSample(tick, r_total, r_fer, r_ser, r_presence, presence)


def read_rewards(path) -> List[RewardSample]:
    with open(path, encoding="utf-8") as fh:
        return [parse_sample(line) for line in fh if line.strip()]


def write_rewards(path, samples: Iterable[RewardSample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(format_sample(sample) + "\n")
            n += 1
    return n
