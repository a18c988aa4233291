"""Random traces and configurations shared by the fusion and acceptance tests."""

from socialreward.core import FusionConfig, Modality
from socialreward.synth import Segment, TraceSpec, synth_trace

CHANNELS = {
    "fer_rmn": Modality.FER,
    "fer_b": Modality.FER,
    "ser_erus": Modality.SER,
    "presence_cam": Modality.PRESENCE,
}


def random_trace(rng, taxonomy, max_segment_ms=5000, max_segments=3):
    """A synthetic trace on 1..4 channels with 1..max_segments segments."""
    chosen = rng.sample(sorted(CHANNELS), rng.randint(1, 4))
    segments = []
    for _ in range(rng.randint(1, max_segments)):
        rates = {c: rng.uniform(0.5, 15) for c in chosen if rng.random() < 0.8}
        rates = rates or {chosen[0]: rng.uniform(0.5, 15)}
        segments.append(
            Segment(
                rng.randint(500, max_segment_ms),
                rates,
                [rng.random() for _ in range(taxonomy.k)],
                ser_emotion=[rng.random() for _ in range(taxonomy.k)],
                faces=rng.random(),
                voice=rng.random(),
                noise=rng.uniform(0, 0.5),
            )
        )
    spec = TraceSpec(
        {c: CHANNELS[c] for c in chosen},
        segments,
        start_ms=rng.randint(0, 3000),
        jitter_ms=rng.randint(0, 50),
    )
    return synth_trace(spec, rng.randint(0, 10**6))


def random_cfg(rng):
    tick = rng.choice([50, 100, 250])
    return FusionConfig.default(
        k_fer=rng.uniform(-2, 2),
        k_ser=rng.uniform(-1, 1),
        k_presence=rng.uniform(0, 1),
        tick_period=tick,
        fer_window=tick * rng.randint(1, 8),
        ser_window=tick * rng.randint(1, 20),
        presence_window=tick * rng.randint(1, 10),
    )
