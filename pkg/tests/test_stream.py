import random

import pytest
from hypothesis import given, strategies as st

from socialreward.core import Modality
from socialreward.errors import (
    BadVector,
    ConfigError,
    FrameError,
    MalformedLine,
    NonMonotonicTimestamp,
    UnknownChannel,
    UnknownLabel,
)
from socialreward.stream import (
    ChannelRegistry,
    ChannelSpec,
    FrameParser,
    PerceptorFrame,
    format_frame,
    merge_streams,
    parse_frame,
    read_trace,
    write_trace,
)

RAVDESS = ("neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised")
RAVDESS_MAP = {
    "neutral": "neutral",
    "calm": "DROP",
    "happy": "happiness",
    "sad": "sadness",
    "angry": "anger",
    "fearful": "fear",
    "disgust": "disgust",
    "surprised": "surprise",
}


def test_parse_fer_line(registry):
    frame = parse_frame("1500|fer_rmn|FER|0.7,0.1,0.05,0.05,0.05,0.03,0.02", registry)
    assert frame == PerceptorFrame(1500, "fer_rmn", Modality.FER, raw=(0.7, 0.1, 0.05, 0.05, 0.05, 0.03, 0.02))


def test_parse_presence_line(registry):
    frame = parse_frame("1500|presence_cam|PRESENCE|faces=2", registry)
    assert frame.face_count == 2 and frame.voice_active is None and frame.raw is None
    frame = parse_frame(b"7|presence_mic|PRESENCE|voice=1,faces=0\n", registry)
    assert frame.face_count == 0 and frame.voice_active is True and frame.present


def test_arity_mismatch(registry):
    with pytest.raises(MalformedLine):
        parse_frame("1500|fer_rmn|FER|0.7,0.1", registry)


@pytest.mark.parametrize(
    "line, error",
    [
        ("", MalformedLine),
        ("1|fer_rmn|FER", MalformedLine),
        ("1|fer_rmn|FER|1,0,0,0,0,0,0|x", MalformedLine),
        ("-1|fer_rmn|FER|1,0,0,0,0,0,0", MalformedLine),
        ("1.5|fer_rmn|FER|1,0,0,0,0,0,0", MalformedLine),
        ("1|fer_rmn|XYZ|1,0,0,0,0,0,0", MalformedLine),
        ("1|fer_rmn|SER|1,0,0,0,0,0,0", MalformedLine),
        ("1|nobody|FER|1,0,0,0,0,0,0", UnknownChannel),
        ("1|fer_rmn|FER|1,0,0,0,0,0,nan", MalformedLine),
        ("1|fer_rmn|FER|1,0,0,0,0,0,0x1", MalformedLine),
        ("1|fer_rmn|FER|1,0,0,0,0,0,-1", BadVector),
        ("1|fer_rmn|FER|0,0,0,0,0,0,0", BadVector),
        ("1|fer_rmn|FER|1e999,0,0,0,0,0,0", BadVector),
        ("1|presence_cam|PRESENCE|", MalformedLine),
        ("1|presence_cam|PRESENCE|faces=-1", MalformedLine),
        ("1|presence_cam|PRESENCE|voice=2", MalformedLine),
        ("1|presence_cam|PRESENCE|faces=1,faces=2", MalformedLine),
        ("1|presence_cam|PRESENCE|smiles=1", MalformedLine),
        (b"1|fer_rmn|FER|\xff,0,0,0,0,0,0", MalformedLine),
    ],
)
def test_rejections(registry, line, error):
    with pytest.raises(error):
        parse_frame(line, registry)


def test_non_monotonic_rejected_and_stream_continues(registry):
    parser = FrameParser(registry)
    lines = [
        "100|fer_rmn|FER|1,0,0,0,0,0,0",
        "50|fer_rmn|FER|1,0,0,0,0,0,0",
        "50|ser_erus|SER|1,0,0,0,0,0,0",
        "120|fer_rmn|FER|1,0,0,0,0,0,0",
    ]
    frames = list(parser.feed(lines))
    assert [f.t for f in frames] == [100, 50, 120]
    assert [d.kind for d in parser.diagnostics] == ["NonMonotonicTimestamp"]
    assert parser.diagnostics[0].line_no == 2


def test_label_mapping_drops_mass(taxonomy):
    reg = ChannelRegistry(taxonomy, {"ser_ravdess": ChannelSpec(Modality.SER, RAVDESS, RAVDESS_MAP)})
    frame = parse_frame("0|ser_ravdess|SER|0.1,0.5,0.2,0,0,0,0,0.2", reg)
    # calm's 0.5 is discarded; neutral 0.1, happiness 0.2, surprise 0.2
    assert frame.raw == (0.0, 0.0, 0.0, 0.2, 0.0, 0.2, 0.1)
    with pytest.raises(BadVector):
        parse_frame("0|ser_ravdess|SER|0,1,0,0,0,0,0,0", reg)


def test_unmapped_label_is_unknown(taxonomy):
    partial = dict(RAVDESS_MAP)
    del partial["calm"]
    reg = ChannelRegistry(taxonomy, {"ser_ravdess": ChannelSpec(Modality.SER, RAVDESS, partial)})
    with pytest.raises(UnknownLabel):
        parse_frame("0|ser_ravdess|SER|0.1,0.5,0.2,0,0,0,0,0.2", reg)


def test_mapping_to_missing_taxonomy_label_rejected(taxonomy):
    with pytest.raises(ConfigError):
        ChannelRegistry(taxonomy, {"x": ChannelSpec(Modality.SER, ("calm",), {"calm": "serenity"})})


finite_nonneg = st.floats(min_value=0, max_value=1e300, allow_nan=False, allow_infinity=False)
fer_frames = st.builds(
    lambda t, ch, raw: PerceptorFrame(t, ch, Modality.FER if ch.startswith("fer") else Modality.SER, raw=tuple(raw)),
    st.integers(0, 2**40),
    st.sampled_from(["fer_rmn", "ser_erus"]),
    st.lists(finite_nonneg, min_size=7, max_size=7).filter(any),
)
presence_frames = st.builds(
    lambda t, faces, voice: PerceptorFrame(t, "presence_cam", Modality.PRESENCE, face_count=faces, voice_active=voice),
    st.integers(0, 2**40),
    st.none() | st.integers(0, 50),
    st.none() | st.booleans(),
).filter(lambda f: f.face_count is not None or f.voice_active is not None)


@given(fer_frames | presence_frames)
def test_round_trip(registry, frame):
    line = format_frame(frame)
    parsed = parse_frame(line, registry)
    assert parsed == frame
    assert format_frame(parsed) == line


def test_canonical_form(registry):
    assert format_frame(parse_frame("5|fer_rmn|FER|1.50,0,0,0,0,0,.25", registry)) == "5|fer_rmn|FER|1.5,0.0,0.0,0.0,0.0,0.0,0.25"


@given(st.binary(max_size=200))
def test_arbitrary_bytes_never_crash(registry, data):
    parser = FrameParser(registry)
    frame = parser.parse(data)
    assert (frame is None) == (len(parser.diagnostics) == 1)


def _frame(t, ch):
    return PerceptorFrame(t, ch, Modality.PRESENCE, face_count=1)


def test_merge_tie_break():
    out = list(merge_streams([[_frame(10, "b")], [_frame(10, "a")]]))
    assert [f.channel for f in out] == ["a", "b"]


def test_merge_identity():
    assert list(merge_streams([[], [_frame(5, "a")]])) == [_frame(5, "a")]


def test_merge_equals_brute_force_sort():
    rng = random.Random(3)
    sources = []
    for s in range(3):
        ts = sorted(rng.randint(0, 50) for _ in range(100))
        sources.append([_frame(t, rng.choice("abcd")) for t in ts])
    merged = list(merge_streams(sources))
    keyed = sorted(
        ((f.t, f.channel, s, i), f) for s, src in enumerate(sources) for i, f in enumerate(src)
    )
    brute = [f for _, f in keyed]
    assert merged == brute


def test_merge_invariant_under_source_permutation():
    rng = random.Random(5)
    sources = [[_frame(t, ch) for t in sorted(rng.randint(0, 30) for _ in range(40))] for ch in "xyz"]
    a = list(merge_streams(sources))
    b = list(merge_streams(list(reversed(sources))))
    assert a == b


def test_merge_skips_backwards_frames():
    diags = []
    out = list(merge_streams([[_frame(5, "a"), _frame(3, "a"), _frame(7, "a")]], diags))
    assert [f.t for f in out] == [5, 7]
    assert len(diags) == 1


def test_trace_file_round_trip(tmp_path, registry):
    frames = [
        PerceptorFrame(0, "fer_rmn", Modality.FER, raw=(1.0, 0, 0, 0, 0, 0, 0)),
        PerceptorFrame(0, "presence_cam", Modality.PRESENCE, face_count=1, voice_active=False),
    ]
    path = tmp_path / "t.srft"
    write_trace(path, frames)
    loaded, diags = read_trace(path, registry)
    assert loaded == frames and diags == []


def test_frame_errors_share_base(registry):
    for line in ["x", "1|zz|FER|1"]:
        with pytest.raises(FrameError):
            parse_frame(line, registry)
