"""Run configuration: one INI file, validated completely before any processing.

Example::

    [taxonomy]
    labels = anger, disgust, fear, happiness, sadness, surprise, neutral

    [fusion]
    k_fer = 1.0
    k_ser = 0.25
    k_presence = 0.1
    # label:weight pairs (unlisted labels weigh 0) or k plain numbers
    w_fer = happiness:1, surprise:0.5, anger:-1, disgust:-1, fear:-1, sadness:-1
    normalize_weights = true
    tick_period_ms = 100

    [channel:ser_erus]
    modality = SER
    labels = neutral, calm, happy, sad, angry, fearful, disgust, surprised
    map = calm:DROP, happy:happiness, sad:sadness, angry:anger, fearful:fear, surprised:surprise

    [eval]
    bins = 20
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .core import DEFAULT_LABELS, EmotionTaxonomy, FusionConfig, Modality, default_weights, unit_weights
from .errors import ConfigError, SocialRewardError
from .stream import DROP, ChannelRegistry, ChannelSpec

DEFAULT_CHANNELS = {
    "fer_rmn": Modality.FER,
    "ser_erus": Modality.SER,
    "ser_mevonai": Modality.SER,
    "ser_mser": Modality.SER,
    "presence_cam": Modality.PRESENCE,
    "presence_mic": Modality.PRESENCE,
}

_SECTION_KEYS = {
    "taxonomy": {"labels"},
    "fusion": {
        "k_fer",
        "k_ser",
        "k_presence",
        "w_fer",
        "w_ser",
        "normalize_weights",
        "tick_period_ms",
        "fer_window_ms",
        "ser_window_ms",
        "presence_window_ms",
        "missing_modality_policy",
    },
    "eval": {"bins", "test_fraction", "seed", "k_max"},
    "output": {"rewards", "reports"},
}
_CHANNEL_KEYS = {"modality", "labels", "map"}


@dataclass
class EvalOptions:
    bins: int = 20
    test_fraction: float = 0.25
    seed: int = 0
    k_max: Optional[int] = None


@dataclass
class RunConfig:
    taxonomy: EmotionTaxonomy
    fusion: FusionConfig
    registry: ChannelRegistry
    eval: EvalOptions = field(default_factory=EvalOptions)
    rewards_path: Optional[str] = None
    reports_dir: Optional[str] = None

    @classmethod
    def default(cls) -> "RunConfig":
        taxonomy = EmotionTaxonomy()
        return cls(taxonomy, FusionConfig.default(taxonomy), ChannelRegistry.identity(taxonomy, DEFAULT_CHANNELS))


def _split(text: str) -> List[str]:
    return [item.strip() for item in text.replace("\n", ",").split(",") if item.strip()]


def _float(section: str, key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    return value


def _int(section: str, key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {text!r} is not an integer") from None


def _pairs(section: str, key: str, text: str) -> List[Tuple[str, str]]:
    pairs = []
    for item in _split(text):
        name, sep, value = item.partition(":")
        if not sep:
            raise ConfigError(f"[{section}] {key}: {item!r} is not label:value")
        pairs.append((name.strip(), value.strip()))
    return pairs


def _weights(key: str, text: str, taxonomy: EmotionTaxonomy) -> Tuple[float, ...]:
    items = _split(text)
    if items and all(":" not in item for item in items):
        if len(items) != taxonomy.k:
            raise ConfigError(f"[fusion] {key} needs {taxonomy.k} values, got {len(items)}")
        return tuple(_float("fusion", key, v) for v in items)
    w = [0.0] * taxonomy.k
    for label, value in _pairs("fusion", key, text):
        if label not in taxonomy:
            raise ConfigError(f"[fusion] {key}: label {label!r} is not in the taxonomy")
        w[taxonomy.index(label)] = _float("fusion", key, value)
    return tuple(w)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00defaults", strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    channel_sections = []
    for section in parser.sections():
        if section.startswith("channel:"):
            allowed = _CHANNEL_KEYS
            channel_sections.append(section)
        elif section in _SECTION_KEYS:
            allowed = _SECTION_KEYS[section]
        else:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - allowed
        if unknown:
            raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")

    def get(section: str, key: str) -> Optional[str]:
        if parser.has_section(section) and key in parser[section]:
            return parser[section][key]
        return None

    labels = get("taxonomy", "labels")
    taxonomy = EmotionTaxonomy(tuple(_split(labels)) if labels is not None else DEFAULT_LABELS)

    params: Dict[str, object] = {}
    for key in ("k_fer", "k_ser", "k_presence"):
        if get("fusion", key) is not None:
            params[key] = _float("fusion", key, get("fusion", key))
    for key, name in (
        ("tick_period_ms", "tick_period"),
        ("fer_window_ms", "fer_window"),
        ("ser_window_ms", "ser_window"),
        ("presence_window_ms", "presence_window"),
    ):
        if get("fusion", key) is not None:
            params[name] = _int("fusion", key, get("fusion", key))
    if get("fusion", "missing_modality_policy") is not None:
        params["missing_modality_policy"] = get("fusion", "missing_modality_policy").strip()
    normalize = False
    if get("fusion", "normalize_weights") is not None:
        try:
            normalize = parser.getboolean("fusion", "normalize_weights")
        except ValueError:
            raise ConfigError("[fusion] normalize_weights must be a boolean") from None
    for key in ("w_fer", "w_ser"):
        raw = get("fusion", key)
        w = _weights(key, raw, taxonomy) if raw is not None else default_weights(taxonomy)
        if normalize:
            try:
                w = unit_weights(w)
            except SocialRewardError as exc:
                raise ConfigError(f"[fusion] {key}: {exc}") from None
        params[key] = w
    fusion = FusionConfig(**params)

    if channel_sections:
        channels = {}
        for section in channel_sections:
            name = section[len("channel:"):].strip()
            modality_text = get(section, "modality")
            if modality_text is None:
                raise ConfigError(f"[{section}] modality is required")
            try:
                modality = Modality(modality_text.strip().upper())
            except ValueError:
                raise ConfigError(f"[{section}] unknown modality {modality_text!r}") from None
            ch_labels = tuple(_split(get(section, "labels") or ""))
            mapping = {}
            if get(section, "map") is not None:
                mapping = dict(_pairs(section, "map", get(section, "map")))
                if not ch_labels:
                    raise ConfigError(f"[{section}] map requires an explicit labels list")
            if ch_labels and not mapping:
                mapping = {lbl: lbl for lbl in ch_labels}
            if len(set(ch_labels)) != len(ch_labels):
                raise ConfigError(f"[{section}] labels must be unique")
            for lbl in mapping:
                if lbl not in ch_labels:
                    raise ConfigError(f"[{section}] map names {lbl!r}, which is not in labels")
            for lbl in ch_labels:
                if lbl not in mapping:
                    raise ConfigError(f"[{section}] label {lbl!r} has no mapping (use {lbl}:{DROP} to discard it)")
            channels[name] = ChannelSpec(modality, ch_labels, mapping)
        registry = ChannelRegistry(taxonomy, channels)
    else:
        registry = ChannelRegistry.identity(taxonomy, DEFAULT_CHANNELS)

    opts = EvalOptions()
    if get("eval", "bins") is not None:
        opts.bins = _int("eval", "bins", get("eval", "bins"))
        if opts.bins < 1:
            raise ConfigError("[eval] bins must be >= 1")
    if get("eval", "test_fraction") is not None:
        opts.test_fraction = _float("eval", "test_fraction", get("eval", "test_fraction"))
        if not 0 < opts.test_fraction < 1:
            raise ConfigError("[eval] test_fraction must lie strictly between 0 and 1")
    if get("eval", "seed") is not None:
        opts.seed = _int("eval", "seed", get("eval", "seed"))
    if get("eval", "k_max") is not None:
        opts.k_max = _int("eval", "k_max", get("eval", "k_max"))
        if not 1 <= opts.k_max <= taxonomy.k:
            raise ConfigError(f"[eval] k_max must lie in 1..{taxonomy.k}")

    return RunConfig(
        taxonomy,
        fusion,
        registry,
        opts,
        rewards_path=get("output", "rewards"),
        reports_dir=get("output", "reports"),
    )


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig.default()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path)
