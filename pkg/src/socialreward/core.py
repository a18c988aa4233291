"""Emotion taxonomy, vector math and the per-tick reward equation.

Vectors are plain tuples of floats indexed by an :class:`EmotionTaxonomy`.
Everything in here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

from .errors import ConfigError, DimensionMismatch, Negative, NonFinite, ZeroVector

EmotionVector = Tuple[float, ...]

DEFAULT_LABELS = ("anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral")

# Sign pattern of the default valence weights, before unit normalization.
DEFAULT_VALENCE = {
    "happiness": 1.0,
    "surprise": 0.5,
    "anger": -1.0,
    "disgust": -1.0,
    "fear": -1.0,
    "sadness": -1.0,
    "neutral": 0.0,
}

UNIT_TOL = 1e-9


class Modality(str, Enum):
    FER = "FER"
    SER = "SER"
    PRESENCE = "PRESENCE"


@dataclass(frozen=True)
class EmotionTaxonomy:
    labels: Tuple[str, ...] = DEFAULT_LABELS
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ConfigError("taxonomy needs at least 2 labels")
        for label in labels:
            if not label or label != label.lower() or not label.strip() == label:
                raise ConfigError(f"taxonomy label {label!r} must be non-empty lowercase")
            if "|" in label or "," in label:
                raise ConfigError(f"taxonomy label {label!r} contains a delimiter")
        if len(set(labels)) != len(labels):
            raise ConfigError("taxonomy labels must be unique")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self._index[label]

    def __contains__(self, label) -> bool:
        return label in self._index

    def one_hot(self, label: str) -> EmotionVector:
        i = self.index(label)
        return tuple(1.0 if j == i else 0.0 for j in range(self.k))


def l2_norm(values: Sequence[float]) -> float:
    return math.hypot(*values)


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise DimensionMismatch(f"vector lengths differ: {len(a)} != {len(b)}")
    return math.fsum(x * y for x, y in zip(a, b))


def _check_finite(values: Sequence[float]) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NonFinite(f"non-finite value {v!r} in vector")


def normalize_unit(raw: Sequence[float]) -> EmotionVector:
    """Scale a nonnegative raw estimate onto the unit L2 sphere.

    >>> normalize_unit((3.0, 4.0, 0.0))
    (0.6, 0.8, 0.0)
    """
    _check_finite(raw)
    for v in raw:
        if v < 0:
            raise Negative(f"negative value {v!r} in raw vector")
    norm = l2_norm(raw)
    if norm == 0.0:
        raise ZeroVector("raw vector has zero norm")
    return tuple(v / norm for v in raw)


def unit_weights(weights: Sequence[float]) -> EmotionVector:
    """Like :func:`normalize_unit` but signed weights are allowed."""
    _check_finite(weights)
    norm = l2_norm(weights)
    if norm == 0.0:
        raise ZeroVector("weight vector has zero norm")
    return tuple(w / norm for w in weights)


def is_unit(values: Sequence[float], tol: float = UNIT_TOL) -> bool:
    return abs(math.fsum(v * v for v in values) - 1.0) <= tol


@dataclass(frozen=True)
class ModalitySnapshot:
    modality: Modality
    vectors: Tuple[EmotionVector, ...] = ()
    model_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.vectors) != len(self.model_ids):
            raise DimensionMismatch("one model id per vector required")
        if len(set(self.model_ids)) != len(self.model_ids):
            raise ConfigError("model ids in a snapshot must be unique")
        for vec in self.vectors:
            if not is_unit(vec):
                raise ConfigError("snapshot vectors must be unit-normalized")

    @property
    def n(self) -> int:
        return len(self.vectors)


def average_modality(snapshot: ModalitySnapshot) -> Optional[EmotionVector]:
    """Elementwise mean of the per-model vectors, or None with no models.

    The mean is deliberately left un-normalized, so its norm can be below 1.
    """
    n = snapshot.n
    if n == 0:
        return None
    k = len(snapshot.vectors[0])
    if any(len(v) != k for v in snapshot.vectors):
        raise DimensionMismatch("vectors in a snapshot differ in length")
    return tuple(math.fsum(v[i] for v in snapshot.vectors) / n for i in range(k))


def default_weights(taxonomy: EmotionTaxonomy) -> EmotionVector:
    raw = [DEFAULT_VALENCE.get(label, 0.0) for label in taxonomy.labels]
    if not any(raw):
        raise ConfigError("taxonomy shares no labels with the default valence table")
    return unit_weights(raw)


@dataclass(frozen=True)
class FusionConfig:
    """Design parameters of the reward plus the windowing plumbing.

    Durations are integer milliseconds.
    """

    w_fer: EmotionVector
    w_ser: EmotionVector
    k_fer: float = 1.0
    k_ser: float = 0.25
    k_presence: float = 0.1
    tick_period: int = 100
    fer_window: int = 500
    ser_window: int = 2000
    presence_window: int = 1000
    missing_modality_policy: str = "zero_contribution"

    def __post_init__(self):
        object.__setattr__(self, "w_fer", tuple(float(v) for v in self.w_fer))
        object.__setattr__(self, "w_ser", tuple(float(v) for v in self.w_ser))
        for name in ("w_fer", "w_ser"):
            w = getattr(self, name)
            if not all(math.isfinite(v) for v in w):
                raise ConfigError(f"{name} must be finite")
            if not is_unit(w):
                raise ConfigError(
                    f"{name} must have unit L2 norm (sum of squares = 1 within {UNIT_TOL}),"
                    f" got {math.fsum(v * v for v in w)!r}"
                )
        if len(self.w_fer) != len(self.w_ser):
            raise ConfigError("w_fer and w_ser must have the same length")
        for name in ("k_fer", "k_ser", "k_presence"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        for name in ("tick_period", "fer_window", "ser_window", "presence_window"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer number of milliseconds")
        if self.tick_period <= 0:
            raise ConfigError("tick_period must be > 0")
        for name in ("fer_window", "ser_window", "presence_window"):
            if getattr(self, name) < self.tick_period:
                raise ConfigError(f"{name} must be >= tick_period")
        if self.missing_modality_policy != "zero_contribution":
            raise ConfigError(
                f"unsupported missing_modality_policy {self.missing_modality_policy!r}"
            )

    @classmethod
    def default(cls, taxonomy: EmotionTaxonomy = EmotionTaxonomy(), **overrides) -> "FusionConfig":
        w = default_weights(taxonomy)
        params = {"w_fer": w, "w_ser": w}
        params.update(overrides)
        return cls(**params)

    @property
    def k(self) -> int:
        return len(self.w_fer)

    @property
    def gain_bound(self) -> float:
        return abs(self.k_fer) + abs(self.k_ser) + abs(self.k_presence)

    @property
    def max_window(self) -> int:
        return max(self.fer_window, self.ser_window, self.presence_window)


@dataclass(frozen=True)
class RewardSample:
    tick_time: int
    r_total: float
    r_fer: float
    r_ser: float
    r_presence: float
    presence: float = 0.0
    x_fer: Optional[EmotionVector] = None
    x_ser: Optional[EmotionVector] = None


def reward(
    x_fer: Optional[Sequence[float]],
    x_ser: Optional[Sequence[float]],
    presence: float,
    cfg: FusionConfig,
) -> Tuple[float, float, float, float]:
    """Return ``(r_total, r_fer, r_ser, r_presence)`` for one tick.

    An absent modality contributes exactly zero.
    """
    for name, x in (("x_fer", x_fer), ("x_ser", x_ser)):
        if x is None:
            continue
        if len(x) != cfg.k:
            raise DimensionMismatch(f"{name} has {len(x)} values, taxonomy has {cfg.k}")
        _check_finite(x)
    r_fer = cfg.k_fer * dot(cfg.w_fer, x_fer) if x_fer is not None else 0.0
    r_ser = cfg.k_ser * dot(cfg.w_ser, x_ser) if x_ser is not None else 0.0
    r_presence = cfg.k_presence * presence
    r_total = r_fer + r_ser + r_presence
    return r_total, r_fer, r_ser, r_presence
