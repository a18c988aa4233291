"""Clip-level reward evaluation and component-model metrics.

Standard deviations are population (divide-by-n) throughout; percentiles
interpolate linearly between order statistics.
"""

from __future__ import annotations

import logging
import math
import os
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import EmotionTaxonomy, FusionConfig, RewardSample
from .errors import (
    EmptyClip,
    EmptyPredictions,
    LengthMismatch,
    MalformedLine,
    SocialRewardError,
    TooFewActors,
    ZeroVariance,
)
from .fusion import run
from .stream import ChannelRegistry, Diagnostic, read_trace

log = logging.getLogger(__name__)

LABELS = (-2, -1, 0, 1, 2)
COMPONENTS = ("total", "fer", "ser", "presence")


# -- clip records -------------------------------------------------------------

@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    trace_path: str
    label: Optional[int]  # None means n/a

    @property
    def is_na(self) -> bool:
        return self.label is None


def parse_label(text: str) -> Optional[int]:
    text = text.strip()
    if text.lower() in ("na", "n/a"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise MalformedLine(f"bad clip label {text!r}") from None
    if value not in LABELS:
        raise MalformedLine(f"clip label {value} is outside -2..+2")
    return value


def format_label(label: Optional[int]) -> str:
    if label is None:
        return "na"
    return f"{label:+d}" if label else "0"


def read_manifest(path) -> List[ClipRecord]:
    """``<clip_id>|<trace_path>|<label>`` lines; relative trace paths resolve
    against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    clips = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) != 3:
                raise MalformedLine(f"{path}:{no}: expected 3 fields, got {len(parts)}")
            clip_id, trace, label = parts
            trace = trace if os.path.isabs(trace) else os.path.join(base, trace)
            clips.append(ClipRecord(clip_id, trace, parse_label(label)))
    return clips


# -- basic statistics -----------------------------------------------------------

def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def pstdev(values: Sequence[float]) -> float:
    m = mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / len(values))


def percentile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation at rank ``q * (n - 1)`` of an ascending sequence."""
    n = len(sorted_values)
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


@dataclass(frozen=True)
class DescriptiveStats:
    count: int
    mean: float
    std: float
    min: float
    p25: float
    median: float
    p75: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "DescriptiveStats":
        if not values:
            raise SocialRewardError("descriptive statistics need at least one value")
        s = sorted(values)
        return cls(
            count=len(s),
            mean=mean(s),
            std=pstdev(s),
            min=s[0],
            p25=percentile(s, 0.25),
            median=percentile(s, 0.5),
            p75=percentile(s, 0.75),
            max=s[-1],
        )


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Covariance over the product of standard deviations."""
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} != {len(y)}")
    if len(x) < 2:
        raise LengthMismatch("pearson needs at least 2 points")
    mx, my = mean(x), mean(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("pearson is undefined when either variable is constant")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def histogram(values: Iterable[float], bins: int, lo: float, hi: float) -> List[int]:
    """Fixed-width bin counts over ``[lo, hi]``; out-of-range values land in the edge bins."""
    if bins < 1 or not hi > lo:
        raise SocialRewardError("histogram needs bins >= 1 and hi > lo")
    counts = [0] * bins
    width = (hi - lo) / bins
    for v in values:
        i = int(math.floor((v - lo) / width))
        counts[min(max(i, 0), bins - 1)] += 1
    return counts


# -- clip evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class ClipMeans:
    total: float
    fer: float
    ser: float
    presence: float
    ticks: int

    def component(self, name: str) -> float:
        return getattr(self, name)


def clip_mean_reward(samples: Iterable[RewardSample]) -> ClipMeans:
    samples = list(samples)
    if not samples:
        raise EmptyClip("clip produced no reward samples")
    return ClipMeans(
        total=mean([s.r_total for s in samples]),
        fer=mean([s.r_fer for s in samples]),
        ser=mean([s.r_ser for s in samples]),
        presence=mean([s.r_presence for s in samples]),
        ticks=len(samples),
    )


@dataclass
class ClipReport:
    clip_means: Dict[str, ClipMeans]
    labels: Dict[str, int]
    pearson: Dict[str, Optional[float]]
    stats_by_label: Dict[int, DescriptiveStats]
    stats_by_component: Dict[str, DescriptiveStats]
    histogram_edges: List[float]
    histograms: Dict[str, List[int]]
    diagnostics: List[Diagnostic] = field(default_factory=list)


def evaluate_clip(
    clip: ClipRecord,
    cfg: FusionConfig,
    registry: ChannelRegistry,
    diagnostics: Optional[List[Diagnostic]] = None,
) -> ClipMeans:
    frames, diags = read_trace(clip.trace_path, registry)
    if diagnostics is not None:
        diagnostics.extend(diags)
    return clip_mean_reward(run(frames, cfg, registry))


def evaluate_clips(
    clips: Sequence[ClipRecord],
    cfg: FusionConfig,
    registry: ChannelRegistry,
    bins: int = 20,
) -> ClipReport:
    """Run every labelled clip through fusion and correlate clip means with labels.

    Clips that fail to load or produce no samples are excluded with a
    diagnostic. Raises ZeroVariance when the surviving labels are all equal.
    """
    diagnostics: List[Diagnostic] = []
    means: Dict[str, ClipMeans] = {}
    labels: Dict[str, int] = {}
    for clip in sorted(clips, key=lambda c: c.clip_id):
        if clip.is_na:
            continue
        if clip.clip_id in means:
            raise SocialRewardError(f"duplicate clip id {clip.clip_id!r}")
        try:
            means[clip.clip_id] = evaluate_clip(clip, cfg, registry, diagnostics)
        except (OSError, SocialRewardError) as exc:
            diag = Diagnostic(type(exc).__name__, str(exc), source=clip.clip_id)
            log.warning("%s", diag)
            diagnostics.append(diag)
            continue
        labels[clip.clip_id] = clip.label

    ids = sorted(means)
    if len(ids) < 2:
        raise LengthMismatch("need at least 2 evaluable labelled clips")
    y = [float(labels[c]) for c in ids]
    if len(set(y)) < 2:
        raise ZeroVariance("all evaluated clips carry the same label")

    corr: Dict[str, Optional[float]] = {}
    for comp in COMPONENTS:
        x = [means[c].component(comp) for c in ids]
        try:
            corr[comp] = pearson(x, y)
        except ZeroVariance:
            corr[comp] = None

    by_label = {}
    for label in LABELS:
        vals = [means[c].total for c in ids if labels[c] == label]
        if vals:
            by_label[label] = DescriptiveStats.of(vals)
    by_component = {comp: DescriptiveStats.of([means[c].component(comp) for c in ids]) for comp in COMPONENTS}

    span = cfg.gain_bound or 1.0
    edges = [-span + 2 * span * i / bins for i in range(bins + 1)]
    hists = {comp: histogram([means[c].component(comp) for c in ids], bins, -span, span) for comp in COMPONENTS}
    return ClipReport(means, labels, corr, by_label, by_component, edges, hists, diagnostics)


# -- model metrics -------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    actor_id: str
    true_label: str
    scores: Tuple[float, ...]


def read_predictions(path, taxonomy: EmotionTaxonomy) -> List[PredictionRecord]:
    """``<sample_id>|<actor_id>|<true_label>|<score_1,...,score_k>`` lines."""
    preds = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            preds.append(parse_prediction(line, taxonomy, where=f"{path}:{no}"))
    return preds


def parse_prediction(line: str, taxonomy: EmotionTaxonomy, where: str = "") -> PredictionRecord:
    parts = line.split("|")
    if len(parts) != 4:
        raise MalformedLine(f"{where}: expected 4 fields, got {len(parts)}")
    sample_id, actor_id, true_label, scores_text = parts
    if true_label not in taxonomy:
        raise MalformedLine(f"{where}: label {true_label!r} is not in the taxonomy")
    try:
        scores = tuple(float(s) for s in scores_text.split(","))
    except ValueError:
        raise MalformedLine(f"{where}: unparsable score") from None
    if len(scores) != taxonomy.k:
        raise MalformedLine(f"{where}: expected {taxonomy.k} scores, got {len(scores)}")
    if any(not math.isfinite(s) or s < 0 for s in scores) or not any(scores):
        raise MalformedLine(f"{where}: scores must be finite, nonnegative, with positive sum")
    return PredictionRecord(sample_id, actor_id, true_label, scores)


def argmax(scores: Sequence[float]) -> int:
    """Index of the largest score; ties go to the lowest index."""
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def rank_of(scores: Sequence[float], index: int) -> int:
    """0-based position of ``index`` when sorting by score descending, ties by index."""
    s = scores[index]
    return sum(1 for j, v in enumerate(scores) if v > s or (v == s and j < index))


def confusion_matrix(
    preds: Sequence[PredictionRecord], taxonomy: EmotionTaxonomy, normalize: str = "counts"
) -> List[List[float]]:
    """Rows are true classes, columns predicted (argmax) classes."""
    if normalize not in ("counts", "row"):
        raise ValueError(f"normalize must be 'counts' or 'row', not {normalize!r}")
    k = taxonomy.k
    counts = [[0] * k for _ in range(k)]
    for p in preds:
        counts[taxonomy.index(p.true_label)][argmax(p.scores)] += 1
    if normalize == "counts":
        return counts
    out = []
    for row in counts:
        n = sum(row)
        out.append([c / n if n else 0.0 for c in row])
    return out


def top_k_accuracy(
    preds: Sequence[PredictionRecord], taxonomy: EmotionTaxonomy, k_max: Optional[int] = None
) -> List[Tuple[int, float]]:
    if not preds:
        raise EmptyPredictions("no predictions to score")
    k_max = taxonomy.k if k_max is None else k_max
    if not 1 <= k_max <= taxonomy.k:
        raise ValueError(f"k_max must be in 1..{taxonomy.k}")
    ranks = [rank_of(p.scores, taxonomy.index(p.true_label)) for p in preds]
    n = len(ranks)
    return [(k, sum(1 for r in ranks if r < k) / n) for k in range(1, k_max + 1)]


def split_by_actor(
    preds: Sequence[PredictionRecord], test_fraction: float, seed: int
) -> Tuple[List[PredictionRecord], List[PredictionRecord]]:
    """Actor-disjoint train/test split.

    Actors are sorted, shuffled with ``seed``, and the test side takes the
    shortest prefix of the shuffled list holding at least
    ``test_fraction`` of all samples. The train side always keeps at least
    one actor.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    counts: Dict[str, int] = {}
    for p in preds:
        counts[p.actor_id] = counts.get(p.actor_id, 0) + 1
    actors = sorted(counts)
    if len(actors) < 2:
        raise TooFewActors(f"need at least 2 actors, got {len(actors)}")
    random.Random(seed).shuffle(actors)
    target = test_fraction * len(preds)
    taken = 0
    test_actors = set()
    for actor in actors[:-1]:
        test_actors.add(actor)
        taken += counts[actor]
        if taken >= target:
            break
    train = [p for p in preds if p.actor_id not in test_actors]
    test = [p for p in preds if p.actor_id in test_actors]
    return train, test


# -- tables ----------------------------------------------------------------------------

def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "nan"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def table(header: Sequence[str], rows: Iterable[Sequence], sep: str = ",") -> str:
    lines = [sep.join(header)]
    for row in rows:
        lines.append(sep.join(v if isinstance(v, str) else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


_STAT_FIELDS = ("count", "mean", "std", "min", "p25", "median", "p75", "max")


def report_tables(report: ClipReport) -> Dict[str, str]:
    tables = {
        "correlation": table(
            ["modality", "pearson_r"], [(c, report.pearson[c]) for c in COMPONENTS]
        ),
        "stats_by_label": table(
            ["label", *_STAT_FIELDS],
            [
                (format_label(lbl), *(getattr(s, f) for f in _STAT_FIELDS))
                for lbl, s in sorted(report.stats_by_label.items(), reverse=True)
            ],
        ),
        "stats_by_modality": table(
            ["modality", *_STAT_FIELDS],
            [(c, *(getattr(report.stats_by_component[c], f) for f in _STAT_FIELDS)) for c in COMPONENTS],
        ),
        "clip_means": table(
            ["clip_id", "label", *COMPONENTS],
            [
                (cid, format_label(report.labels[cid]), *(m.component(c) for c in COMPONENTS))
                for cid, m in sorted(report.clip_means.items())
            ],
        ),
    }
    edges = report.histogram_edges
    tables["histograms"] = table(
        ["bin_lo", "bin_hi", *COMPONENTS],
        [
            (edges[i], edges[i + 1], *(report.histograms[c][i] for c in COMPONENTS))
            for i in range(len(edges) - 1)
        ],
    )
    label_values = list(report.labels.values())
    tables["label_counts"] = table(
        ["label", "count"], [(format_label(lbl), label_values.count(lbl)) for lbl in reversed(LABELS)]
    )
    return tables


def topk_table(train: Sequence[Tuple[int, float]], test: Optional[Sequence[Tuple[int, float]]] = None) -> str:
    if test is None:
        return table(["k", "accuracy"], train)
    return table(["k", "train", "test"], [(k, a, b) for (k, a), (_, b) in zip(train, test)])


def confusion_table(matrix: List[List[float]], taxonomy: EmotionTaxonomy) -> str:
    return table(
        ["true\\pred", *taxonomy.labels],
        [(label, *row) for label, row in zip(taxonomy.labels, matrix)],
    )
