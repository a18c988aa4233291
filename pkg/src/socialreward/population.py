"""Per-individual social return and population-level aggregation.

An individual's return is the undiscounted sum of their rewards. The
population objective sums each return after passing it through a monotone
internalisation function, which is where equity preferences live.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from .core import RewardSample
from .errors import ConfigError, MalformedLine, NonFinite
from .fusion import read_rewards

IDENTITY = "identity"
SOFT_EQUITY = "soft_equity"


@dataclass(frozen=True)
class IndividualReturn:
    individual_id: str
    R: float

    def __post_init__(self):
        if not math.isfinite(self.R):
            raise NonFinite(f"return for {self.individual_id!r} is not finite")


@dataclass(frozen=True)
class InternalisationFn:
    """``identity`` or ``soft_equity`` with scale ``a``.

    soft_equity is ``a*log(1 + R/a)`` for R >= 0 and ``-a*(exp(-R/a) - 1)``
    below zero: slope 1 at the origin, concave gains, accelerating losses.
    """

    family: str = IDENTITY
    a: float = 1.0

    def __post_init__(self):
        if self.family not in (IDENTITY, SOFT_EQUITY):
            raise ConfigError(f"unknown internalisation family {self.family!r}")
        if self.family == SOFT_EQUITY and not (self.a > 0 and math.isfinite(self.a)):
            raise ConfigError("soft_equity scale a must be a finite number > 0")

    @classmethod
    def parse(cls, text: str) -> "InternalisationFn":
        """Parse ``identity``, ``soft_equity`` or ``soft_equity:<a>`` (``a=<a>`` also accepted)."""
        family, _, arg = text.strip().partition(":")
        if not arg:
            return cls(family)
        if family != SOFT_EQUITY:
            raise ConfigError(f"{family!r} takes no parameter")
        arg = arg.strip()
        if arg.startswith("a="):
            arg = arg[2:]
        try:
            a = float(arg)
        except ValueError:
            raise ConfigError(f"bad soft_equity scale {arg!r}") from None
        return cls(family, a)

    def __call__(self, R: float) -> float:
        return internalise(self, R)

    def __str__(self) -> str:
        return self.family if self.family == IDENTITY else f"{self.family}:{self.a!r}"


def internalise(f: InternalisationFn, R: float) -> float:
    if f.family == IDENTITY:
        return R
    a = f.a
    if R >= 0:
        return a * math.log1p(R / a)
    try:
        return -a * math.expm1(-R / a)
    except OverflowError:
        return -math.inf


def social_return(samples: Iterable[RewardSample]) -> float:
    return math.fsum(s.r_total for s in samples)


def population_return(returns: Sequence[IndividualReturn], f: InternalisationFn) -> float:
    # plain left-to-right sum, so identity f reproduces sum(R) bit for bit
    return sum((internalise(f, r.R) for r in returns), 0.0)


def read_population_manifest(path) -> List[Tuple[str, str]]:
    """``<individual_id>|<path to .srfr>`` lines; relative paths resolve
    against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) != 2:
                raise MalformedLine(f"{path}:{no}: expected 2 fields, got {len(parts)}")
            ident, rewards = parts
            if ident in seen:
                raise MalformedLine(f"{path}:{no}: duplicate individual {ident!r}")
            seen.add(ident)
            entries.append((ident, rewards if os.path.isabs(rewards) else os.path.join(base, rewards)))
    return entries


def load_returns(manifest_path) -> List[IndividualReturn]:
    return [
        IndividualReturn(ident, social_return(read_rewards(path)))
        for ident, path in read_population_manifest(manifest_path)
    ]
