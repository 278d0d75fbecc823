"""
Severity bank: the discrete corruption levels the generator mixes over.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

from utils.errors import ConfigError
from utils.helpers import split_values

logger = logging.getLogger(__name__)

FAMILIES = ("stripe", "lowres", "contrast")

Operator = Tuple[str, Tuple[float, ...]]

STRIPE_RANGE = (0.0, 0.5)
LOWRES_SCALES = (2, 4)
CONTRAST_FACTOR_RANGE = (0.0, 1.0)
CONTRAST_GAMMA_RANGE = (1.0, 3.0)


def validate_stripe(amplitude: float) -> None:
    if not STRIPE_RANGE[0] <= amplitude <= STRIPE_RANGE[1]:
        raise ValueError(f"stripe amplitude must lie in [0, 0.5], got {amplitude}")


def validate_lowres(scale: int) -> None:
    if scale not in LOWRES_SCALES:
        raise ValueError(f"lowres scale must be one of {LOWRES_SCALES}, got {scale}")


def validate_contrast(factor: float, gamma: float) -> None:
    if not CONTRAST_FACTOR_RANGE[0] < factor <= CONTRAST_FACTOR_RANGE[1]:
        raise ValueError(f"contrast factor must lie in (0, 1], got {factor}")
    if not CONTRAST_GAMMA_RANGE[0] <= gamma <= CONTRAST_GAMMA_RANGE[1]:
        raise ValueError(f"contrast gamma must lie in [1, 3], got {gamma}")


@dataclass(frozen=True)
class SeverityBank:
    """
    Banked levels per family, each ordered by increasing severity.

    Operator 0 is always the identity, followed by the stripe, lowres and
    contrast levels in that order.
    """

    stripe: Tuple[float, ...] = (0.05, 0.15, 0.30)
    lowres: Tuple[int, ...] = (2, 4)
    contrast: Tuple[Tuple[float, float], ...] = ((0.7, 1.0), (0.5, 1.2), (0.3, 1.5))

    def __post_init__(self):
        for amp in self.stripe:
            validate_stripe(amp)
        for scale in self.lowres:
            validate_lowres(scale)
        for factor, gamma in self.contrast:
            validate_contrast(factor, gamma)
        if list(self.stripe) != sorted(self.stripe):
            raise ValueError(f"stripe levels must increase in severity: {self.stripe}")
        if list(self.lowres) != sorted(self.lowres):
            raise ValueError(f"lowres levels must increase in severity: {self.lowres}")
        factors = [f for f, _ in self.contrast]
        if factors != sorted(factors, reverse=True):
            raise ValueError(f"contrast levels must decrease in factor: {self.contrast}")

    def operators(self) -> List[Operator]:
        ops: List[Operator] = [("identity", ())]
        ops += [("stripe", (float(a),)) for a in self.stripe]
        ops += [("lowres", (int(s),)) for s in self.lowres]
        ops += [("contrast", (float(f), float(g))) for f, g in self.contrast]
        return ops

    @property
    def n_ops(self) -> int:
        return 1 + len(self.stripe) + len(self.lowres) + len(self.contrast)

    def levels(self, family: str) -> List[Tuple[float, ...]]:
        if family == "stripe":
            return [(a,) for a in self.stripe]
        if family == "lowres":
            return [(s,) for s in self.lowres]
        if family == "contrast":
            return [tuple(level) for level in self.contrast]
        raise ValueError(f"unknown degradation family {family!r}; expected one of {FAMILIES}")

    def spec_for(self, family: str, level: int) -> str:
        """Degradation spec text for a 1-based bank level."""
        levels = self.levels(family)
        if not 1 <= level <= len(levels):
            raise ValueError(f"{family} has levels 1..{len(levels)}, got {level}")
        params = levels[level - 1]
        return ":".join([family] + [_fmt(p) for p in params])

    def to_section(self) -> str:
        lines = [
            "[bank]",
            f"stripe = {', '.join(_fmt(a) for a in self.stripe)}",
            f"lowres = {', '.join(str(s) for s in self.lowres)}",
            f"contrast = {', '.join(f'{_fmt(f)}:{_fmt(g)}' for f, g in self.contrast)}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_section(cls, values: Dict[str, str]) -> "SeverityBank":
        """Build a bank from the key/value pairs of a `[bank]` section."""
        unknown = set(values) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown bank keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        try:
            if "stripe" in values:
                kwargs["stripe"] = tuple(float(v) for v in split_values(values["stripe"]))
            if "lowres" in values:
                kwargs["lowres"] = tuple(int(v) for v in split_values(values["lowres"]))
            if "contrast" in values:
                pairs = []
                for item in split_values(values["contrast"]):
                    parts = item.split(":")
                    pairs.append((float(parts[0]), float(parts[1]) if len(parts) > 1 else 1.0))
                kwargs["contrast"] = tuple(pairs)
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid bank section: {exc}") from exc


def _fmt(value: float) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))
