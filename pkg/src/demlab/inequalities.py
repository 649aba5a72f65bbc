"""Azuma-Hoeffding and Freedman tail bounds, and their empirical counterparts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ParameterError


@dataclass(frozen=True)
class AzumaParams:
    C: float
    m: int
    lam: float

    def __post_init__(self):
        if not (self.C > 0 and self.m > 0 and self.lam > 0):
            raise ParameterError(f"Azuma parameters must be positive: {self}")


@dataclass(frozen=True)
class FreedmanParams:
    C: float
    b: float
    lam: float

    def __post_init__(self):
        if not (self.C > 0 and self.b >= 0 and self.lam > 0):
            raise ParameterError(f"need C > 0, b >= 0, lambda > 0: {self}")


def azuma_bound(p: AzumaParams) -> float:
    """``Pr(Y_m - Y_0 >= lam) <= exp(-lam^2 / (2 C^2 m))`` for a supermartingale
    with increments bounded by C in absolute value."""
    return min(1.0, math.exp(-p.lam * p.lam / (2.0 * p.C * p.C * p.m)))


def freedman_bound(p: FreedmanParams) -> float:
    """``exp(-lam^2 / (2 (b + C lam)))``; C bounds increments from above only
    and b bounds the accumulated conditional variance."""
    if math.isinf(p.b):
        return 1.0
    return min(1.0, math.exp(-p.lam * p.lam / (2.0 * (p.b + p.C * p.lam))))


def empirical_tail(final_deviations: Sequence[float], lam: float) -> float:
    """Fraction of deviations ``>= lam`` (inclusive)."""
    if len(final_deviations) == 0:
        raise ParameterError("empirical tail of an empty sample")
    hits = sum(1 for x in final_deviations if x >= lam)
    return hits / len(final_deviations)


@dataclass
class VarianceLedger:
    """Running sum V_i of per-step conditional variances; V_0 = 0."""

    total: float = 0.0
    entries: list[float] = field(default_factory=list)


def accumulate_variance(ledger: VarianceLedger, step_variance: float) -> VarianceLedger:
    if not step_variance >= 0:
        raise ParameterError(f"variance must be non-negative, got {step_variance}")
    ledger.entries.append(float(step_variance))
    ledger.total += float(step_variance)
    return ledger
