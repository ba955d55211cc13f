"""Route-difficulty (CDM) accumulation policies.

A router increases the CDM byte of every connection-request cell it
forwards. The increment policy is pluggable: plain hop count, or a
load-aware variant whose increment grows with outbound link utilization
(which is what makes concurrent connections spread over parallel routes).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

CDM_MAX = 255


class _Saturated:
    """Sentinel: the CDM byte would overflow; the cell is not forwardable."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SATURATED"


SATURATED = _Saturated()


@dataclass(frozen=True)
class MetricPolicy:
    kind: str  # "hop" or "load"
    load_scale: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("hop", "load"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.load_scale < 0:
            raise ValueError("load_scale must be non-negative")


HOP_COUNT = MetricPolicy("hop")


def parse_metric(text: str) -> MetricPolicy:
    """Parse a scenario metric key: ``hop`` or ``load:<scale>``."""
    text = text.strip()
    if text == "hop":
        return HOP_COUNT
    if text.startswith("load:"):
        return MetricPolicy("load", Fraction(text[5:]))
    raise ValueError(f"bad metric spec {text!r} (want 'hop' or 'load:<scale>')")


def increment_for(policy: MetricPolicy, link) -> int:
    """Per-link CDM increment, always >= 1.

    For the load-aware policy the increment is
    ``1 + floor(load_scale * reserved/capacity)``, computed with exact
    rational arithmetic so identical runs never diverge on rounding.
    """
    if policy.kind == "hop":
        return 1
    util = Fraction(link.reserved_kbps, link.capacity_kbps)
    return 1 + int(policy.load_scale * util)


def increment_cdm(cdm: int, policy: MetricPolicy, link) -> Union[int, _Saturated]:
    """Apply the policy increment to *cdm*, saturating at the byte ceiling.

    Returns SATURATED when the result would exceed 255; a saturated cell
    is dropped by the caller rather than forwarded.
    """
    value = cdm + increment_for(policy, link)
    if value > CDM_MAX:
        return SATURATED
    return value
