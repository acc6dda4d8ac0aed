"""Closed-form diversity predictions used as reference lines for simulation.

Two regimes are covered: diversity as a function of multiplexing gain
(rate growing with SNR), and diversity as a function of a fixed rate.
The fixed-rate result is governed by the integer threshold parameter
``m_bar``, which counts how many eigenmode failures an outage requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import ContractViolation

__all__ = [
    "DiversityPrediction",
    "m_bar",
    "drt",
    "dmt",
    "classify_regime",
    "predict",
    "REGIME_HIGH_RATE",
    "REGIME_INTERMEDIATE",
    "REGIME_FULL_DIVERSITY",
]

REGIME_HIGH_RATE = "high-rate"
REGIME_INTERMEDIATE = "intermediate"
REGIME_FULL_DIVERSITY = "full-diversity"

_INT_SNAP = 1e-12


@dataclass(frozen=True)
class DiversityPrediction:
    m_bar: int
    d_drt: int          # fixed-rate diversity order
    d_dmt: float        # diversity at the requested multiplexing gain
    full_diversity: bool
    regime_note: str


def _ceil_snapped(x: float) -> int:
    # Absorb float round-off before the ceiling; exact integers stay put.
    nearest = round(x)
    if abs(x - nearest) <= _INT_SNAP * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def m_bar(n_s: int, m_dim: int, rate_bpcu: float) -> int:
    """ceil( (n_s * 2^(-2R/n_s) + M - n_s)^+ ); equals M at zero rate."""
    if rate_bpcu < 0:
        raise ContractViolation(f"rate must be nonnegative, got {rate_bpcu}")
    arg = n_s * 2.0 ** (-2.0 * rate_bpcu / n_s) + m_dim - n_s
    return _ceil_snapped(max(arg, 0.0))


def drt(n_s: int, n_r: int, n_d: int, rate_bpcu: float) -> int:
    """Fixed-rate diversity order.

    min( mbar*(n_r + n_s - 2M + mbar), (n_r - M + mbar)*(n_d - M + mbar)^+ )
    with M = min(n_s, n_r). Zero when the rate is high enough that
    ``m_bar`` vanishes: outage then never decays.
    """
    m = min(n_s, n_r)
    mb = m_bar(n_s, m, rate_bpcu)
    first = mb * (n_r + n_s - 2 * m + mb)
    second = (n_r - m + mb) * max(n_d - m + mb, 0)
    return min(first, second)


def dmt(n_s: int, n_r: int, n_d: int, r_mult: float) -> float:
    """Diversity at multiplexing gain ``r_mult``.

    (n_r - n_s + 1)(1 - 2r/n_s)^+ when n_s <= min(n_r, n_d), else 0.
    """
    if r_mult < 0:
        raise ContractViolation(f"multiplexing gain must be nonnegative, got {r_mult}")
    if n_s > min(n_r, n_d):
        return 0.0
    return (n_r - n_s + 1) * max(1.0 - 2.0 * r_mult / n_s, 0.0)


def classify_regime(n_s: int, m_dim: int, rate_bpcu: float) -> str:
    """Rate regime: full-diversity, intermediate, or high-rate.

    Full diversity below (n_s/2) log2(n_s/(n_s-1)), high rate from
    (n_s/2) log2(n_s) upward; a single source antenna is always in the
    full-diversity regime.
    """
    if n_s < 1 or not (1 <= m_dim <= n_s):
        raise ContractViolation(f"invalid antenna counts n_s={n_s}, m_dim={m_dim}")
    if n_s == 1:
        return REGIME_FULL_DIVERSITY
    if rate_bpcu < 0.5 * n_s * math.log2(n_s / (n_s - 1)):
        return REGIME_FULL_DIVERSITY
    if rate_bpcu >= 0.5 * n_s * math.log2(n_s):
        return REGIME_HIGH_RATE
    return REGIME_INTERMEDIATE


def predict(n_s: int, n_r: int, n_d: int, rate_bpcu: float, r_mult: float = 0.0) -> DiversityPrediction:
    """Bundle all closed-form predictions for one configuration."""
    m = min(n_s, n_r)
    d = drt(n_s, n_r, n_d, rate_bpcu)
    return DiversityPrediction(
        m_bar=m_bar(n_s, m, rate_bpcu),
        d_drt=d,
        d_dmt=dmt(n_s, n_r, n_d, r_mult),
        full_diversity=d == n_r * min(n_s, n_d),
        regime_note=classify_regime(n_s, m, rate_bpcu),
    )
